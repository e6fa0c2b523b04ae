#pragma once

#include <string>

#include <json.hpp>

#include "mothernets/clustering.hpp"
#include "mothernets/diagnostics.hpp"
#include "mothernets/inference.hpp"
#include "mothernets/pipeline.hpp"

namespace mothernets {

using json = nlohmann::json;

json to_json(const NetworkArch& arch);
NetworkArch arch_from_json(const json& j);

json to_json(const EnsembleSpec& ensemble);
EnsembleSpec ensemble_from_json(const json& j);

json to_json(const MotherNetResult& result);
MotherNetResult mothernet_result_from_json(const json& j);

json to_json(const ClusterPlan& plan);
ClusterPlan cluster_plan_from_json(const json& j);

json to_json(const TransformStep& step);
TransformStep transform_step_from_json(const json& j);

json to_json(const HatchPlan& plan);
HatchPlan hatch_plan_from_json(const json& j);

json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const json& j);

json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const json& j);

json to_json(const TrainLog& log);
TrainLog train_log_from_json(const json& j);

// Deterministic run summary: logs, clusters and epoch totals; wall-clock
// time is kept out so identical seeds give identical bytes.
json to_json(const RunReport& report);

json to_json(const CovarianceReport& report);

// MNWB weights container: "MNWB" magic, version byte, u32 little-endian JSON
// length, JSON metadata (arch + tensor order), then little-endian f64 tensor
// data in declared order.
void write_weights(const std::string& path, const WeightedNetwork& net);
WeightedNetwork read_weights(const std::string& path);

// CSV with a header containing one "label" column; the remaining columns are
// features. A sidecar <path>.shape.json with {height, width, channels} marks
// a conv dataset with channel-major flattened rows.
Dataset load_csv_dataset(const std::string& path);

// Write via a temp file in the same directory, then rename.
void atomic_write(const std::string& path, const std::string& contents);
void write_json(const std::string& path, const json& j);
json read_json(const std::string& path);

} // namespace mothernets
