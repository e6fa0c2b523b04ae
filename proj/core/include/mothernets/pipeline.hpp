#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mothernets/clustering.hpp"
#include "mothernets/inference.hpp"

namespace mothernets {

enum class RunStrategy { mothernets_g, mothernets_tau, full_data, bagging };

std::string to_string(RunStrategy s);
RunStrategy run_strategy_from_string(const std::string& s);

struct RunConfig {
    EnsembleSpec ensemble;
    RunStrategy strategy = RunStrategy::mothernets_g;
    int g = 1;
    double tau = 0.5;
    TrainConfig train;        // member training / fine-tuning
    TrainConfig mother_train; // MotherNet convergence training
    // Gaussian noise applied to introduced parameters after hatching;
    // negative means automatic (0.01 x the hatched weights' std deviation).
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    int max_cluster_iters = 50;
    int jobs = 1;
    bool scale_init = true;    // 1/sqrt(fan_in) scaling; false = unscaled
    bool bag_finetune = false; // fine-tune hatched members on bootstrap resamples
};

struct MemberResult {
    std::string name;
    TrainLog log;
    WeightedNetwork net;
};

struct RunReport {
    std::vector<MemberResult> members;
    std::vector<TrainLog> mother_logs; // one per cluster (mothernets strategies)
    ClusterPlan clusters;
    bool has_clusters = false;
    std::int64_t total_epochs = 0; // all trainings, MotherNets included
    double wall_seconds = 0.0;
};

// Executes the configured strategy on dense ensembles. mothernets: cluster,
// train each MotherNet, hatch + perturb + fine-tune each member; full_data:
// independent training per member; bagging: per-member bootstrap resamples.
// Throws StrategyUnsupported for conv ensembles.
RunReport run(const RunConfig& cfg, const Dataset& data);

// Same-size resample with replacement, deterministic per seed.
Dataset bag_sample(const Dataset& data, std::uint64_t seed);

// wall_seconds / 3600 * rate.
double cost_report(const RunReport& report, double rate_usd_per_hour);

} // namespace mothernets
