#include "mothernets/io.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace mothernets {

namespace {

json shape_to_json(const InputShape& s, ArchKind kind) {
    if (kind == ArchKind::dense) return json{{"features", s.features}};
    return json{{"height", s.height}, {"width", s.width}, {"channels", s.channels}};
}

InputShape shape_from_json(const json& j, ArchKind kind) {
    InputShape s;
    if (kind == ArchKind::dense) {
        s.features = j.at("features").get<int>();
    } else {
        s.height = j.at("height").get<int>();
        s.width = j.at("width").get<int>();
        s.channels = j.at("channels").get<int>();
    }
    return s;
}

} // namespace

json to_json(const NetworkArch& arch) {
    json j;
    j["kind"] = arch.kind == ArchKind::dense ? "dense" : "conv";
    j["input_shape"] = shape_to_json(arch.input_shape, arch.kind);
    if (arch.kind == ArchKind::conv) {
        json blocks = json::array();
        for (const auto& block : arch.conv_blocks) {
            json layers = json::array();
            for (const auto& layer : block.layers)
                layers.push_back({{"filter_size", layer.filter_size},
                                  {"num_filters", layer.num_filters},
                                  {"input_padding", layer.input_padding}});
            blocks.push_back({{"layers", layers}, {"followed_by_pool", block.followed_by_pool}});
        }
        j["conv_blocks"] = blocks;
    }
    json layers = json::array();
    for (const auto& layer : arch.dense_layers)
        layers.push_back({{"units", layer.units},
                          {"activation", to_string(layer.activation)},
                          {"residual", layer.residual}});
    j["dense_layers"] = layers;
    return j;
}

NetworkArch arch_from_json(const json& j) {
    NetworkArch arch;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "dense")
        arch.kind = ArchKind::dense;
    else if (kind == "conv")
        arch.kind = ArchKind::conv;
    else
        throw ParseError("unknown arch kind '" + kind + "'");
    arch.input_shape = shape_from_json(j.at("input_shape"), arch.kind);
    if (arch.kind == ArchKind::conv) {
        for (const auto& bj : j.at("conv_blocks")) {
            ConvBlockSpec block;
            block.followed_by_pool = bj.at("followed_by_pool").get<bool>();
            for (const auto& lj : bj.at("layers"))
                block.layers.push_back(ConvLayerSpec{lj.at("filter_size").get<int>(),
                                                     lj.at("num_filters").get<int>(),
                                                     lj.value("input_padding", 0)});
            arch.conv_blocks.push_back(std::move(block));
        }
    }
    for (const auto& lj : j.at("dense_layers"))
        arch.dense_layers.push_back(
            DenseLayerSpec{lj.at("units").get<int>(),
                           activation_from_string(lj.at("activation").get<std::string>()),
                           lj.value("residual", false)});
    validate(arch);
    return arch;
}

json to_json(const EnsembleSpec& ensemble) {
    json members = json::array();
    for (const auto& m : ensemble.members) members.push_back(to_json(m));
    return json{{"members", members}, {"names", ensemble.names}};
}

EnsembleSpec ensemble_from_json(const json& j) {
    EnsembleSpec ensemble;
    for (const auto& mj : j.at("members")) ensemble.members.push_back(arch_from_json(mj));
    ensemble.names = j.at("names").get<std::vector<std::string>>();
    validate(ensemble);
    return ensemble;
}

json to_json(const MotherNetResult& result) {
    return json{{"arch", to_json(result.arch)}, {"per_member_edit", result.per_member_edit}};
}

MotherNetResult mothernet_result_from_json(const json& j) {
    MotherNetResult result;
    result.arch = arch_from_json(j.at("arch"));
    result.per_member_edit = j.at("per_member_edit").get<std::map<std::string, int>>();
    return result;
}

json to_json(const ClusterPlan& plan) {
    json clusters = json::array();
    for (const auto& c : plan.clusters)
        clusters.push_back({{"members", c.members}, {"mothernet", to_json(c.mothernet)}});
    return json{{"strategy", to_string(plan.strategy)},
                {"clusters", clusters},
                {"objective", plan.objective}};
}

ClusterPlan cluster_plan_from_json(const json& j) {
    ClusterPlan plan;
    plan.strategy = cluster_strategy_from_string(j.at("strategy").get<std::string>());
    plan.objective = j.at("objective").get<std::int64_t>();
    for (const auto& cj : j.at("clusters"))
        plan.clusters.push_back(Cluster{cj.at("members").get<std::vector<std::string>>(),
                                        mothernet_result_from_json(cj.at("mothernet"))});
    return plan;
}

json to_json(const TransformStep& step) {
    json j{{"kind", to_string(step.kind)}, {"block", step.block}, {"position", step.position}};
    if (step.kind == TransformKind::widen_layer) {
        j["new_units"] = step.new_units;
        j["replication_map"] = step.replication_map;
    }
    if (step.kind == TransformKind::enlarge_filter) j["new_size"] = step.new_size;
    return j;
}

TransformStep transform_step_from_json(const json& j) {
    TransformStep step;
    step.kind = transform_kind_from_string(j.at("kind").get<std::string>());
    step.block = j.at("block").get<int>();
    step.position = j.at("position").get<int>();
    step.new_units = j.value("new_units", 0);
    step.new_size = j.value("new_size", 0);
    if (j.contains("replication_map"))
        step.replication_map = j.at("replication_map").get<std::vector<int>>();
    return step;
}

json to_json(const HatchPlan& plan) {
    json steps = json::array();
    for (const auto& s : plan.steps) steps.push_back(to_json(s));
    return json{{"steps", steps}, {"source", to_json(plan.source)}, {"target", to_json(plan.target)}};
}

HatchPlan hatch_plan_from_json(const json& j) {
    HatchPlan plan;
    for (const auto& sj : j.at("steps")) plan.steps.push_back(transform_step_from_json(sj));
    plan.source = arch_from_json(j.at("source"));
    plan.target = arch_from_json(j.at("target"));
    return plan;
}

json to_json(const TrainConfig& cfg) {
    return json{{"batch_size", cfg.batch_size},
                {"learning_rate", cfg.learning_rate},
                {"max_epochs", cfg.max_epochs},
                {"patience", cfg.patience},
                {"shuffle_seed", cfg.shuffle_seed}};
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig cfg;
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
    cfg.patience = j.value("patience", cfg.patience);
    cfg.shuffle_seed = j.value("shuffle_seed", cfg.shuffle_seed);
    return cfg;
}

json to_json(const RunConfig& cfg) {
    return json{{"ensemble", to_json(cfg.ensemble)},
                {"strategy", to_string(cfg.strategy)},
                {"g", cfg.g},
                {"tau", cfg.tau},
                {"train", to_json(cfg.train)},
                {"mother_train", to_json(cfg.mother_train)},
                {"noise_sigma", cfg.noise_sigma},
                {"seed", cfg.seed},
                {"max_cluster_iters", cfg.max_cluster_iters},
                {"jobs", cfg.jobs},
                {"scale_init", cfg.scale_init},
                {"bag_finetune", cfg.bag_finetune}};
}

RunConfig run_config_from_json(const json& j) {
    RunConfig cfg;
    cfg.ensemble = ensemble_from_json(j.at("ensemble"));
    cfg.strategy = run_strategy_from_string(j.at("strategy").get<std::string>());
    cfg.g = j.value("g", cfg.g);
    cfg.tau = j.value("tau", cfg.tau);
    if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"));
    if (j.contains("mother_train")) cfg.mother_train = train_config_from_json(j.at("mother_train"));
    cfg.noise_sigma = j.value("noise_sigma", cfg.noise_sigma);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.max_cluster_iters = j.value("max_cluster_iters", cfg.max_cluster_iters);
    cfg.jobs = j.value("jobs", cfg.jobs);
    cfg.scale_init = j.value("scale_init", cfg.scale_init);
    cfg.bag_finetune = j.value("bag_finetune", cfg.bag_finetune);
    return cfg;
}

json to_json(const TrainLog& log) {
    return json{{"loss", log.loss}, {"accuracy", log.accuracy}, {"epochs", log.epochs}};
}

TrainLog train_log_from_json(const json& j) {
    TrainLog log;
    log.loss = j.at("loss").get<std::vector<double>>();
    log.accuracy = j.at("accuracy").get<std::vector<double>>();
    log.epochs = j.at("epochs").get<int>();
    return log;
}

json to_json(const RunReport& report) {
    json members = json::array();
    for (const auto& m : report.members)
        members.push_back({{"name", m.name}, {"log", to_json(m.log)}});
    json mother_logs = json::array();
    for (const auto& l : report.mother_logs) mother_logs.push_back(to_json(l));
    json j{{"members", members},
           {"mother_logs", mother_logs},
           {"total_epochs", report.total_epochs}};
    if (report.has_clusters) j["clusters"] = to_json(report.clusters);
    return j;
}

json to_json(const CovarianceReport& report) {
    return json{{"variance", report.variance},
                {"covariance", report.covariance},
                {"ensemble_variance", report.ensemble_variance},
                {"mean_correct_prob", report.mean_correct_prob}};
}

namespace {

void append_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_f64_le(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double read_f64_le(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

constexpr unsigned char mnwb_version = 1;

} // namespace

void write_weights(const std::string& path, const WeightedNetwork& net) {
    json meta;
    meta["arch"] = to_json(net.arch);
    meta["rng_seed"] = net.rng_seed;
    json tensors = json::array();
    for (const auto& t : net.weights) tensors.push_back({{"shape", t.shape}});
    meta["tensors"] = tensors;
    const std::string meta_str = meta.dump();

    std::string out = "MNWB";
    out.push_back(static_cast<char>(mnwb_version));
    append_u32_le(out, static_cast<std::uint32_t>(meta_str.size()));
    out += meta_str;
    for (const auto& t : net.weights)
        for (double v : t.data) append_f64_le(out, v);
    atomic_write(path, out);
}

WeightedNetwork read_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open weights file " + path);
    std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (raw.size() < 9 || raw.compare(0, 4, "MNWB") != 0)
        throw ParseError("not an MNWB file: " + path);
    if (static_cast<unsigned char>(raw[4]) != mnwb_version)
        throw ParseError("unsupported MNWB version in " + path);
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i)
        len |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[5 + i])) << (8 * i);
    if (raw.size() < 9 + static_cast<std::size_t>(len))
        throw ParseError("truncated MNWB metadata in " + path);
    json meta;
    try {
        meta = json::parse(raw.substr(9, len));
    } catch (const json::exception& e) {
        throw ParseError("bad MNWB metadata: " + std::string(e.what()));
    }

    WeightedNetwork net;
    net.arch = arch_from_json(meta.at("arch"));
    net.rng_seed = meta.value("rng_seed", std::uint64_t{0});
    std::size_t offset = 9 + len;
    for (const auto& tj : meta.at("tensors")) {
        Tensor t(tj.at("shape").get<std::vector<int>>());
        if (raw.size() < offset + t.size() * 8)
            throw ParseError("truncated MNWB tensor data in " + path);
        for (std::size_t i = 0; i < t.size(); ++i) {
            t.data[i] = read_f64_le(
                reinterpret_cast<const unsigned char*>(raw.data()) + offset);
            offset += 8;
        }
        net.weights.push_back(std::move(t));
    }
    if (offset != raw.size()) throw ParseError("trailing bytes in MNWB file " + path);
    return net;
}

Dataset load_csv_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty CSV file " + path);

    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    int label_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == "label") label_col = static_cast<int>(i);
    if (label_col < 0) throw ParseError("CSV has no 'label' column: " + path);
    const int width = static_cast<int>(header.size()) - 1;
    if (width < 1) throw ParseError("CSV has no feature columns: " + path);

    std::vector<double> values;
    std::vector<int> labels;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        int col = 0;
        while (std::getline(ss, cell, ',')) {
            try {
                if (col == label_col)
                    labels.push_back(std::stoi(cell));
                else
                    values.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ParseError("bad CSV value '" + cell + "' in " + path);
            }
            ++col;
        }
        if (col != static_cast<int>(header.size()))
            throw ParseError("ragged CSV row in " + path);
    }
    if (labels.empty()) throw ParseError("CSV has no data rows: " + path);

    Dataset data;
    data.labels = labels;
    data.num_classes = 1 + *std::max_element(labels.begin(), labels.end());
    const int n = static_cast<int>(labels.size());

    const std::string sidecar = path + ".shape.json";
    if (std::filesystem::exists(sidecar)) {
        const json shape = read_json(sidecar);
        const int h = shape.at("height").get<int>();
        const int w = shape.at("width").get<int>();
        const int c = shape.at("channels").get<int>();
        if (h * w * c != width)
            throw ParseError("sidecar shape does not match CSV feature count");
        data.features = Tensor({n, c, h, w});
    } else {
        data.features = Tensor({n, width});
    }
    data.features.data = std::move(values);
    validate_dataset(data);
    return data;
}

void atomic_write(const std::string& path, const std::string& contents) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.parent_path() /
                         (target.filename().string() + ".tmp." +
                          std::to_string(static_cast<unsigned>(::getpid())));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw IoError("cannot rename into place: " + target.string() + ": " + ec.message());
    }
}

void write_json(const std::string& path, const json& j) { atomic_write(path, j.dump(2) + "\n"); }

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError("bad JSON in " + path + ": " + e.what());
    }
}

} // namespace mothernets
