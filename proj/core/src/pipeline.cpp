#include "mothernets/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <future>
#include <map>

#include "mothernets/rng.hpp"
#include "mothernets/transforms.hpp"

namespace mothernets {

std::string to_string(RunStrategy s) {
    switch (s) {
    case RunStrategy::mothernets_g: return "mothernets_g";
    case RunStrategy::mothernets_tau: return "mothernets_tau";
    case RunStrategy::full_data: return "full_data";
    case RunStrategy::bagging: return "bagging";
    }
    throw ParseError("unknown run strategy");
}

RunStrategy run_strategy_from_string(const std::string& s) {
    if (s == "mothernets_g") return RunStrategy::mothernets_g;
    if (s == "mothernets_tau") return RunStrategy::mothernets_tau;
    if (s == "full_data") return RunStrategy::full_data;
    if (s == "bagging") return RunStrategy::bagging;
    throw ParseError("unknown run strategy '" + s + "'");
}

namespace {

double auto_sigma(const WeightedNetwork& net) {
    double sum = 0, sq = 0;
    std::int64_t n = 0;
    for (const auto& t : net.weights)
        for (double v : t.data) {
            sum += v;
            sq += v * v;
            ++n;
        }
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(sq / static_cast<double>(n) - mean * mean, 0.0);
    return 0.01 * std::sqrt(var);
}

TrainConfig seeded(TrainConfig cfg, std::uint64_t seed) {
    cfg.shuffle_seed = seed;
    return cfg;
}

// Run independent member tasks, optionally across a small worker pool;
// outputs are merged in member order so parallelism never changes results.
template <typename Task>
std::vector<MemberResult> run_members(std::size_t count, int jobs, Task task) {
    std::vector<MemberResult> results(count);
    if (jobs <= 1) {
        for (std::size_t i = 0; i < count; ++i) results[i] = task(i);
        return results;
    }
    std::vector<std::future<void>> workers;
    std::atomic<std::size_t> next{0};
    const int pool = std::min<int>(jobs, static_cast<int>(count));
    for (int w = 0; w < pool; ++w)
        workers.push_back(std::async(std::launch::async, [&] {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1))
                results[i] = task(i);
        }));
    for (auto& f : workers) f.get();
    return results;
}

} // namespace

RunReport run(const RunConfig& cfg, const Dataset& data) {
    validate(cfg.ensemble);
    validate_dataset(data);
    if (cfg.ensemble.members.front().kind != ArchKind::dense)
        throw StrategyUnsupported("training strategies require dense ensembles");
    const auto start = std::chrono::steady_clock::now();

    RunReport report;
    const std::size_t k = cfg.ensemble.members.size();

    if (cfg.strategy == RunStrategy::full_data || cfg.strategy == RunStrategy::bagging) {
        report.members = run_members(k, cfg.jobs, [&](std::size_t i) {
            const std::string& name = cfg.ensemble.names[i];
            WeightedNetwork net = init_network(cfg.ensemble.members[i],
                                               derive_seed(cfg.seed, name, 0), cfg.scale_init);
            const Dataset* source = &data;
            Dataset bagged;
            if (cfg.strategy == RunStrategy::bagging) {
                bagged = bag_sample(data, derive_seed(cfg.seed, name, 1));
                source = &bagged;
            }
            auto [trained, log] = train(net, *source, seeded(cfg.train, derive_seed(cfg.seed, name, 2)));
            return MemberResult{name, std::move(log), std::move(trained)};
        });
    } else {
        const ClusterPlan plan =
            cfg.strategy == RunStrategy::mothernets_g
                ? cluster_kmeans(cfg.ensemble, cfg.g, cfg.max_cluster_iters, cfg.seed)
                : cluster_greedy_tau(cfg.ensemble, cfg.tau);
        report.clusters = plan;
        report.has_clusters = true;

        std::map<std::string, NetworkArch> arch_of;
        for (std::size_t i = 0; i < k; ++i) arch_of[cfg.ensemble.names[i]] = cfg.ensemble.members[i];

        struct MemberTask {
            std::string name;
            NetworkArch target;
            const WeightedNetwork* mother;
        };
        std::vector<MemberTask> tasks;

        std::vector<WeightedNetwork> mothers;
        mothers.reserve(plan.clusters.size());
        for (std::size_t c = 0; c < plan.clusters.size(); ++c) {
            const Cluster& cluster = plan.clusters[c];
            WeightedNetwork mother =
                init_network(cluster.mothernet.arch,
                             derive_seed(cfg.seed, "mother:" + std::to_string(c), 0),
                             cfg.scale_init);
            auto [trained, log] =
                train(mother, data,
                      seeded(cfg.mother_train,
                             derive_seed(cfg.seed, "mother:" + std::to_string(c), 1)));
            report.mother_logs.push_back(std::move(log));
            mothers.push_back(std::move(trained));
        }
        for (std::size_t c = 0; c < plan.clusters.size(); ++c)
            for (const std::string& name : plan.clusters[c].members)
                tasks.push_back(MemberTask{name, arch_of.at(name), &mothers[c]});
        // stable member order regardless of clustering
        std::sort(tasks.begin(), tasks.end(),
                  [](const MemberTask& a, const MemberTask& b) { return a.name < b.name; });

        report.members = run_members(tasks.size(), cfg.jobs, [&](std::size_t i) {
            const MemberTask& t = tasks[i];
            const HatchPlan hp =
                plan_hatch(t.mother->arch, t.target, derive_seed(cfg.seed, t.name, 3));
            WeightedNetwork net = hatch(*t.mother, hp);
            double sigma = cfg.noise_sigma;
            if (sigma < 0.0) sigma = auto_sigma(net);
            net = perturb(net, sigma, derive_seed(cfg.seed, t.name, 4),
                          PerturbScope::new_params_only);
            // a member identical to its MotherNet with no noise is already
            // fully trained; fine-tuning it would only repeat the mother run
            if (hp.steps.empty() && sigma == 0.0)
                return MemberResult{t.name, TrainLog{}, std::move(net)};
            const Dataset* source = &data;
            Dataset bagged;
            if (cfg.bag_finetune) {
                bagged = bag_sample(data, derive_seed(cfg.seed, t.name, 5));
                source = &bagged;
            }
            auto [tuned, log] =
                train(net, *source, seeded(cfg.train, derive_seed(cfg.seed, t.name, 6)));
            return MemberResult{t.name, std::move(log), std::move(tuned)};
        });
    }

    for (const auto& m : report.members) report.total_epochs += m.log.epochs;
    for (const auto& l : report.mother_logs) report.total_epochs += l.epochs;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

Dataset bag_sample(const Dataset& data, std::uint64_t seed) {
    validate_dataset(data);
    const int n = data.features.dim(0);
    Dataset out;
    out.num_classes = data.num_classes;
    out.features = Tensor(data.features.shape);
    const std::size_t row = data.features.size() / static_cast<std::size_t>(n);
    Rng rng(seed);
    std::uniform_int_distribution<int> pick(0, n - 1);
    for (int i = 0; i < n; ++i) {
        const int src = pick(rng);
        std::copy_n(data.features.data.begin() + static_cast<std::ptrdiff_t>(src * row), row,
                    out.features.data.begin() + static_cast<std::ptrdiff_t>(i * row));
        out.labels.push_back(data.labels[static_cast<std::size_t>(src)]);
    }
    return out;
}

double cost_report(const RunReport& report, double rate_usd_per_hour) {
    if (rate_usd_per_hour <= 0.0) throw InvalidArch("rate must be positive");
    return report.wall_seconds / 3600.0 * rate_usd_per_hour;
}

} // namespace mothernets
