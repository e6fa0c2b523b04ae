#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mothernets/io.hpp"
#include "mothernets/rng.hpp"
#include "mothernets/transforms.hpp"

namespace fs = std::filesystem;
using namespace mothernets;

namespace {

bool env_seed(std::uint64_t& out) {
    if (const char* env = std::getenv("MOTHERNETS_SEED")) {
        out = std::strtoull(env, nullptr, 10);
        return true;
    }
    return false;
}

std::uint64_t default_seed() {
    std::uint64_t s = 0;
    env_seed(s);
    return s;
}

void emit(const std::optional<std::string>& out, const json& j) {
    if (out)
        write_json(*out, j);
    else
        std::cout << j.dump(2) << "\n";
}

std::vector<std::string> sorted_weight_files(const std::string& dir) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".mnwb") files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("no .mnwb files in " + dir);
    return files;
}

struct SharedOutcome {
    json report;
    WeightedNetwork mother;
    std::vector<std::pair<std::string, WeightedNetwork>> heads;
};

SharedOutcome do_share(RunConfig cfg, const Dataset& data) {
    validate(cfg.ensemble);
    const MotherNetResult mr = build_mothernet(cfg.ensemble);
    WeightedNetwork mother = init_network(mr.arch, derive_seed(cfg.seed, "shared-mother", 0),
                                          cfg.scale_init);
    TrainConfig mt = cfg.mother_train;
    mt.shuffle_seed = derive_seed(cfg.seed, "shared-mother", 1);
    auto [trained, mother_log] = train(mother, data, mt);

    std::vector<HatchPlan> plans;
    std::vector<WeightedNetwork> members;
    std::vector<std::int64_t> sizes;
    for (std::size_t i = 0; i < cfg.ensemble.members.size(); ++i) {
        plans.push_back(plan_hatch(trained.arch, cfg.ensemble.members[i],
                                   derive_seed(cfg.seed, cfg.ensemble.names[i], 2)));
        members.push_back(hatch(trained, plans.back()));
        sizes.push_back(param_count(cfg.ensemble.members[i]));
    }
    SharedPlan shared = build_shared(trained, cfg.ensemble.names, plans, members);

    TrainConfig ft = cfg.train;
    ft.shuffle_seed = derive_seed(cfg.seed, "shared-finetune", 3);
    shared = shared_finetune(shared, data, ft);

    const std::int64_t mother_size = param_count(trained.arch);
    std::int64_t size_sum = 0;
    for (std::int64_t s : sizes) size_sum += s;
    const double k = static_cast<double>(sizes.size());

    // averaged-head accuracy from the consolidated store
    const PredictionMatrix pm = shared_infer(shared, data);
    double correct = 0;
    for (int i = 0; i < pm.probs.dim(1); ++i) {
        int arg = 0;
        double best = -1.0;
        for (int j = 0; j < pm.probs.dim(2); ++j) {
            double mean = 0;
            for (int mdl = 0; mdl < pm.probs.dim(0); ++mdl) mean += pm.probs(mdl, i, j);
            if (mean > best) {
                best = mean;
                arg = j;
            }
        }
        if (arg == data.labels[static_cast<std::size_t>(i)]) ++correct;
    }

    SharedOutcome outcome;
    outcome.report = json{
        {"mother_param_count", mother_size},
        {"member_param_counts", sizes},
        {"shared_param_total", shared.shared_param_total},
        // both reduction readings: the chi formula and the counting identity
        {"chi", chi(mother_size, sizes)},
        {"counting_reduction",
         (k - 1.0) * static_cast<double>(mother_size) / static_cast<double>(size_sum)},
        {"mother_epochs", mother_log.epochs},
        {"averaged_head_train_accuracy", correct / pm.probs.dim(1)}};
    outcome.mother = shared.mother;
    for (std::size_t i = 0; i < shared.members.size(); ++i)
        outcome.heads.emplace_back(shared.members[i].name, shared_member_network(shared, i));
    return outcome;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"MotherNets ensemble training toolkit"};
    app.require_subcommand(1);

    std::string ensemble_path, config_path, data_path, strategy = "kmeans", method = "average";
    std::optional<std::string> out;
    std::string out_dir;
    int g = 1, jobs = 1, trials = 5;
    double tau = 0.5, rate = 0.9;
    std::uint64_t seed = default_seed();
    bool seed_given = false;

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "random seed (default: $MOTHERNETS_SEED or 0)")
            ->each([&](const std::string&) { seed_given = true; });
    };

    auto* build_mother = app.add_subcommand("build-mother", "construct the ensemble's MotherNet");
    build_mother->add_option("--ensemble", ensemble_path)->required();
    build_mother->add_option("--out", out);

    auto* cluster = app.add_subcommand("cluster", "partition an ensemble into clusters");
    cluster->add_option("--ensemble", ensemble_path)->required();
    cluster->add_option("--strategy", strategy)->check(CLI::IsMember({"kmeans", "greedy"}));
    cluster->add_option("--g", g);
    cluster->add_option("--tau", tau);
    add_seed(cluster);
    cluster->add_option("--out", out);

    auto* hatch_plan = app.add_subcommand("hatch-plan", "plan hatching every ensemble member");
    hatch_plan->add_option("--ensemble", ensemble_path)->required();
    add_seed(hatch_plan);
    hatch_plan->add_option("--out", out);

    auto* run_cmd = app.add_subcommand("run", "train an ensemble per the configured strategy");
    run_cmd->add_option("--config", config_path)->required();
    run_cmd->add_option("--data", data_path)->required();
    run_cmd->add_option("--out-dir", out_dir)->required();
    run_cmd->add_option("--jobs", jobs);
    add_seed(run_cmd);

    auto* eval = app.add_subcommand("eval", "evaluate stored networks on a dataset");
    eval->add_option("--out-dir", out_dir, "directory of .mnwb weight files")->required();
    eval->add_option("--data", data_path)->required();
    eval->add_option("--method", method)->check(CLI::IsMember({"average", "vote", "oracle"}));
    eval->add_option("--out", out);

    auto* share = app.add_subcommand("share", "train and consolidate a shared MotherNet");
    share->add_option("--config", config_path)->required();
    share->add_option("--data", data_path)->required();
    share->add_option("--out-dir", out_dir)->required();
    add_seed(share);

    auto* diag = app.add_subcommand("diag", "variance/covariance diagnostics over trials");
    diag->add_option("--config", config_path)->required();
    diag->add_option("--data", data_path)->required();
    diag->add_option("--trials", trials);
    add_seed(diag);
    diag->add_option("--out", out);

    auto* cost = app.add_subcommand("cost", "price a finished run");
    cost->add_option("--out-dir", out_dir, "run output directory (reads timing.json)")->required();
    cost->add_option("--rate", rate, "USD per hour");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2; // bad arguments are validation errors
    }

    // config-driven verbs: --seed beats $MOTHERNETS_SEED beats the config value
    auto resolve_seed = [&](RunConfig& cfg) {
        std::uint64_t env = 0;
        if (seed_given)
            cfg.seed = seed;
        else if (env_seed(env))
            cfg.seed = env;
    };

    if (build_mother->parsed()) {
        const EnsembleSpec ensemble = ensemble_from_json(read_json(ensemble_path));
        emit(out, to_json(build_mothernet(ensemble)));
        return 0;
    }

    if (cluster->parsed()) {
        const EnsembleSpec ensemble = ensemble_from_json(read_json(ensemble_path));
        const ClusterPlan plan = strategy == "kmeans" ? cluster_kmeans(ensemble, g, 50, seed)
                                                      : cluster_greedy_tau(ensemble, tau);
        emit(out, to_json(plan));
        return 0;
    }

    if (hatch_plan->parsed()) {
        const EnsembleSpec ensemble = ensemble_from_json(read_json(ensemble_path));
        const MotherNetResult mr = build_mothernet(ensemble);
        json plans = json::object();
        for (std::size_t i = 0; i < ensemble.members.size(); ++i)
            plans[ensemble.names[i]] = to_json(plan_hatch(
                mr.arch, ensemble.members[i], derive_seed(seed, ensemble.names[i], 2)));
        emit(out, json{{"mothernet", to_json(mr)}, {"plans", plans}});
        return 0;
    }

    if (run_cmd->parsed()) {
        RunConfig cfg = run_config_from_json(read_json(config_path));
        resolve_seed(cfg);
        cfg.jobs = jobs;
        const Dataset data = load_csv_dataset(data_path);
        const RunReport report = run(cfg, data);
        fs::create_directories(out_dir);
        write_json((fs::path(out_dir) / "report.json").string(), to_json(report));
        write_json((fs::path(out_dir) / "timing.json").string(),
                   json{{"wall_seconds", report.wall_seconds}});
        for (const auto& m : report.members)
            write_weights((fs::path(out_dir) / (m.name + ".mnwb")).string(), m.net);
        return 0;
    }

    if (eval->parsed()) {
        const Dataset data = load_csv_dataset(data_path);
        std::vector<WeightedNetwork> nets;
        for (const auto& file : sorted_weight_files(out_dir)) nets.push_back(read_weights(file));
        json result;
        if (method == "oracle") {
            result = json{{"method", method}, {"accuracy", oracle_accuracy(nets, data)}};
        } else {
            const Prediction p =
                method == "average" ? predict_average(nets, data) : predict_vote(nets, data);
            result = json{{"method", method}, {"accuracy", p.accuracy}, {"labels", p.labels}};
        }
        std::vector<double> individual;
        for (const auto& net : nets) individual.push_back(evaluate(net, data));
        result["individual_accuracy"] = individual;
        emit(out, result);
        return 0;
    }

    if (share->parsed()) {
        RunConfig cfg = run_config_from_json(read_json(config_path));
        resolve_seed(cfg);
        const Dataset data = load_csv_dataset(data_path);
        SharedOutcome outcome = do_share(cfg, data);
        fs::create_directories(out_dir);
        write_json((fs::path(out_dir) / "shared.json").string(), outcome.report);
        write_weights((fs::path(out_dir) / "mother.mnwb").string(), outcome.mother);
        for (const auto& [name, net] : outcome.heads)
            write_weights((fs::path(out_dir) / (name + ".mnwb")).string(), net);
        return 0;
    }

    if (diag->parsed()) {
        RunConfig cfg = run_config_from_json(read_json(config_path));
        resolve_seed(cfg);
        const Dataset data = load_csv_dataset(data_path);
        const SoftmaxSamples samples = collect_samples(cfg, data, data, trials);
        const CovarianceReport report = covariance_report(samples);
        json j = to_json(report);
        j["trials"] = trials;
        if (report.mean_correct_prob > 0.5)
            j["chebyshev_bound"] =
                chebyshev_bound(report.mean_correct_prob, report.ensemble_variance);
        else
            j["chebyshev_bound"] = nullptr;
        emit(out, j);
        return 0;
    }

    if (cost->parsed()) {
        const json timing = read_json((fs::path(out_dir) / "timing.json").string());
        RunReport report;
        report.wall_seconds = timing.at("wall_seconds").get<double>();
        std::cout << cost_report(report, rate) << "\n";
        return 0;
    }

    return 2;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const IoError& e) {
        std::cerr << "error[runtime]: " << e.what() << "\n";
        return 1;
    } catch (const NonFiniteValue& e) {
        std::cerr << "error[runtime]: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error[validation]: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error[runtime]: " << e.what() << "\n";
        return 1;
    }
}
