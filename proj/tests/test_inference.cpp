#include <doctest.h>

#include <cmath>

#include "mothernets/inference.hpp"
#include "testkit/testkit.hpp"

using namespace mothernets;

namespace {

NetworkArch dense(std::vector<int> hidden, int features = 2, int classes = 2) {
    NetworkArch a;
    a.kind = ArchKind::dense;
    a.input_shape.features = features;
    for (int u : hidden) a.dense_layers.push_back({u, Activation::relu, false});
    a.dense_layers.push_back({classes, Activation::softmax_output, false});
    return a;
}

// Zero-weight single-layer net whose output-bias logits pin the softmax.
WeightedNetwork biased_net(const std::vector<double>& logits, int features = 2) {
    NetworkArch a = dense({}, features, static_cast<int>(logits.size()));
    WeightedNetwork net = init_network(a, 0);
    for (double& v : net.weights[0].data) v = 0.0;
    net.weights[1].data = logits;
    return net;
}

Dataset tiny_data(int n, std::vector<int> labels, int classes) {
    Dataset d;
    d.num_classes = classes;
    d.features = Tensor({n, 2});
    d.labels = std::move(labels);
    return d;
}

} // namespace

TEST_CASE("predict_average averages member probabilities") {
    // member 1 strongly prefers class 0, members 2+3 mildly prefer class 1;
    // the averaged probability still favors class 0.
    const std::vector<WeightedNetwork> nets = {biased_net({4.0, 0.0}), biased_net({0.0, 0.5}),
                                               biased_net({0.0, 0.5})};
    const Dataset d = tiny_data(2, {0, 0}, 2);
    const Prediction p = predict_average(nets, d);
    CHECK(p.labels == std::vector<int>{0, 0});
    CHECK(p.accuracy == doctest::Approx(1.0));
}

TEST_CASE("predict_vote uses member argmaxes") {
    // two of three members prefer class 1 -> vote goes to 1 despite member 1's margin
    const std::vector<WeightedNetwork> nets = {biased_net({4.0, 0.0}), biased_net({0.0, 0.5}),
                                               biased_net({0.0, 0.5})};
    const Dataset d = tiny_data(2, {1, 0}, 2);
    const Prediction p = predict_vote(nets, d);
    CHECK(p.labels == std::vector<int>{1, 1});
    CHECK(p.accuracy == doctest::Approx(0.5));
}

TEST_CASE("vote ties break toward the lower class") {
    const std::vector<WeightedNetwork> nets = {biased_net({1.0, 0.0, 0.0}),
                                               biased_net({0.0, 0.0, 1.0})};
    const Dataset d = tiny_data(1, {0}, 3);
    CHECK(predict_vote(nets, d).labels == std::vector<int>{0});
}

TEST_CASE("oracle accuracy counts any-correct examples") {
    const std::vector<WeightedNetwork> nets = {biased_net({1.0, 0.0}), biased_net({0.0, 1.0})};
    const Dataset d = tiny_data(4, {0, 1, 0, 1}, 2);
    CHECK(oracle_accuracy(nets, d) == doctest::Approx(1.0));
    CHECK(oracle_accuracy({nets[0]}, d) == doctest::Approx(0.5));
}

TEST_CASE("chi fixtures") {
    CHECK(chi(8, {20, 20, 20, 20, 20}) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(chi(10, {10, 10}) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(chi(10, {20}) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(chi(30, {20, 40}), InvalidArch);
}

namespace {

struct SharedFixture {
    WeightedNetwork mother;
    std::vector<std::string> names;
    std::vector<HatchPlan> plans;
    std::vector<WeightedNetwork> members;
    SharedPlan shared;
};

SharedFixture make_shared_fixture(int k, std::uint64_t seed) {
    const NetworkArch mother_arch = dense({2, 2}, 2, 2);
    SharedFixture f;
    f.mother = init_network(mother_arch, seed);
    for (int i = 0; i < k; ++i) {
        NetworkArch target = mother_arch;
        target.dense_layers[0].units = 3 + i % 2;
        target.dense_layers[1].units = 4;
        f.names.push_back("h" + std::to_string(i));
        f.plans.push_back(plan_hatch(mother_arch, target, seed + 10 + i));
        f.members.push_back(hatch(f.mother, f.plans.back()));
    }
    f.shared = build_shared(f.mother, f.names, f.plans, f.members);
    return f;
}

} // namespace

TEST_CASE("shared member networks equal their hatched originals") {
    const SharedFixture f = make_shared_fixture(3, 5);
    for (std::size_t i = 0; i < f.members.size(); ++i)
        CHECK(testkit::oracle_forward_equality(f.members[i],
                                               shared_member_network(f.shared, i), 50, 100 + i) <=
              1e-12);
}

TEST_CASE("shared parameter total satisfies the counting identity") {
    const SharedFixture f = make_shared_fixture(4, 6);
    std::int64_t sum = 0;
    for (const auto& m : f.members) sum += param_count(m.arch);
    const std::int64_t k = static_cast<std::int64_t>(f.members.size());
    CHECK(f.shared.shared_param_total == sum - (k - 1) * param_count(f.mother.arch));
}

TEST_CASE("shared_infer matches per-member forward passes") {
    const SharedFixture f = make_shared_fixture(3, 7);
    testkit::SyntheticSpec spec;
    spec.n = 20;
    spec.seed = 3;
    const Dataset data = testkit::gen(spec);
    const PredictionMatrix pm = shared_infer(f.shared, data);
    for (std::size_t m = 0; m < f.members.size(); ++m) {
        const Tensor probs = forward(f.members[m], data.features);
        for (int i = 0; i < probs.dim(0); ++i)
            for (int j = 0; j < probs.dim(1); ++j)
                CHECK(pm.probs(static_cast<int>(m), i, j) ==
                      doctest::Approx(probs(i, j)).epsilon(1e-12));
    }
}

TEST_CASE("build_shared rejects unsupported topologies") {
    // residual plans are out of scope for sharing
    const NetworkArch mother_arch = dense({2}, 2, 2);
    const WeightedNetwork mother = init_network(mother_arch, 1);
    NetworkArch target = mother_arch;
    target.dense_layers.insert(target.dense_layers.begin() + 1,
                               DenseLayerSpec{2, Activation::relu, true});
    const HatchPlan plan = plan_hatch(mother_arch, target, 4);
    const WeightedNetwork member = hatch(mother, plan);
    CHECK_THROWS_AS(build_shared(mother, {"h0"}, {plan}, {member}), UnsupportedTopology);
}

TEST_CASE("shared_finetune with zero learning rate is a no-op") {
    const SharedFixture f = make_shared_fixture(2, 8);
    testkit::SyntheticSpec spec;
    spec.n = 30;
    spec.seed = 9;
    const Dataset data = testkit::gen(spec);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.max_epochs = 2;
    cfg.patience = 100;
    const SharedPlan after = shared_finetune(f.shared, data, cfg);
    for (std::size_t t = 0; t < f.shared.mother.weights.size(); ++t)
        CHECK(after.mother.weights[t].data == f.shared.mother.weights[t].data);
}

TEST_CASE("shared_finetune improves averaged-head training accuracy") {
    const SharedFixture f = make_shared_fixture(3, 11);
    testkit::SyntheticSpec spec;
    spec.n = 120;
    spec.noise = 0.2;
    spec.seed = 14;
    const Dataset data = testkit::gen(spec);

    auto averaged_accuracy = [&](const SharedPlan& plan) {
        const PredictionMatrix pm = shared_infer(plan, data);
        int correct = 0;
        for (int i = 0; i < pm.probs.dim(1); ++i) {
            int arg = 0;
            double best = -1;
            for (int j = 0; j < pm.probs.dim(2); ++j) {
                double mean = 0;
                for (int m = 0; m < pm.probs.dim(0); ++m) mean += pm.probs(m, i, j);
                if (mean > best) {
                    best = mean;
                    arg = j;
                }
            }
            correct += arg == data.labels[static_cast<std::size_t>(i)] ? 1 : 0;
        }
        return static_cast<double>(correct) / pm.probs.dim(1);
    };

    TrainConfig cfg;
    cfg.batch_size = 16;
    cfg.learning_rate = 0.2;
    cfg.max_epochs = 80;
    cfg.patience = 10;
    cfg.shuffle_seed = 2;
    const SharedPlan after = shared_finetune(f.shared, data, cfg);
    CHECK(averaged_accuracy(after) >= 0.9);
    CHECK(averaged_accuracy(after) >= averaged_accuracy(f.shared));
}
