#include <doctest.h>

#include <cmath>

#include "mothernets/diagnostics.hpp"
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

// Hand-rolled sample stacks bypass training: y[model][trial][example].
SoftmaxSamples fixed_samples(std::vector<std::vector<std::vector<double>>> y) {
    SoftmaxSamples s;
    s.y = std::move(y);
    return s;
}

} // namespace

TEST_CASE("variance and covariance use the R-1 divisor") {
    // one example, two trials: var of {0.4, 0.8} = 0.08
    const SoftmaxSamples s = fixed_samples({{{0.4}, {0.8}}});
    const CovarianceReport r = covariance_report(s);
    REQUIRE(r.variance.size() == 1);
    CHECK(r.variance[0] == doctest::Approx(0.08).epsilon(1e-12));
    CHECK(r.covariance[0][0] == doctest::Approx(0.08).epsilon(1e-12));
    CHECK(r.ensemble_variance == doctest::Approx(0.08).epsilon(1e-12));
    CHECK(r.mean_correct_prob == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("perfectly anticorrelated members cancel in the ensemble") {
    // model 0: {0.4, 0.8}; model 1: {0.8, 0.4}; mean is constant 0.6
    const SoftmaxSamples s = fixed_samples({{{0.4}, {0.8}}, {{0.8}, {0.4}}});
    const CovarianceReport r = covariance_report(s);
    CHECK(r.covariance[0][1] == doctest::Approx(-0.08).epsilon(1e-12));
    CHECK(r.ensemble_variance == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("constant samples have zero variance") {
    const SoftmaxSamples s = fixed_samples({{{0.7, 0.7}, {0.7, 0.7}, {0.7, 0.7}}});
    const CovarianceReport r = covariance_report(s);
    CHECK(r.variance[0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(r.ensemble_variance == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("decomposition identity holds on random stacks") {
    Rng rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        const int models = std::uniform_int_distribution<int>(2, 5)(rng);
        const int trials = std::uniform_int_distribution<int>(2, 6)(rng);
        const int examples = std::uniform_int_distribution<int>(1, 8)(rng);
        std::vector<std::vector<std::vector<double>>> y(
            models, std::vector<std::vector<double>>(trials, std::vector<double>(examples)));
        for (auto& mt : y)
            for (auto& t : mt)
                for (double& v : t) v = u(rng);
        const CovarianceReport r = covariance_report(fixed_samples(y));
        double rhs = 0;
        for (int i = 0; i < models; ++i)
            for (int j = 0; j < models; ++j) rhs += r.covariance[i][j];
        rhs /= static_cast<double>(models) * models;
        CHECK(std::abs(r.ensemble_variance - rhs) <= 1e-12);
    }
}

TEST_CASE("chebyshev bound fixtures and monotonicity") {
    CHECK(chebyshev_bound(0.8, 0.01) == doctest::Approx(0.01 / 0.09).epsilon(1e-12));
    CHECK(chebyshev_bound(1.0, 0.25) == doctest::Approx(1.0).epsilon(1e-12));
    // tighter confidence with lower variance and a larger margin
    CHECK(chebyshev_bound(0.8, 0.005) < chebyshev_bound(0.8, 0.01));
    CHECK(chebyshev_bound(0.9, 0.01) < chebyshev_bound(0.8, 0.01));
    CHECK_THROWS_AS(chebyshev_bound(0.5, 0.01), AssumptionViolated);
    CHECK_THROWS_AS(chebyshev_bound(0.2, 0.01), AssumptionViolated);
}

TEST_CASE("collect_samples shapes and determinism") {
    RunConfig cfg;
    cfg.ensemble.members = {dense({4}), dense({6})};
    cfg.ensemble.names = {"a", "b"};
    cfg.strategy = RunStrategy::full_data;
    cfg.train.max_epochs = 4;
    cfg.train.patience = 4;
    cfg.train.learning_rate = 0.2;
    cfg.seed = 2;

    testkit::SyntheticSpec spec;
    spec.n = 30;
    spec.seed = 6;
    const Dataset data = testkit::gen(spec);

    CHECK_THROWS_AS(collect_samples(cfg, data, data, 1), InsufficientTrials);

    const SoftmaxSamples s1 = collect_samples(cfg, data, data, 3);
    REQUIRE(s1.y.size() == 2);
    REQUIRE(s1.y[0].size() == 3);
    REQUIRE(s1.y[0][0].size() == 30);
    for (const auto& model : s1.y)
        for (const auto& trial : model)
            for (double v : trial) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }

    const SoftmaxSamples s2 = collect_samples(cfg, data, data, 3);
    CHECK(s1.y == s2.y);
    // trials must actually differ from one another
    CHECK(s1.y[0][0] != s1.y[0][1]);
}
