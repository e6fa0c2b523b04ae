#include <doctest.h>

#include <set>

#include "mothernets/clustering.hpp"
#include "mothernets/io.hpp"
#include "testkit/testkit.hpp"

using namespace mothernets;

namespace {

NetworkArch dense(std::vector<int> hidden, int features = 3, int classes = 2) {
    NetworkArch a;
    a.kind = ArchKind::dense;
    a.input_shape.features = features;
    for (int u : hidden) a.dense_layers.push_back({u, Activation::relu, false});
    a.dense_layers.push_back({classes, Activation::softmax_output, false});
    return a;
}

EnsembleSpec ensemble(std::vector<NetworkArch> members) {
    EnsembleSpec e;
    e.members = std::move(members);
    for (std::size_t i = 0; i < e.members.size(); ++i) e.names.push_back("m" + std::to_string(i));
    return e;
}

std::set<std::set<std::string>> as_sets(const ClusterPlan& plan) {
    std::set<std::set<std::string>> out;
    for (const auto& c : plan.clusters) out.insert({c.members.begin(), c.members.end()});
    return out;
}

} // namespace

TEST_CASE("kmeans groups near sizes together") {
    const EnsembleSpec e = ensemble({dense({4}), dense({5}), dense({40}), dense({50})});
    const ClusterPlan plan = cluster_kmeans(e, 2, 50, 0);
    CHECK(as_sets(plan) == std::set<std::set<std::string>>{{"m0", "m1"}, {"m2", "m3"}});
}

TEST_CASE("kmeans degenerate g values") {
    const EnsembleSpec e = ensemble({dense({4}), dense({9}), dense({20})});
    CHECK(cluster_kmeans(e, 1, 50, 0).clusters.size() == 1);
    const ClusterPlan singletons = cluster_kmeans(e, 3, 50, 0);
    CHECK(singletons.clusters.size() == 3);
    CHECK(singletons.objective == 0);
    CHECK_THROWS_AS(cluster_kmeans(e, 0, 50, 0), InvalidG);
    CHECK_THROWS_AS(cluster_kmeans(e, 4, 50, 0), InvalidG);
}

TEST_CASE("kmeans clusters are balanced") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<NetworkArch> members;
        const int n = std::uniform_int_distribution<int>(4, 11)(rng);
        for (int i = 0; i < n; ++i)
            members.push_back(dense({std::uniform_int_distribution<int>(2, 60)(rng)}));
        const EnsembleSpec e = ensemble(std::move(members));
        const int g = std::uniform_int_distribution<int>(1, 3)(rng);
        const ClusterPlan plan = cluster_kmeans(e, g, 50, trial);
        REQUIRE(static_cast<int>(plan.clusters.size()) == g);
        std::size_t total = 0;
        for (const auto& c : plan.clusters) {
            total += c.members.size();
            const std::size_t lo = static_cast<std::size_t>(n) / g;
            CHECK(c.members.size() >= lo);
            CHECK(c.members.size() <= lo + (n % g == 0 ? 0 : 1));
        }
        CHECK(total == static_cast<std::size_t>(n));
    }
}

TEST_CASE("kmeans is deterministic per seed") {
    Rng rng(17);
    std::vector<NetworkArch> members;
    for (int i = 0; i < 7; ++i)
        members.push_back(dense({std::uniform_int_distribution<int>(2, 40)(rng),
                                 std::uniform_int_distribution<int>(2, 40)(rng)}));
    const EnsembleSpec e = ensemble(std::move(members));
    const ClusterPlan a = cluster_kmeans(e, 3, 50, 123);
    const ClusterPlan b = cluster_kmeans(e, 3, 50, 123);
    CHECK(to_json(a) == to_json(b));
}

TEST_CASE("greedy tau matches the worked sizes") {
    // param counts sorted; with tau = 0.5 the 10/12 pair merges, 40/50 merges,
    // but the two groups cannot.
    const EnsembleSpec e = ensemble({dense({10}), dense({12}), dense({40}), dense({50})});
    const ClusterPlan plan = cluster_greedy_tau(e, 0.5);
    CHECK(plan.clusters.size() == 2);
    CHECK(plan.objective == 2);
    CHECK(as_sets(plan) == std::set<std::set<std::string>>{{"m0", "m1"}, {"m2", "m3"}});
}

TEST_CASE("greedy tau extremes") {
    const EnsembleSpec same = ensemble({dense({7}), dense({7}), dense({7})});
    CHECK(cluster_greedy_tau(same, 0.01).clusters.size() == 1);

    const EnsembleSpec spread = ensemble({dense({2}), dense({30}), dense({90})});
    CHECK(cluster_greedy_tau(spread, 0.05).clusters.size() == 3);
    CHECK(cluster_greedy_tau(spread, 1.0).clusters.size() == 1);

    CHECK_THROWS_AS(cluster_greedy_tau(spread, 0.0), InvalidTau);
    CHECK_THROWS_AS(cluster_greedy_tau(spread, 1.5), InvalidTau);
}

TEST_CASE("greedy tau equals the consecutive-partition oracle") {
    Rng rng(41);
    for (int i = 0; i < 100; ++i) {
        std::vector<NetworkArch> members;
        const int n = std::uniform_int_distribution<int>(2, 9)(rng);
        for (int j = 0; j < n; ++j)
            members.push_back(dense({std::uniform_int_distribution<int>(1, 50)(rng)}));
        const EnsembleSpec e = ensemble(std::move(members));
        const double tau = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
        CHECK(static_cast<int>(cluster_greedy_tau(e, tau).clusters.size()) ==
              testkit::oracle_consecutive_partitions(e, tau));
    }
}

TEST_CASE("cluster plan JSON round-trip") {
    const EnsembleSpec e = ensemble({dense({4}), dense({5}), dense({40}), dense({50})});
    const ClusterPlan plan = cluster_kmeans(e, 2, 50, 7);
    const ClusterPlan back = cluster_plan_from_json(to_json(plan));
    CHECK(to_json(back) == to_json(plan));
}
