#include <benchmark/benchmark.h>

#include <random>

#include "mothernets/clustering.hpp"
#include "mothernets/mothernet.hpp"
#include "mothernets/network.hpp"
#include "mothernets/rng.hpp"
#include "mothernets/transforms.hpp"

using namespace mothernets;

namespace {

NetworkArch dense(std::vector<int> hidden, int features = 16, int classes = 10) {
    NetworkArch a;
    a.kind = ArchKind::dense;
    a.input_shape.features = features;
    for (int u : hidden) a.dense_layers.push_back({u, Activation::relu, false});
    a.dense_layers.push_back({classes, Activation::softmax_output, false});
    return a;
}

EnsembleSpec random_ensemble(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_int_distribution<int> units(8, 128), depth(1, 4);
    EnsembleSpec e;
    for (int i = 0; i < n; ++i) {
        std::vector<int> hidden;
        for (int d = depth(rng); d > 0; --d) hidden.push_back(units(rng));
        e.members.push_back(dense(hidden));
        e.names.push_back("m" + std::to_string(i));
    }
    return e;
}

Dataset random_batch(const NetworkArch& arch, int n, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> normal;
    Dataset d;
    d.num_classes = arch.dense_layers.back().units;
    d.features = Tensor({n, arch.input_shape.features});
    for (double& v : d.features.data) v = normal(rng);
    std::uniform_int_distribution<int> label(0, d.num_classes - 1);
    for (int i = 0; i < n; ++i) d.labels.push_back(label(rng));
    return d;
}

void bm_edit_distance(benchmark::State& state) {
    const EnsembleSpec e = random_ensemble(2, 1);
    const auto vecs = vectorize(e);
    for (auto _ : state) benchmark::DoNotOptimize(edit_distance(vecs[0], vecs[1]));
}
BENCHMARK(bm_edit_distance);

void bm_build_mothernet(benchmark::State& state) {
    const EnsembleSpec e = random_ensemble(static_cast<int>(state.range(0)), 2);
    for (auto _ : state) benchmark::DoNotOptimize(build_mothernet(e));
}
BENCHMARK(bm_build_mothernet)->Arg(4)->Arg(16)->Arg(64);

void bm_cluster_kmeans(benchmark::State& state) {
    const EnsembleSpec e = random_ensemble(static_cast<int>(state.range(0)), 3);
    for (auto _ : state) benchmark::DoNotOptimize(cluster_kmeans(e, 3, 50, 0));
}
BENCHMARK(bm_cluster_kmeans)->Arg(8)->Arg(16);

void bm_forward(benchmark::State& state) {
    const NetworkArch arch = dense({64, 64});
    const WeightedNetwork net = init_network(arch, 4);
    const Dataset batch = random_batch(arch, static_cast<int>(state.range(0)), 5);
    for (auto _ : state) benchmark::DoNotOptimize(forward(net, batch.features));
}
BENCHMARK(bm_forward)->Arg(1)->Arg(32)->Arg(256);

void bm_gradients(benchmark::State& state) {
    const NetworkArch arch = dense({64, 64});
    const WeightedNetwork net = init_network(arch, 6);
    const Dataset batch = random_batch(arch, 32, 7);
    for (auto _ : state) benchmark::DoNotOptimize(gradients(net, batch));
}
BENCHMARK(bm_gradients);

void bm_hatch(benchmark::State& state) {
    const NetworkArch mother_arch = dense({32, 32});
    const NetworkArch target = dense({64, 64, 48});
    const WeightedNetwork mother = init_network(mother_arch, 8);
    const HatchPlan plan = plan_hatch(mother_arch, target, 9);
    for (auto _ : state) benchmark::DoNotOptimize(hatch(mother, plan));
}
BENCHMARK(bm_hatch);

} // namespace

BENCHMARK_MAIN();
