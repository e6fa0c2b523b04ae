#include "testkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mothernets/mothernet.hpp"

namespace testkit {

namespace {

EnsembleSpec subset(const EnsembleSpec& ensemble, const std::vector<std::size_t>& idx) {
    EnsembleSpec sub;
    for (std::size_t i : idx) {
        sub.members.push_back(ensemble.members[i]);
        sub.names.push_back(ensemble.names[i]);
    }
    return sub;
}

bool tau_feasible(const EnsembleSpec& cluster, double tau) {
    const std::int64_t mother = param_count(build_mothernet(cluster).arch);
    for (const auto& m : cluster.members) {
        const double size = static_cast<double>(param_count(m));
        if (!(size - static_cast<double>(mother) < tau * size)) return false;
    }
    return true;
}

} // namespace

int oracle_consecutive_partitions(const EnsembleSpec& ensemble, double tau) {
    const std::size_t n = ensemble.members.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto pa = param_count(ensemble.members[a]);
        const auto pb = param_count(ensemble.members[b]);
        if (pa != pb) return pa < pb;
        return derive_seed(0, ensemble.names[a]) < derive_seed(0, ensemble.names[b]);
    });

    const int inf = 1 << 20;
    std::vector<int> best(n + 1, inf);
    best[0] = 0;
    for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 0; j < i; ++j) {
            if (best[j] == inf) continue;
            const std::vector<std::size_t> segment(order.begin() + static_cast<std::ptrdiff_t>(j),
                                                   order.begin() + static_cast<std::ptrdiff_t>(i));
            if (tau_feasible(subset(ensemble, segment), tau))
                best[i] = std::min(best[i], best[j] + 1);
        }
    return best[n];
}

std::int64_t oracle_balanced_partition_optimum(const EnsembleSpec& ensemble, int g) {
    const std::size_t n = ensemble.members.size();
    const std::size_t lo = n / static_cast<std::size_t>(g);
    const std::size_t hi = lo + (n % static_cast<std::size_t>(g) ? 1 : 0);

    std::vector<int> assignment(n, 0);
    std::int64_t best = -1;

    auto evaluate = [&] {
        std::vector<std::vector<std::size_t>> groups(static_cast<std::size_t>(g));
        for (std::size_t i = 0; i < n; ++i)
            groups[static_cast<std::size_t>(assignment[i])].push_back(i);
        std::size_t at_hi = 0;
        for (const auto& grp : groups) {
            if (grp.size() != lo && grp.size() != hi) return;
            if (grp.size() == hi && hi != lo) ++at_hi;
        }
        if (hi != lo && at_hi != n % static_cast<std::size_t>(g)) return;

        EnsembleSpec joint = ensemble;
        for (std::size_t c = 0; c < groups.size(); ++c) {
            joint.members.push_back(build_mothernet(subset(ensemble, groups[c])).arch);
            joint.names.push_back("\x02oracle" + std::to_string(c));
        }
        const auto vectors = vectorize(joint);
        std::int64_t total = 0;
        for (std::size_t c = 0; c < groups.size(); ++c)
            for (std::size_t i : groups[c]) total += edit_distance(vectors[i], vectors[n + c]);
        if (best < 0 || total < best) best = total;
    };

    // clusters are interchangeable: member i may open cluster max_used+1 only
    auto recurse = [&](auto&& self, std::size_t i, int max_used) -> void {
        if (i == n) {
            if (max_used + 1 == g) evaluate();
            return;
        }
        for (int c = 0; c <= std::min(max_used + 1, g - 1); ++c) {
            assignment[i] = c;
            self(self, i + 1, std::max(max_used, c));
        }
    };
    recurse(recurse, 0, -1);
    return best;
}

int reference_edit_distance(const ArchVector& a, const ArchVector& b) {
    const std::size_t n = a.entries.size(), m = b.entries.size();
    std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1, 0));
    for (std::size_t i = 0; i <= n; ++i) d[i][0] = static_cast<int>(i);
    for (std::size_t j = 0; j <= m; ++j) d[0][j] = static_cast<int>(j);
    for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 1; j <= m; ++j) {
            const bool eq = a.entries[i - 1] == b.entries[j - 1];
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (eq ? 0 : 1)});
        }
    return d[n][m];
}

double oracle_forward_equality(const WeightedNetwork& a, const WeightedNetwork& b, int trials,
                               std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor x = a.arch.kind == ArchKind::dense
                   ? Tensor({trials, a.arch.input_shape.features})
                   : Tensor({trials, a.arch.input_shape.channels, a.arch.input_shape.height,
                             a.arch.input_shape.width});
    for (double& v : x.data) v = normal(rng);
    const Tensor ya = forward(a, x);
    const Tensor yb = forward(b, x);
    if (ya.shape != yb.shape) throw ShapeMismatch("forward-equality shape mismatch");
    double max_diff = 0;
    for (std::size_t i = 0; i < ya.size(); ++i)
        max_diff = std::max(max_diff, std::abs(ya.data[i] - yb.data[i]));
    return max_diff;
}

double min_relu_preactivation(const WeightedNetwork& net, const Dataset& batch) {
    Tensor a = batch.features;
    double min_abs = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l + 1 < net.arch.dense_layers.size(); ++l) {
        const auto& spec = net.arch.dense_layers[l];
        const Tensor& w = net.weights[2 * l];
        const Tensor& b = net.weights[2 * l + 1];
        Tensor z({a.dim(0), w.dim(0)});
        for (int i = 0; i < a.dim(0); ++i)
            for (int o = 0; o < w.dim(0); ++o) {
                double s = b(o);
                for (int j = 0; j < w.dim(1); ++j) s += w(o, j) * a(i, j);
                z(i, o) = s;
                if (spec.activation == Activation::relu) min_abs = std::min(min_abs, std::abs(s));
            }
        if (spec.activation == Activation::relu)
            for (double& v : z.data) v = v > 0.0 ? v : 0.0;
        if (spec.residual)
            for (std::size_t i = 0; i < z.size(); ++i) z.data[i] += a.data[i];
        a = std::move(z);
    }
    return min_abs;
}

std::vector<Tensor> finite_difference_gradients(const WeightedNetwork& net, const Dataset& batch,
                                                double h) {
    WeightedNetwork probe = net;
    std::vector<Tensor> grads;
    for (std::size_t t = 0; t < net.weights.size(); ++t) {
        Tensor g(net.weights[t].shape);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double orig = probe.weights[t].data[i];
            probe.weights[t].data[i] = orig + h;
            const double up = cross_entropy(forward(probe, batch.features), batch.labels);
            probe.weights[t].data[i] = orig - h;
            const double down = cross_entropy(forward(probe, batch.features), batch.labels);
            probe.weights[t].data[i] = orig;
            g.data[i] = (up - down) / (2 * h);
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

Dataset gen(const SyntheticSpec& spec) {
    Rng rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Dataset data;
    data.num_classes = spec.num_classes;

    if (spec.generator == Generator::random_images) {
        data.features = Tensor({spec.n, spec.channels, spec.height, spec.width});
        for (double& v : data.features.data) v = normal(rng);
        std::uniform_int_distribution<int> label(0, spec.num_classes - 1);
        for (int i = 0; i < spec.n; ++i) data.labels.push_back(label(rng));
        return data;
    }

    data.features = Tensor({spec.n, 2});
    const double pi = std::acos(-1.0);
    for (int i = 0; i < spec.n; ++i) {
        const int c = i % spec.num_classes;
        double x, y;
        if (spec.generator == Generator::blobs) {
            const double angle = 2.0 * pi * c / spec.num_classes;
            x = 2.0 * std::cos(angle) + spec.noise * normal(rng);
            y = 2.0 * std::sin(angle) + spec.noise * normal(rng);
        } else {
            // two interleaved spirals; classes beyond 2 rotate further
            const double t = 0.5 + 2.5 * pi * (i / spec.num_classes) /
                                       std::max(1, spec.n / spec.num_classes);
            const double angle = t + 2.0 * pi * c / spec.num_classes;
            x = t * std::cos(angle) / pi + spec.noise * normal(rng);
            y = t * std::sin(angle) / pi + spec.noise * normal(rng);
        }
        data.features(i, 0) = x;
        data.features(i, 1) = y;
        data.labels.push_back(c);
    }
    return data;
}

NetworkArch gen_dense_arch(Rng& rng) {
    auto pick = [&](int lo, int hi) {
        return std::uniform_int_distribution<int>(lo, hi)(rng);
    };
    NetworkArch arch;
    arch.kind = ArchKind::dense;
    arch.input_shape.features = pick(2, 5);
    const int hidden = pick(1, 3);
    int prev = arch.input_shape.features;
    for (int i = 0; i < hidden; ++i) {
        const int units = pick(2, 6);
        arch.dense_layers.push_back(DenseLayerSpec{units, Activation::relu, false});
        prev = units;
        // residual blocks only after a non-residual relu layer, so identity
        // insertions stay provably function-preserving
        if (pick(0, 3) == 0)
            arch.dense_layers.push_back(DenseLayerSpec{prev, Activation::relu, true});
    }
    arch.dense_layers.push_back(DenseLayerSpec{pick(2, 4), Activation::softmax_output, false});
    return arch;
}

NetworkArch gen_conv_arch(Rng& rng) {
    auto pick = [&](int lo, int hi) {
        return std::uniform_int_distribution<int>(lo, hi)(rng);
    };
    NetworkArch arch;
    arch.kind = ArchKind::conv;
    arch.input_shape.height = arch.input_shape.width = pick(8, 11);
    arch.input_shape.channels = pick(1, 2);
    int dim = arch.input_shape.height;
    const int blocks = pick(1, 2);
    for (int b = 0; b < blocks; ++b) {
        ConvBlockSpec block;
        const int layers = pick(1, 2);
        for (int l = 0; l < layers; ++l) {
            const int f = (dim >= 5 && pick(0, 1)) ? 3 : 1;
            block.layers.push_back(ConvLayerSpec{f, pick(2, 4), 0});
            dim = dim - f + 1;
        }
        if (dim >= 4 && pick(0, 1)) {
            block.followed_by_pool = true;
            dim /= 2;
        }
        arch.conv_blocks.push_back(std::move(block));
    }
    const int hidden = pick(1, 2);
    for (int i = 0; i < hidden; ++i)
        arch.dense_layers.push_back(DenseLayerSpec{pick(2, 5), Activation::relu, false});
    arch.dense_layers.push_back(DenseLayerSpec{pick(2, 4), Activation::softmax_output, false});
    return arch;
}

NetworkArch grow_arch(const NetworkArch& base, Rng& rng) {
    auto pick = [&](int lo, int hi) {
        return std::uniform_int_distribution<int>(lo, hi)(rng);
    };
    NetworkArch arch = base;

    if (arch.kind == ArchKind::conv) {
        for (auto& block : arch.conv_blocks)
            for (auto& layer : block.layers) {
                layer.num_filters += pick(0, 3);
                if (pick(0, 2) == 0) {
                    // growth keeps 2*padding - filter_size invariant so the
                    // family stays mutually hatchable
                    const int delta = 2 * pick(1, 2);
                    layer.input_padding += delta / 2;
                    layer.filter_size += delta;
                }
            }
        // extra trailing layers keep spatial dims (padding (f-1)/2)
        for (auto& block : arch.conv_blocks)
            while (pick(0, 3) == 0) {
                const int f = pick(0, 1) ? 1 : 3;
                const int prev = block.layers.back().num_filters;
                block.layers.push_back(ConvLayerSpec{f, prev + pick(0, 2), (f - 1) / 2});
            }
        if (pick(0, 2) == 0) {
            const int prev = arch.conv_blocks.back().layers.back().num_filters;
            const int f = pick(0, 1) ? 1 : 3;
            arch.conv_blocks.push_back(
                ConvBlockSpec{{ConvLayerSpec{f, prev + pick(0, 2), (f - 1) / 2}}, false});
        }
    }

    // widen hidden layers; residual widths follow their input
    int prev = dense_input_width(arch, 0);
    for (std::size_t i = 0; i + 1 < arch.dense_layers.size(); ++i) {
        auto& layer = arch.dense_layers[i];
        if (layer.residual)
            layer.units = prev;
        else
            layer.units += pick(0, 4);
        prev = layer.units;
    }
    // extra trailing hidden layers, inserted before the output layer
    while (pick(0, 2) == 0) {
        const std::size_t at = arch.dense_layers.size() - 1;
        const Activation act = at > 0 ? arch.dense_layers[at - 1].activation : Activation::relu;
        if (pick(0, 1))
            arch.dense_layers.insert(arch.dense_layers.begin() + static_cast<std::ptrdiff_t>(at),
                                     DenseLayerSpec{prev, act, true});
        else {
            const int units = prev + pick(0, 3);
            arch.dense_layers.insert(arch.dense_layers.begin() + static_cast<std::ptrdiff_t>(at),
                                     DenseLayerSpec{units, act, false});
            prev = units;
        }
    }
    validate(arch);
    return arch;
}

EnsembleSpec gen_cluster(Rng& rng, bool conv) {
    const NetworkArch base = conv ? gen_conv_arch(rng) : gen_dense_arch(rng);
    EnsembleSpec cluster;
    const int k = std::uniform_int_distribution<int>(2, 5)(rng);
    for (int i = 0; i < k; ++i) {
        cluster.members.push_back(grow_arch(base, rng));
        cluster.names.push_back("m" + std::to_string(i));
    }
    validate(cluster);
    return cluster;
}

} // namespace testkit
