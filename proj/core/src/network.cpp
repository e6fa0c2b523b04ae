#include "mothernets/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mothernets/rng.hpp"

namespace mothernets {

namespace {

std::size_t conv_layer_count(const NetworkArch& arch) {
    std::size_t n = 0;
    for (const auto& block : arch.conv_blocks) n += block.layers.size();
    return n;
}

Tensor pad_input(const Tensor& x, int p) {
    if (p == 0) return x;
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor out({n, c, h + 2 * p, w + 2 * p});
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < c; ++k)
            for (int y = 0; y < h; ++y)
                for (int z = 0; z < w; ++z) out(i, k, y + p, z + p) = x(i, k, y, z);
    return out;
}

// Valid convolution, stride 1; kernel (nf, in_c, f, f).
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
    const int n = x.dim(0), in_c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int nf = kernel.dim(0), f = kernel.dim(2);
    if (kernel.dim(1) != in_c) throw ShapeMismatch("conv kernel channel mismatch");
    const int oh = h - f + 1, ow = w - f + 1;
    if (oh < 1 || ow < 1) throw ShapeMismatch("conv input smaller than filter");
    Tensor out({n, nf, oh, ow});
    for (int i = 0; i < n; ++i)
        for (int o = 0; o < nf; ++o)
            for (int y = 0; y < oh; ++y)
                for (int z = 0; z < ow; ++z) {
                    double acc = bias(o);
                    for (int k = 0; k < in_c; ++k)
                        for (int dy = 0; dy < f; ++dy)
                            for (int dz = 0; dz < f; ++dz)
                                acc += kernel(o, k, dy, dz) * x(i, k, y + dy, z + dz);
                    out(i, o, y, z) = acc;
                }
    return out;
}

Tensor max_pool2(const Tensor& x) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2) / 2, w = x.dim(3) / 2;
    if (h < 1 || w < 1) throw ShapeMismatch("pooling input too small");
    Tensor out({n, c, h, w});
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < c; ++k)
            for (int y = 0; y < h; ++y)
                for (int z = 0; z < w; ++z)
                    out(i, k, y, z) = std::max({x(i, k, 2 * y, 2 * z), x(i, k, 2 * y, 2 * z + 1),
                                                x(i, k, 2 * y + 1, 2 * z),
                                                x(i, k, 2 * y + 1, 2 * z + 1)});
    return out;
}

void relu_inplace(Tensor& t) {
    for (double& v : t.data) v = std::max(v, 0.0);
}

void softmax_rows(Tensor& t) {
    const int n = t.dim(0), c = t.dim(1);
    for (int i = 0; i < n; ++i) {
        double mx = t(i, 0);
        for (int j = 1; j < c; ++j) mx = std::max(mx, t(i, j));
        double sum = 0;
        for (int j = 0; j < c; ++j) {
            t(i, j) = std::exp(t(i, j) - mx);
            sum += t(i, j);
        }
        for (int j = 0; j < c; ++j) t(i, j) /= sum;
    }
}

// z = a W^T + b, with W (out, in) and a (n, in).
Tensor affine(const Tensor& a, const Tensor& w, const Tensor& b) {
    const int n = a.dim(0), in = a.dim(1), out = w.dim(0);
    if (w.dim(1) != in) throw ShapeMismatch("dense weight width mismatch");
    Tensor z({n, out});
    for (int i = 0; i < n; ++i)
        for (int o = 0; o < out; ++o) {
            double acc = b(o);
            for (int j = 0; j < in; ++j) acc += w(o, j) * a(i, j);
            z(i, o) = acc;
        }
    return z;
}

Tensor as_batch(const NetworkArch& arch, const Tensor& x) {
    if (arch.kind == ArchKind::dense) {
        if (x.rank() == 1) {
            Tensor b({1, x.dim(0)});
            b.data = x.data;
            return b;
        }
        if (x.rank() == 2) return x;
        throw ShapeMismatch("dense input must have rank 1 or 2");
    }
    if (x.rank() == 3) {
        Tensor b({1, x.dim(0), x.dim(1), x.dim(2)});
        b.data = x.data;
        return b;
    }
    if (x.rank() == 4) return x;
    throw ShapeMismatch("conv input must have rank 3 or 4");
}

// Dense-tail forward trace kept for backpropagation.
struct DenseTrace {
    std::vector<Tensor> input; // input activation of each dense layer
    std::vector<Tensor> pre;   // pre-activation of each dense layer
    Tensor probs;
};

DenseTrace dense_forward(const WeightedNetwork& net, Tensor a) {
    DenseTrace trace;
    const std::size_t L = net.arch.dense_layers.size();
    for (std::size_t l = 0; l < L; ++l) {
        const auto& spec = net.arch.dense_layers[l];
        const std::size_t wi = dense_weight_index(net.arch, l);
        Tensor z = affine(a, net.weights[wi], net.weights[wi + 1]);
        trace.input.push_back(std::move(a));
        if (spec.activation == Activation::softmax_output) {
            softmax_rows(z);
            trace.pre.push_back(z);
            trace.probs = std::move(z);
            return trace;
        }
        Tensor out = z;
        if (spec.activation == Activation::relu) relu_inplace(out);
        if (spec.residual)
            for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += trace.input[l].data[i];
        trace.pre.push_back(std::move(z));
        a = std::move(out);
    }
    throw InvalidArch("network has no output layer");
}

Tensor conv_features(const WeightedNetwork& net, const Tensor& batch) {
    Tensor a = batch;
    std::size_t wi = 0;
    for (const auto& block : net.arch.conv_blocks) {
        for (const auto& layer : block.layers) {
            a = conv2d(pad_input(a, layer.input_padding), net.weights[wi], net.weights[wi + 1]);
            relu_inplace(a);
            wi += 2;
        }
        if (block.followed_by_pool) a = max_pool2(a);
    }
    check_finite(a, "conv stack");
    Tensor flat({a.dim(0), static_cast<int>(a.size()) / a.dim(0)});
    flat.data = std::move(a.data);
    return flat;
}

void validate_weights(const WeightedNetwork& net) {
    const std::size_t expect = 2 * (conv_layer_count(net.arch) + net.arch.dense_layers.size());
    if (net.weights.size() != expect) throw ShapeMismatch("weight tensor count mismatch");
}

} // namespace

void validate_dataset(const Dataset& data) {
    if (data.labels.empty()) throw ShapeMismatch("dataset must have at least one example");
    if (data.num_classes < 1) throw ShapeMismatch("num_classes must be positive");
    if (data.features.dim(0) != static_cast<int>(data.labels.size()))
        throw ShapeMismatch("feature rows must match label count");
    for (int label : data.labels)
        if (label < 0 || label >= data.num_classes) throw ShapeMismatch("label out of range");
}

std::size_t dense_weight_index(const NetworkArch& arch, std::size_t i) {
    return 2 * (conv_layer_count(arch) + i);
}

WeightedNetwork init_network(const NetworkArch& arch, std::uint64_t seed, bool scale_by_fan_in) {
    validate(arch);
    WeightedNetwork net;
    net.arch = arch;
    net.rng_seed = seed;
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    auto fill = [&](Tensor& t, int fan_in) {
        const double scale = scale_by_fan_in ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : 1.0;
        for (double& v : t.data) v = normal(rng) * scale;
    };

    int channels = arch.input_shape.channels;
    for (const auto& block : arch.conv_blocks) {
        for (const auto& layer : block.layers) {
            Tensor k({layer.num_filters, channels, layer.filter_size, layer.filter_size});
            fill(k, layer.filter_size * layer.filter_size * channels);
            net.weights.push_back(std::move(k));
            net.weights.emplace_back(std::vector<int>{layer.num_filters});
            channels = layer.num_filters;
        }
    }
    int in = conv_output_shape(arch).flat;
    for (const auto& layer : arch.dense_layers) {
        Tensor w({layer.units, in});
        fill(w, in);
        net.weights.push_back(std::move(w));
        net.weights.emplace_back(std::vector<int>{layer.units});
        in = layer.units;
    }
    return net;
}

Tensor forward(const WeightedNetwork& net, const Tensor& x) {
    validate_weights(net);
    Tensor batch = as_batch(net.arch, x);
    if (net.arch.kind == ArchKind::dense) {
        if (batch.dim(1) != net.arch.input_shape.features)
            throw ShapeMismatch("dense input width mismatch");
    } else {
        if (batch.dim(1) != net.arch.input_shape.channels ||
            batch.dim(2) != net.arch.input_shape.height ||
            batch.dim(3) != net.arch.input_shape.width)
            throw ShapeMismatch("conv input shape mismatch");
        batch = conv_features(net, batch);
    }
    Tensor probs = dense_forward(net, std::move(batch)).probs;
    check_finite(probs, "forward output");
    return probs;
}

std::vector<Tensor> gradients(const WeightedNetwork& net, const Dataset& batch) {
    if (net.arch.kind != ArchKind::dense)
        throw ConvTrainingUnsupported("gradients are implemented for dense networks only");
    validate_weights(net);
    validate_dataset(batch);

    const int n = batch.features.dim(0);
    DenseTrace trace = dense_forward(net, as_batch(net.arch, batch.features));
    const std::size_t L = net.arch.dense_layers.size();

    std::vector<Tensor> grads;
    grads.reserve(net.weights.size());
    for (const auto& w : net.weights) grads.emplace_back(w.shape);

    // dout: gradient with respect to the current layer's output
    Tensor dout;
    for (std::size_t l = L; l-- > 0;) {
        const auto& spec = net.arch.dense_layers[l];
        const std::size_t wi = dense_weight_index(net.arch, l);
        const Tensor& w = net.weights[wi];
        const Tensor& a = trace.input[l];
        const int out = w.dim(0), in = w.dim(1);

        // gradient with respect to this layer's pre-activation
        Tensor dz;
        if (l + 1 == L) {
            // softmax + mean cross-entropy: dz = (probs - onehot) / n
            dz = trace.probs;
            for (int i = 0; i < n; ++i) dz(i, batch.labels[static_cast<std::size_t>(i)]) -= 1.0;
            for (double& v : dz.data) v /= n;
        } else {
            dz = dout;
            if (spec.activation == Activation::relu) {
                const Tensor& z = trace.pre[l];
                for (std::size_t i = 0; i < dz.size(); ++i)
                    if (z.data[i] <= 0.0) dz.data[i] = 0.0;
            }
        }

        Tensor& gw = grads[wi];
        Tensor& gb = grads[wi + 1];
        for (int i = 0; i < n; ++i)
            for (int o = 0; o < out; ++o) {
                const double d = dz(i, o);
                gb(o) += d;
                for (int j = 0; j < in; ++j) gw(o, j) += d * a(i, j);
            }
        if (l == 0) break;

        Tensor da({n, in});
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < in; ++j) {
                double acc = 0;
                for (int o = 0; o < out; ++o) acc += w(o, j) * dz(i, o);
                da(i, j) = acc;
            }
        // y = x + act(z): the identity path forwards the output gradient
        if (spec.residual)
            for (std::size_t i = 0; i < da.size(); ++i) da.data[i] += dout.data[i];
        dout = std::move(da);
    }
    return grads;
}

std::pair<WeightedNetwork, TrainLog> train(const WeightedNetwork& net, const Dataset& data,
                                           const TrainConfig& cfg) {
    if (net.arch.kind != ArchKind::dense)
        throw ConvTrainingUnsupported("training is implemented for dense networks only");
    if (cfg.batch_size < 1 || cfg.max_epochs < 0 || cfg.patience < 1 ||
        cfg.learning_rate < 0.0)
        throw InvalidArch("train config values must be positive");
    validate_dataset(data);

    WeightedNetwork current = net;
    TrainLog log;
    const std::size_t n = data.labels.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    double best_accuracy = -1.0;
    int since_best = 0;
    const int features = data.features.dim(1);

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Rng rng(derive_seed(cfg.shuffle_seed, static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), rng);

        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t end = std::min(n, start + cfg.batch_size);
            Dataset batch;
            batch.num_classes = data.num_classes;
            batch.features = Tensor({static_cast<int>(end - start), features});
            for (std::size_t i = start; i < end; ++i) {
                const std::size_t row = order[i];
                for (int j = 0; j < features; ++j)
                    batch.features(static_cast<int>(i - start), j) =
                        data.features(static_cast<int>(row), j);
                batch.labels.push_back(data.labels[row]);
            }
            const auto grads = gradients(current, batch);
            for (std::size_t t = 0; t < grads.size(); ++t)
                for (std::size_t k = 0; k < grads[t].size(); ++k)
                    current.weights[t].data[k] -= cfg.learning_rate * grads[t].data[k];
        }

        const Tensor probs = forward(current, data.features);
        log.loss.push_back(cross_entropy(probs, data.labels));
        double correct = 0;
        for (std::size_t i = 0; i < n; ++i) {
            int arg = 0;
            for (int j = 1; j < data.num_classes; ++j)
                if (probs(static_cast<int>(i), j) > probs(static_cast<int>(i), arg)) arg = j;
            if (arg == data.labels[i]) ++correct;
        }
        const double accuracy = correct / static_cast<double>(n);
        log.accuracy.push_back(accuracy);
        ++log.epochs;

        if (accuracy > best_accuracy) {
            best_accuracy = accuracy;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    return {std::move(current), std::move(log)};
}

double evaluate(const WeightedNetwork& net, const Dataset& data) {
    validate_dataset(data);
    const Tensor probs = forward(net, data.features);
    double correct = 0;
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
        int arg = 0;
        for (int j = 1; j < data.num_classes; ++j)
            if (probs(static_cast<int>(i), j) > probs(static_cast<int>(i), arg)) arg = j;
        if (arg == data.labels[i]) ++correct;
    }
    return correct / static_cast<double>(data.labels.size());
}

double cross_entropy(const Tensor& probs, const std::vector<int>& labels) {
    double total = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        total -= std::log(std::max(probs(static_cast<int>(i), labels[i]), 1e-300));
    return total / static_cast<double>(labels.size());
}

} // namespace mothernets
