#include "mothernets/transforms.hpp"

#include <algorithm>

#include "mothernets/rng.hpp"

namespace mothernets {

std::string to_string(TransformKind k) {
    switch (k) {
    case TransformKind::deepen_at: return "deepen_at";
    case TransformKind::widen_layer: return "widen_layer";
    case TransformKind::enlarge_filter: return "enlarge_filter";
    case TransformKind::deepen_residual_at: return "deepen_residual_at";
    }
    throw ParseError("unknown transform kind");
}

TransformKind transform_kind_from_string(const std::string& s) {
    if (s == "deepen_at") return TransformKind::deepen_at;
    if (s == "widen_layer") return TransformKind::widen_layer;
    if (s == "enlarge_filter") return TransformKind::enlarge_filter;
    if (s == "deepen_residual_at") return TransformKind::deepen_residual_at;
    throw ParseError("unknown transform kind '" + s + "'");
}

namespace {

std::size_t conv_count(const NetworkArch& arch) {
    std::size_t n = 0;
    for (const auto& b : arch.conv_blocks) n += b.layers.size();
    return n;
}

std::size_t hidden_count(const NetworkArch& arch) { return arch.dense_layers.size() - 1; }

// Flat conv-layer index of (block, position); position may equal the block's
// size for insertion at the end.
std::size_t conv_flat(const NetworkArch& arch, int block, int position, bool inserting) {
    const int nb = static_cast<int>(arch.conv_blocks.size());
    if (block < 0 || block > nb || (block == nb && !inserting))
        throw InvalidArch("conv block index out of range");
    std::size_t flat = 0;
    for (int b = 0; b < block; ++b) flat += arch.conv_blocks[b].layers.size();
    const int limit = block == nb ? 0 : static_cast<int>(arch.conv_blocks[block].layers.size());
    if (position < 0 || position > limit || (!inserting && position == limit))
        throw InvalidArch("conv layer index out of range");
    return flat + static_cast<std::size_t>(position);
}

ConvLayerSpec& conv_layer_at(NetworkArch& arch, int block, int position) {
    conv_flat(arch, block, position, false); // bounds check
    return arch.conv_blocks[static_cast<std::size_t>(block)]
        .layers[static_cast<std::size_t>(position)];
}

// True when dense layer p's output is provably nonnegative (relu chains,
// possibly through residual adds of nonnegative inputs). p = -1 means the
// dense stage's input: nonnegative for conv archs (post-relu features).
bool output_nonneg(const NetworkArch& arch, int p) {
    if (p < 0) return arch.kind == ArchKind::conv;
    const auto& l = arch.dense_layers[static_cast<std::size_t>(p)];
    if (l.activation != Activation::relu) return false;
    if (l.residual) return output_nonneg(arch, p - 1);
    return true;
}

void check_map(const std::vector<int>& map, int old_units, int new_units) {
    if (new_units <= old_units)
        throw InvalidReplicationMap("widen requires new_units > old units");
    if (static_cast<int>(map.size()) != new_units)
        throw InvalidReplicationMap("replication map length must equal new_units");
    for (int i = 0; i < old_units; ++i)
        if (map[static_cast<std::size_t>(i)] != i)
            throw InvalidReplicationMap("first old-count entries must map to themselves");
    for (int i = old_units; i < new_units; ++i)
        if (map[static_cast<std::size_t>(i)] < 0 || map[static_cast<std::size_t>(i)] >= old_units)
            throw InvalidReplicationMap("replication source out of range");
}

std::vector<int> replication_counts(const std::vector<int>& map, int old_units) {
    std::vector<int> c(static_cast<std::size_t>(old_units), 0);
    for (int s : map) ++c[static_cast<std::size_t>(s)];
    return c;
}

void insert_pair(WeightedNetwork& net, std::size_t weight_index, Tensor w, Tensor b) {
    net.weights.insert(net.weights.begin() + static_cast<std::ptrdiff_t>(weight_index),
                       {std::move(w), std::move(b)});
    if (!net.provenance.empty()) {
        const auto& tw = net.weights[weight_index];
        const auto& tb = net.weights[weight_index + 1];
        net.provenance.insert(net.provenance.begin() + static_cast<std::ptrdiff_t>(weight_index),
                              {std::vector<std::uint8_t>(tw.size(), prov_introduced),
                               std::vector<std::uint8_t>(tb.size(), prov_introduced)});
    }
}

// Replaces net.weights[idx] with `next`; marks[i] gives the provenance index
// in the old tensor for entry i of the new one, or -1 for introduced.
void replace_tensor(WeightedNetwork& net, std::size_t idx, Tensor next,
                    const std::vector<std::int64_t>& marks) {
    if (!net.provenance.empty()) {
        std::vector<std::uint8_t> prov(next.size(), prov_introduced);
        for (std::size_t i = 0; i < marks.size(); ++i)
            if (marks[i] >= 0)
                prov[i] = net.provenance[idx][static_cast<std::size_t>(marks[i])];
        net.provenance[idx] = std::move(prov);
    }
    net.weights[idx] = std::move(next);
}

Activation inserted_activation(const NetworkArch& arch, int position) {
    if (position < 1 || position > static_cast<int>(hidden_count(arch)))
        throw InvalidArch("deepen position out of range");
    const Activation act = arch.dense_layers[static_cast<std::size_t>(position - 1)].activation;
    if (act == Activation::relu && !output_nonneg(arch, position - 1))
        throw ActivationNotIdempotent(
            "relu insertion requires a provably nonnegative input at position " +
            std::to_string(position));
    return act;
}

} // namespace

WeightedNetwork deepen(const WeightedNetwork& net, int position) {
    WeightedNetwork out = net;
    const Activation act = inserted_activation(out.arch, position);
    const int width = out.arch.dense_layers[static_cast<std::size_t>(position - 1)].units;

    Tensor w({width, width});
    for (int i = 0; i < width; ++i) w(i, i) = 1.0;
    insert_pair(out, dense_weight_index(out.arch, static_cast<std::size_t>(position)),
                std::move(w), Tensor({width}));
    out.arch.dense_layers.insert(out.arch.dense_layers.begin() + position,
                                 DenseLayerSpec{width, act, false});
    return out;
}

WeightedNetwork deepen_conv(const WeightedNetwork& net, int block, int position) {
    WeightedNetwork out = net;
    const std::size_t flat = conv_flat(out.arch, block, position, true);
    if (flat == 0)
        throw ActivationNotIdempotent("cannot insert an identity conv layer before any "
                                      "relu output");
    const int channels =
        [&] {
            std::size_t seen = 0;
            for (const auto& b : out.arch.conv_blocks)
                for (const auto& l : b.layers)
                    if (++seen == flat) return l.num_filters;
            throw InvalidArch("conv insertion point out of range");
        }();

    Tensor k({channels, channels, 1, 1});
    for (int c = 0; c < channels; ++c) k(c, c, 0, 0) = 1.0;
    insert_pair(out, 2 * flat, std::move(k), Tensor({channels}));
    if (block == static_cast<int>(out.arch.conv_blocks.size()))
        out.arch.conv_blocks.push_back(ConvBlockSpec{{}, false});
    auto& layers = out.arch.conv_blocks[static_cast<std::size_t>(block)].layers;
    layers.insert(layers.begin() + position, ConvLayerSpec{1, channels, 0});
    return out;
}

WeightedNetwork deepen_residual(const WeightedNetwork& net, int position) {
    WeightedNetwork out = net;
    if (position < 0 || position > static_cast<int>(hidden_count(out.arch)))
        throw WidthMismatch("residual insertion position out of range");
    const int width = dense_input_width(out.arch, position);
    const Activation act =
        position >= 1 ? out.arch.dense_layers[static_cast<std::size_t>(position - 1)].activation
                      : Activation::relu;

    insert_pair(out, dense_weight_index(out.arch, static_cast<std::size_t>(position)),
                Tensor({width, width}), Tensor({width}));
    out.arch.dense_layers.insert(out.arch.dense_layers.begin() + position,
                                 DenseLayerSpec{width, act, true});
    return out;
}

namespace {

WeightedNetwork widen_dense(const WeightedNetwork& net, int p, int new_units,
                            const std::vector<int>& map) {
    WeightedNetwork out = net;
    auto& layers = out.arch.dense_layers;
    if (p < 0 || p >= static_cast<int>(hidden_count(out.arch)))
        throw InvalidArch("widen position out of range");
    if (layers[static_cast<std::size_t>(p)].residual)
        throw InvalidArch("residual layers are widened through their predecessor");
    const int old = layers[static_cast<std::size_t>(p)].units;
    check_map(map, old, new_units);
    const auto counts = replication_counts(map, old);

    // replicate the widened layer's rows and bias
    {
        const std::size_t wi = dense_weight_index(out.arch, static_cast<std::size_t>(p));
        const Tensor& w = out.weights[wi];
        const int in = w.dim(1);
        Tensor nw({new_units, in});
        std::vector<std::int64_t> wmarks(nw.size()), bmarks(static_cast<std::size_t>(new_units));
        for (int r = 0; r < new_units; ++r) {
            const int s = map[static_cast<std::size_t>(r)];
            for (int j = 0; j < in; ++j) {
                nw(r, j) = w(s, j);
                wmarks[static_cast<std::size_t>(r) * in + j] =
                    r < old ? static_cast<std::int64_t>(s) * in + j : -1;
            }
            bmarks[static_cast<std::size_t>(r)] = r < old ? s : -1;
        }
        Tensor nb({new_units});
        for (int r = 0; r < new_units; ++r) nb(r) = out.weights[wi + 1](map[static_cast<std::size_t>(r)]);
        replace_tensor(out, wi, std::move(nw), wmarks);
        replace_tensor(out, wi + 1, std::move(nb), bmarks);
        layers[static_cast<std::size_t>(p)].units = new_units;
    }

    // carry the widening through consecutive residual successors
    int r = p + 1;
    for (; layers[static_cast<std::size_t>(r)].residual; ++r) {
        const std::size_t wi = dense_weight_index(out.arch, static_cast<std::size_t>(r));
        const Tensor& w = out.weights[wi];
        Tensor nw({new_units, new_units});
        std::vector<std::int64_t> wmarks(nw.size()), bmarks(static_cast<std::size_t>(new_units));
        for (int k = 0; k < new_units; ++k) {
            const int sk = map[static_cast<std::size_t>(k)];
            for (int l = 0; l < new_units; ++l) {
                const int sl = map[static_cast<std::size_t>(l)];
                nw(k, l) = w(sk, sl) / counts[static_cast<std::size_t>(sl)];
                wmarks[static_cast<std::size_t>(k) * new_units + l] =
                    (k < old && l < old) ? static_cast<std::int64_t>(sk) * old + sl : -1;
            }
            bmarks[static_cast<std::size_t>(k)] = k < old ? sk : -1;
        }
        Tensor nb({new_units});
        for (int k = 0; k < new_units; ++k) nb(k) = out.weights[wi + 1](map[static_cast<std::size_t>(k)]);
        replace_tensor(out, wi, std::move(nw), wmarks);
        replace_tensor(out, wi + 1, std::move(nb), bmarks);
        layers[static_cast<std::size_t>(r)].units = new_units;
    }

    // divide the first non-residual consumer's columns
    {
        const std::size_t wi = dense_weight_index(out.arch, static_cast<std::size_t>(r));
        const Tensor& w = out.weights[wi];
        const int rows = w.dim(0);
        Tensor nw({rows, new_units});
        std::vector<std::int64_t> wmarks(nw.size());
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < new_units; ++j) {
                const int s = map[static_cast<std::size_t>(j)];
                nw(i, j) = w(i, s) / counts[static_cast<std::size_t>(s)];
                wmarks[static_cast<std::size_t>(i) * new_units + j] =
                    j < old ? static_cast<std::int64_t>(i) * old + s : -1;
            }
        replace_tensor(out, wi, std::move(nw), wmarks);
    }
    return out;
}

WeightedNetwork widen_conv(const WeightedNetwork& net, int block, int position, int new_units,
                           const std::vector<int>& map) {
    WeightedNetwork out = net;
    const std::size_t flat = conv_flat(out.arch, block, position, false);
    ConvLayerSpec& spec = conv_layer_at(out.arch, block, position);
    const int old = spec.num_filters;
    check_map(map, old, new_units);
    const auto counts = replication_counts(map, old);

    // replicate filters and biases
    {
        const Tensor& k = out.weights[2 * flat];
        const int ic = k.dim(1), f = k.dim(2);
        const std::size_t fsz = static_cast<std::size_t>(ic) * f * f;
        Tensor nk({new_units, ic, f, f});
        std::vector<std::int64_t> kmarks(nk.size()), bmarks(static_cast<std::size_t>(new_units));
        for (int o = 0; o < new_units; ++o) {
            const int s = map[static_cast<std::size_t>(o)];
            for (std::size_t e = 0; e < fsz; ++e) {
                nk.data[static_cast<std::size_t>(o) * fsz + e] = k.data[static_cast<std::size_t>(s) * fsz + e];
                kmarks[static_cast<std::size_t>(o) * fsz + e] =
                    o < old ? static_cast<std::int64_t>(s) * static_cast<std::int64_t>(fsz) +
                                  static_cast<std::int64_t>(e)
                            : -1;
            }
            bmarks[static_cast<std::size_t>(o)] = o < old ? s : -1;
        }
        Tensor nb({new_units});
        for (int o = 0; o < new_units; ++o) nb(o) = out.weights[2 * flat + 1](map[static_cast<std::size_t>(o)]);
        replace_tensor(out, 2 * flat, std::move(nk), kmarks);
        replace_tensor(out, 2 * flat + 1, std::move(nb), bmarks);
        spec.num_filters = new_units;
    }

    if (flat + 1 < conv_count(out.arch)) {
        // rescale the next conv layer's input-channel slices
        const std::size_t wi = 2 * (flat + 1);
        const Tensor& k = out.weights[wi];
        const int nf = k.dim(0), f = k.dim(2);
        Tensor nk({nf, new_units, f, f});
        std::vector<std::int64_t> marks(nk.size());
        for (int o = 0; o < nf; ++o)
            for (int j = 0; j < new_units; ++j) {
                const int s = map[static_cast<std::size_t>(j)];
                for (int dy = 0; dy < f; ++dy)
                    for (int dz = 0; dz < f; ++dz) {
                        nk(o, j, dy, dz) = k(o, s, dy, dz) / counts[static_cast<std::size_t>(s)];
                        const std::size_t at =
                            ((static_cast<std::size_t>(o) * new_units + j) * f + dy) * f + dz;
                        marks[at] = j < old
                                        ? ((static_cast<std::int64_t>(o) * old + s) * f + dy) * f + dz
                                        : -1;
                    }
            }
        replace_tensor(out, wi, std::move(nk), marks);
    } else {
        // rescale the dense tail's column groups (channel-major flatten)
        const std::size_t wi = dense_weight_index(out.arch, 0);
        const Tensor& w = out.weights[wi];
        const int rows = w.dim(0);
        const int hw = w.dim(1) / old;
        Tensor nw({rows, hw * new_units});
        std::vector<std::int64_t> marks(nw.size());
        for (int i = 0; i < rows; ++i)
            for (int ch = 0; ch < new_units; ++ch) {
                const int s = map[static_cast<std::size_t>(ch)];
                for (int o = 0; o < hw; ++o) {
                    nw(i, ch * hw + o) = w(i, s * hw + o) / counts[static_cast<std::size_t>(s)];
                    marks[static_cast<std::size_t>(i) * (hw * new_units) + ch * hw + o] =
                        ch < old ? static_cast<std::int64_t>(i) * (hw * old) + s * hw + o : -1;
                }
            }
        replace_tensor(out, wi, std::move(nw), marks);
    }
    return out;
}

} // namespace

WeightedNetwork widen(const WeightedNetwork& net, int block, int position, int new_units,
                      const std::vector<int>& replication_map) {
    return block < 0 ? widen_dense(net, position, new_units, replication_map)
                     : widen_conv(net, block, position, new_units, replication_map);
}

WeightedNetwork enlarge_filter(const WeightedNetwork& net, int block, int layer, int new_size) {
    WeightedNetwork out = net;
    const std::size_t flat = conv_flat(out.arch, block, layer, false);
    ConvLayerSpec& spec = conv_layer_at(out.arch, block, layer);
    if (new_size % 2 == 0) throw EvenEnlargement("enlarged filter size must be odd");
    if (new_size <= spec.filter_size)
        throw EvenEnlargement("enlarge requires new_size > current filter size");
    const int pad = (new_size - spec.filter_size) / 2;

    const Tensor& k = out.weights[2 * flat];
    const int nf = k.dim(0), ic = k.dim(1), old = k.dim(2);
    Tensor nk({nf, ic, new_size, new_size});
    std::vector<std::int64_t> marks(nk.size(), -1);
    for (int o = 0; o < nf; ++o)
        for (int c = 0; c < ic; ++c)
            for (int y = 0; y < old; ++y)
                for (int z = 0; z < old; ++z) {
                    nk(o, c, y + pad, z + pad) = k(o, c, y, z);
                    const std::size_t at =
                        ((static_cast<std::size_t>(o) * ic + c) * new_size + y + pad) * new_size +
                        z + pad;
                    marks[at] = ((static_cast<std::int64_t>(o) * ic + c) * old + y) * old + z;
                }
    replace_tensor(out, 2 * flat, std::move(nk), marks);
    spec.filter_size = new_size;
    spec.input_padding += pad;
    return out;
}

WeightedNetwork perturb(const WeightedNetwork& net, double sigma, std::uint64_t seed,
                        PerturbScope scope) {
    if (sigma < 0.0) throw InvalidArch("perturb sigma must be nonnegative");
    if (scope == PerturbScope::new_params_only && net.provenance.empty())
        throw MissingProvenance("new_params_only perturbation needs provenance marks");
    WeightedNetwork out = net;
    if (sigma == 0.0) return out;
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, sigma);
    for (std::size_t t = 0; t < out.weights.size(); ++t)
        for (std::size_t i = 0; i < out.weights[t].size(); ++i) {
            const bool in_scope = scope == PerturbScope::all_params ||
                                  out.provenance[t][i] == prov_introduced;
            if (in_scope) out.weights[t].data[i] += normal(rng);
        }
    return out;
}

void apply_step_shape(NetworkArch& arch, const TransformStep& step) {
    switch (step.kind) {
    case TransformKind::deepen_at:
        if (step.block < 0) {
            const Activation act = inserted_activation(arch, step.position);
            const int width = arch.dense_layers[static_cast<std::size_t>(step.position - 1)].units;
            arch.dense_layers.insert(arch.dense_layers.begin() + step.position,
                                     DenseLayerSpec{width, act, false});
        } else {
            const std::size_t flat = conv_flat(arch, step.block, step.position, true);
            if (flat == 0) throw ActivationNotIdempotent("conv deepen before any relu output");
            int channels = 0;
            std::size_t seen = 0;
            for (const auto& b : arch.conv_blocks)
                for (const auto& l : b.layers)
                    if (++seen == flat) channels = l.num_filters;
            if (step.block == static_cast<int>(arch.conv_blocks.size()))
                arch.conv_blocks.push_back(ConvBlockSpec{{}, false});
            auto& layers = arch.conv_blocks[static_cast<std::size_t>(step.block)].layers;
            layers.insert(layers.begin() + step.position, ConvLayerSpec{1, channels, 0});
        }
        break;
    case TransformKind::deepen_residual_at: {
        const int width = dense_input_width(arch, step.position);
        const Activation act =
            step.position >= 1
                ? arch.dense_layers[static_cast<std::size_t>(step.position - 1)].activation
                : Activation::relu;
        arch.dense_layers.insert(arch.dense_layers.begin() + step.position,
                                 DenseLayerSpec{width, act, true});
        break;
    }
    case TransformKind::widen_layer:
        if (step.block < 0) {
            auto& layers = arch.dense_layers;
            const int old = layers[static_cast<std::size_t>(step.position)].units;
            check_map(step.replication_map, old, step.new_units);
            layers[static_cast<std::size_t>(step.position)].units = step.new_units;
            for (int r = step.position + 1; layers[static_cast<std::size_t>(r)].residual; ++r)
                layers[static_cast<std::size_t>(r)].units = step.new_units;
        } else {
            ConvLayerSpec& spec = conv_layer_at(arch, step.block, step.position);
            check_map(step.replication_map, spec.num_filters, step.new_units);
            spec.num_filters = step.new_units;
        }
        break;
    case TransformKind::enlarge_filter: {
        ConvLayerSpec& spec = conv_layer_at(arch, step.block, step.position);
        if (step.new_size % 2 == 0 || step.new_size <= spec.filter_size)
            throw EvenEnlargement("invalid filter enlargement");
        spec.input_padding += (step.new_size - spec.filter_size) / 2;
        spec.filter_size = step.new_size;
        break;
    }
    }
}

namespace {

WeightedNetwork apply_step(const WeightedNetwork& net, const TransformStep& step) {
    switch (step.kind) {
    case TransformKind::deepen_at:
        return step.block < 0 ? deepen(net, step.position)
                              : deepen_conv(net, step.block, step.position);
    case TransformKind::deepen_residual_at: return deepen_residual(net, step.position);
    case TransformKind::widen_layer:
        return widen(net, step.block, step.position, step.new_units, step.replication_map);
    case TransformKind::enlarge_filter:
        return enlarge_filter(net, step.block, step.position, step.new_size);
    }
    throw InvalidArch("unknown transform step");
}

std::vector<int> draw_map(int old_units, int new_units, Rng& rng) {
    std::vector<int> map(static_cast<std::size_t>(new_units));
    for (int i = 0; i < old_units; ++i) map[static_cast<std::size_t>(i)] = i;
    std::uniform_int_distribution<int> pick(0, old_units - 1);
    for (int i = old_units; i < new_units; ++i) map[static_cast<std::size_t>(i)] = pick(rng);
    return map;
}

} // namespace

HatchPlan plan_hatch(const NetworkArch& mother, const NetworkArch& target, std::uint64_t seed) {
    validate(mother);
    validate(target);
    if (mother.kind != target.kind) throw UnhatchableSpec("mother and target differ in kind");
    if (!(mother.input_shape == target.input_shape))
        throw UnhatchableSpec("mother and target differ in input shape");
    if (!(mother.dense_layers.back() == target.dense_layers.back()))
        throw UnhatchableSpec("mother and target differ in output layer");

    HatchPlan plan;
    plan.source = mother;
    plan.target = target;
    NetworkArch work = mother;
    Rng rng(seed);

    auto emit = [&](TransformStep step) {
        apply_step_shape(work, step);
        plan.steps.push_back(std::move(step));
    };

    // conv deepens: per matched block append missing layers; whole extra
    // blocks afterwards (pooled extra blocks cannot be grown in place)
    if (mother.kind == ArchKind::conv) {
        if (mother.conv_blocks.size() > target.conv_blocks.size())
            throw UnhatchableSpec("target has fewer conv blocks than the mother");
        for (std::size_t b = 0; b < target.conv_blocks.size(); ++b) {
            const auto& tb = target.conv_blocks[b];
            const bool matched = b < mother.conv_blocks.size();
            const std::size_t have = matched ? mother.conv_blocks[b].layers.size() : 0;
            if (matched && mother.conv_blocks[b].followed_by_pool != tb.followed_by_pool)
                throw UnhatchableSpec("pooling disagreement in block " + std::to_string(b));
            if (!matched && tb.followed_by_pool)
                throw UnhatchableSpec("cannot grow a pooled block beyond the mother");
            if (have > tb.layers.size())
                throw UnhatchableSpec("target block shallower than the mother's");
            for (std::size_t i = have; i < tb.layers.size(); ++i) {
                TransformStep step;
                step.kind = TransformKind::deepen_at;
                step.block = static_cast<int>(b);
                step.position = static_cast<int>(i);
                emit(std::move(step));
            }
        }
    }

    // dense deepens for the target's extra hidden layers
    {
        const std::size_t dm = hidden_count(mother), dt = hidden_count(target);
        if (dm > dt) throw UnhatchableSpec("target shallower than the mother");
        for (std::size_t i = 0; i < dm; ++i) {
            const auto& ml = mother.dense_layers[i];
            const auto& tl = target.dense_layers[i];
            if (ml.activation != tl.activation || ml.residual != tl.residual)
                throw UnhatchableSpec("layer flags disagree at hidden position " +
                                      std::to_string(i));
            if (tl.units < ml.units)
                throw UnhatchableSpec("target narrower than the mother at position " +
                                      std::to_string(i));
        }
        for (std::size_t i = dm; i < dt; ++i) {
            TransformStep step;
            step.kind = target.dense_layers[i].residual ? TransformKind::deepen_residual_at
                                                        : TransformKind::deepen_at;
            step.block = -1;
            step.position = static_cast<int>(i);
            emit(std::move(step));
            if (work.dense_layers[i].activation != target.dense_layers[i].activation)
                throw UnhatchableSpec("inserted layer activation cannot match the target at "
                                      "position " +
                                      std::to_string(i));
        }
    }

    // widens, input to output: conv filters first, then dense units
    for (std::size_t b = 0; b < work.conv_blocks.size(); ++b)
        for (std::size_t i = 0; i < work.conv_blocks[b].layers.size(); ++i) {
            const int have = work.conv_blocks[b].layers[i].num_filters;
            const int want = target.conv_blocks[b].layers[i].num_filters;
            if (want < have) throw UnhatchableSpec("target conv layer has fewer filters");
            if (want == have) continue;
            TransformStep step;
            step.kind = TransformKind::widen_layer;
            step.block = static_cast<int>(b);
            step.position = static_cast<int>(i);
            step.new_units = want;
            step.replication_map = draw_map(have, want, rng);
            emit(std::move(step));
        }
    for (std::size_t i = 0; i < hidden_count(work); ++i) {
        if (work.dense_layers[i].residual) continue; // follows its predecessor
        const int have = work.dense_layers[i].units;
        const int want = target.dense_layers[i].units;
        if (want < have) throw UnhatchableSpec("target dense layer narrower than reachable");
        if (want == have) continue;
        TransformStep step;
        step.kind = TransformKind::widen_layer;
        step.block = -1;
        step.position = static_cast<int>(i);
        step.new_units = want;
        step.replication_map = draw_map(have, want, rng);
        emit(std::move(step));
    }

    // filter enlargements last; padding must keep output dimensions intact
    for (std::size_t b = 0; b < work.conv_blocks.size(); ++b)
        for (std::size_t i = 0; i < work.conv_blocks[b].layers.size(); ++i) {
            const auto& have = work.conv_blocks[b].layers[i];
            const auto& want = target.conv_blocks[b].layers[i];
            if (want.filter_size < have.filter_size)
                throw UnhatchableSpec("target filter smaller than the mother's");
            if (want.filter_size == have.filter_size) {
                if (want.input_padding != have.input_padding)
                    throw UnhatchableSpec("padding disagreement without enlargement");
                continue;
            }
            const int pad = (want.filter_size - have.filter_size) / 2;
            if (want.input_padding != have.input_padding + pad)
                throw UnhatchableSpec("target padding does not preserve output dimensions");
            TransformStep step;
            step.kind = TransformKind::enlarge_filter;
            step.block = static_cast<int>(b);
            step.position = static_cast<int>(i);
            step.new_size = want.filter_size;
            emit(std::move(step));
        }

    if (!(work == target)) throw UnhatchableSpec("plan replay does not reach the target");
    return plan;
}

WeightedNetwork hatch(const WeightedNetwork& mother_trained, const HatchPlan& plan) {
    if (!(mother_trained.arch == plan.source))
        throw UnhatchableSpec("plan source does not match the trained MotherNet");
    WeightedNetwork net = mother_trained;
    net.provenance.clear();
    for (const auto& t : net.weights)
        net.provenance.emplace_back(t.size(), prov_mothernet_origin);
    for (const auto& step : plan.steps) net = apply_step(net, step);
    if (!(net.arch == plan.target)) throw UnhatchableSpec("hatch did not reach the plan target");
    return net;
}

} // namespace mothernets
