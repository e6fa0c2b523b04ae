#include "mothernets/archspec.hpp"

#include <algorithm>
#include <set>

namespace mothernets {

std::string to_string(Activation a) {
    switch (a) {
    case Activation::relu: return "relu";
    case Activation::linear: return "linear";
    case Activation::softmax_output: return "softmax-output";
    }
    throw InvalidArch("unknown activation");
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "linear") return Activation::linear;
    if (s == "softmax-output") return Activation::softmax_output;
    throw ParseError("unknown activation '" + s + "'");
}

void validate(const NetworkArch& arch) {
    if (arch.dense_layers.empty())
        throw InvalidArch("network needs at least the output layer");
    if (arch.kind == ArchKind::dense) {
        if (!arch.conv_blocks.empty())
            throw InvalidArch("dense network must not have conv blocks");
        if (arch.input_shape.features < 1)
            throw InvalidArch("dense input needs features >= 1");
    } else {
        if (arch.input_shape.height < 1 || arch.input_shape.width < 1 ||
            arch.input_shape.channels < 1)
            throw InvalidArch("conv input needs positive height/width/channels");
        if (arch.conv_blocks.empty())
            throw InvalidArch("conv network needs at least one block");
        for (const auto& block : arch.conv_blocks) {
            if (block.layers.empty())
                throw InvalidArch("conv block must be nonempty");
            for (const auto& layer : block.layers) {
                if (layer.num_filters < 1)
                    throw InvalidArch("num_filters must be >= 1");
                if (layer.filter_size < 1 || layer.filter_size % 2 == 0)
                    throw InvalidArch("filter_size must be odd and >= 1");
                if (layer.input_padding < 0)
                    throw InvalidArch("input_padding must be >= 0");
            }
        }
        // conv layers must leave positive spatial dims all the way through
        FeatureShape fs = conv_output_shape(arch);
        if (fs.height < 1 || fs.width < 1)
            throw InvalidArch("conv stack shrinks input to nothing");
    }
    const std::size_t n = arch.dense_layers.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& layer = arch.dense_layers[i];
        if (layer.units < 1)
            throw InvalidArch("layer units must be >= 1");
        const bool is_output = (i + 1 == n);
        if (is_output) {
            if (layer.activation != Activation::softmax_output)
                throw InvalidArch("output layer must be softmax-output");
            if (layer.residual)
                throw InvalidArch("output layer cannot be residual");
        } else if (layer.activation == Activation::softmax_output) {
            throw InvalidArch("softmax-output only allowed on the final layer");
        }
        if (layer.residual && layer.units != dense_input_width(arch, static_cast<int>(i)))
            throw InvalidArch("residual layer units must equal its input width");
    }
}

void validate(const EnsembleSpec& ensemble) {
    if (ensemble.members.empty())
        throw InvalidArch("ensemble must be nonempty");
    if (ensemble.names.size() != ensemble.members.size())
        throw InvalidArch("names must parallel members");
    std::set<std::string> seen(ensemble.names.begin(), ensemble.names.end());
    if (seen.size() != ensemble.names.size())
        throw InvalidArch("member names must be unique");
    const auto& first = ensemble.members.front();
    for (const auto& m : ensemble.members) {
        validate(m);
        if (m.kind != first.kind)
            throw HeterogeneousKind("ensemble mixes dense and conv members");
        if (!(m.input_shape == first.input_shape))
            throw InvalidArch("members must share input shape");
        if (!(m.dense_layers.back() == first.dense_layers.back()))
            throw InvalidArch("members must share the output layer");
    }
}

std::vector<ArchVector> vectorize(const EnsembleSpec& ensemble) {
    validate(ensemble);
    const auto kind = ensemble.members.front().kind;
    std::vector<ArchVector> out(ensemble.members.size());

    auto hidden_count = [](const NetworkArch& a) {
        return a.dense_layers.size() - 1; // exclude the shared output layer
    };

    if (kind == ArchKind::dense) {
        std::size_t depth = 0;
        for (const auto& m : ensemble.members) depth = std::max(depth, hidden_count(m));
        for (std::size_t i = 0; i < ensemble.members.size(); ++i) {
            const auto& m = ensemble.members[i];
            out[i].kind = ArchKind::dense;
            out[i].entries.resize(depth, VectorEntry{false, 0, 0});
            for (std::size_t j = 0; j < hidden_count(m); ++j)
                out[i].entries[j] = VectorEntry{false, m.dense_layers[j].units, 0};
        }
        return out;
    }

    // conv: per-block sub-vectors zero-padded to the block's maximum depth
    std::size_t num_blocks = 0;
    for (const auto& m : ensemble.members)
        num_blocks = std::max(num_blocks, m.conv_blocks.size());
    std::vector<std::size_t> block_depth(num_blocks, 0);
    std::size_t tail_depth = 0;
    for (const auto& m : ensemble.members) {
        for (std::size_t b = 0; b < m.conv_blocks.size(); ++b)
            block_depth[b] = std::max(block_depth[b], m.conv_blocks[b].layers.size());
        tail_depth = std::max(tail_depth, hidden_count(m));
    }
    for (std::size_t i = 0; i < ensemble.members.size(); ++i) {
        const auto& m = ensemble.members[i];
        auto& vec = out[i];
        vec.kind = ArchKind::conv;
        for (std::size_t b = 0; b < num_blocks; ++b) {
            for (std::size_t j = 0; j < block_depth[b]; ++j) {
                VectorEntry e{true, 0, 0};
                if (b < m.conv_blocks.size() && j < m.conv_blocks[b].layers.size()) {
                    const auto& layer = m.conv_blocks[b].layers[j];
                    e.a = layer.filter_size;
                    e.b = layer.num_filters;
                }
                vec.entries.push_back(e);
            }
        }
        for (std::size_t j = 0; j < tail_depth; ++j) {
            VectorEntry e{false, 0, 0};
            if (j < hidden_count(m)) e.a = m.dense_layers[j].units;
            vec.entries.push_back(e);
        }
    }
    return out;
}

int edit_distance(const ArchVector& a, const ArchVector& b) {
    if (a.kind != b.kind)
        throw MixedEntryKind("cannot compare dense and conv arch vectors");
    const std::size_t n = a.entries.size();
    const std::size_t m = b.entries.size();
    std::vector<int> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = static_cast<int>(i);
        for (std::size_t j = 1; j <= m; ++j) {
            const int sub = prev[j - 1] + (a.entries[i - 1] == b.entries[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

FeatureShape conv_output_shape(const NetworkArch& arch) {
    FeatureShape fs;
    if (arch.kind == ArchKind::dense) {
        fs.flat = arch.input_shape.features;
        return fs;
    }
    fs.height = arch.input_shape.height;
    fs.width = arch.input_shape.width;
    fs.channels = arch.input_shape.channels;
    for (const auto& block : arch.conv_blocks) {
        for (const auto& layer : block.layers) {
            fs.height = fs.height + 2 * layer.input_padding - layer.filter_size + 1;
            fs.width = fs.width + 2 * layer.input_padding - layer.filter_size + 1;
            fs.channels = layer.num_filters;
        }
        if (block.followed_by_pool) {
            fs.height /= 2;
            fs.width /= 2;
        }
    }
    fs.flat = fs.height * fs.width * fs.channels;
    return fs;
}

int dense_input_width(const NetworkArch& arch, int layer_index) {
    if (layer_index == 0) return conv_output_shape(arch).flat;
    return arch.dense_layers[static_cast<std::size_t>(layer_index) - 1].units;
}

std::int64_t param_count(const NetworkArch& arch) {
    std::int64_t total = 0;
    int channels = arch.input_shape.channels;
    for (const auto& block : arch.conv_blocks) {
        for (const auto& layer : block.layers) {
            const std::int64_t f = layer.filter_size;
            total += f * f * channels * layer.num_filters + layer.num_filters;
            channels = layer.num_filters;
        }
    }
    int in = conv_output_shape(arch).flat;
    for (const auto& layer : arch.dense_layers) {
        total += static_cast<std::int64_t>(in) * layer.units + layer.units;
        in = layer.units;
    }
    return total;
}

} // namespace mothernets
