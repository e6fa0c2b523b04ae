#include "mothernets/mothernet.hpp"

#include <algorithm>
#include <limits>

namespace mothernets {

namespace {

// Per-position minimum over members' hidden dense layers, depth of the
// shallowest member; the shared output layer is appended by the caller.
std::vector<DenseLayerSpec> min_dense_layers(const EnsembleSpec& cluster) {
    std::size_t depth = std::numeric_limits<std::size_t>::max();
    for (const auto& m : cluster.members)
        depth = std::min(depth, m.dense_layers.size() - 1);
    std::vector<DenseLayerSpec> out(depth);
    for (std::size_t i = 0; i < depth; ++i) {
        DenseLayerSpec layer = cluster.members.front().dense_layers[i];
        for (const auto& m : cluster.members) {
            const auto& l = m.dense_layers[i];
            if (l.activation != layer.activation)
                throw InvalidArch("members disagree on activation at hidden position " +
                                  std::to_string(i));
            layer.units = std::min(layer.units, l.units);
            layer.residual = layer.residual && l.residual;
        }
        out[i] = layer;
    }
    return out;
}

std::map<std::string, int> edit_report(const EnsembleSpec& cluster, const NetworkArch& mother) {
    EnsembleSpec joint = cluster;
    joint.members.push_back(mother);
    joint.names.push_back("\x01mothernet"); // placeholder, never collides
    const auto vectors = vectorize(joint);
    const auto& mv = vectors.back();
    std::map<std::string, int> report;
    for (std::size_t i = 0; i < cluster.members.size(); ++i)
        report[cluster.names[i]] = edit_distance(vectors[i], mv);
    return report;
}

} // namespace

MotherNetResult build_fc(const EnsembleSpec& cluster) {
    if (cluster.members.empty()) throw EmptyCluster("build_fc on empty cluster");
    validate(cluster);
    if (cluster.members.front().kind != ArchKind::dense)
        throw InvalidArch("build_fc requires a dense cluster");

    NetworkArch mother;
    mother.kind = ArchKind::dense;
    mother.input_shape = cluster.members.front().input_shape;
    mother.dense_layers = min_dense_layers(cluster);
    mother.dense_layers.push_back(cluster.members.front().dense_layers.back());
    validate(mother);
    return MotherNetResult{mother, edit_report(cluster, mother)};
}

MotherNetResult build_conv(const EnsembleSpec& cluster) {
    if (cluster.members.empty()) throw EmptyCluster("build_conv on empty cluster");
    validate(cluster);
    if (cluster.members.front().kind != ArchKind::conv)
        throw InvalidArch("build_conv requires a conv cluster");

    NetworkArch mother;
    mother.kind = ArchKind::conv;
    mother.input_shape = cluster.members.front().input_shape;

    std::size_t num_blocks = std::numeric_limits<std::size_t>::max();
    for (const auto& m : cluster.members)
        num_blocks = std::min(num_blocks, m.conv_blocks.size());

    for (std::size_t b = 0; b < num_blocks; ++b) {
        std::size_t depth = std::numeric_limits<std::size_t>::max();
        for (const auto& m : cluster.members)
            depth = std::min(depth, m.conv_blocks[b].layers.size());
        ConvBlockSpec block;
        block.followed_by_pool = cluster.members.front().conv_blocks[b].followed_by_pool;
        for (const auto& m : cluster.members)
            if (m.conv_blocks[b].followed_by_pool != block.followed_by_pool)
                throw InvalidArch("members disagree on pooling after block " + std::to_string(b));
        for (std::size_t i = 0; i < depth; ++i) {
            ConvLayerSpec layer = cluster.members.front().conv_blocks[b].layers[i];
            for (const auto& m : cluster.members) {
                const auto& l = m.conv_blocks[b].layers[i];
                layer.filter_size = std::min(layer.filter_size, l.filter_size);
                layer.num_filters = std::min(layer.num_filters, l.num_filters);
                layer.input_padding = std::min(layer.input_padding, l.input_padding);
            }
            block.layers.push_back(layer);
        }
        mother.conv_blocks.push_back(std::move(block));
    }

    mother.dense_layers = min_dense_layers(cluster);
    mother.dense_layers.push_back(cluster.members.front().dense_layers.back());
    validate(mother);
    return MotherNetResult{mother, edit_report(cluster, mother)};
}

MotherNetResult build_mothernet(const EnsembleSpec& cluster) {
    if (cluster.members.empty()) throw EmptyCluster("empty cluster");
    return cluster.members.front().kind == ArchKind::dense ? build_fc(cluster)
                                                           : build_conv(cluster);
}

} // namespace mothernets
