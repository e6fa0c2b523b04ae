#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mothernets/errors.hpp"

namespace mothernets {

enum class Activation { relu, linear, softmax_output };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct DenseLayerSpec {
    int units = 1;
    Activation activation = Activation::relu;
    // Marks a residual-add block y = x + F(x); requires units == input width.
    bool residual = false;

    friend bool operator==(const DenseLayerSpec&, const DenseLayerSpec&) = default;
};

struct ConvLayerSpec {
    int filter_size = 3; // square, odd
    int num_filters = 1;
    // Symmetric zero padding applied to this layer's input at forward time.
    // Plain layers use 0 ("valid" convolution); the enlarge-filter transform
    // raises it so output dimensions are preserved.
    int input_padding = 0;

    friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

struct ConvBlockSpec {
    std::vector<ConvLayerSpec> layers;
    bool followed_by_pool = false; // max-pool 2x2 stride 2

    friend bool operator==(const ConvBlockSpec&, const ConvBlockSpec&) = default;
};

enum class ArchKind { dense, conv };

struct InputShape {
    // dense: features; conv: height x width x channels
    int features = 0;
    int height = 0;
    int width = 0;
    int channels = 0;

    friend bool operator==(const InputShape&, const InputShape&) = default;
};

struct NetworkArch {
    ArchKind kind = ArchKind::dense;
    InputShape input_shape;
    std::vector<ConvBlockSpec> conv_blocks; // empty for dense
    std::vector<DenseLayerSpec> dense_layers; // hidden layers + output layer

    friend bool operator==(const NetworkArch&, const NetworkArch&) = default;
};

// Validates the invariants (positive sizes, odd filters, softmax only on the
// output layer, residual width consistency). Throws InvalidArch.
void validate(const NetworkArch& arch);

struct VectorEntry {
    bool is_pair = false;
    std::int64_t a = 0; // dense units, or filter_size
    std::int64_t b = 0; // num_filters (pairs only)

    friend bool operator==(const VectorEntry&, const VectorEntry&) = default;
};

struct ArchVector {
    ArchKind kind = ArchKind::dense;
    std::vector<VectorEntry> entries;
};

struct EnsembleSpec {
    std::vector<NetworkArch> members;
    std::vector<std::string> names; // parallel, unique
};

// Throws InvalidArch / HeterogeneousKind on violated ensemble invariants.
void validate(const EnsembleSpec& ensemble);

// One vector per member, all of equal length; dense members map hidden-layer
// unit counts, conv members map (filter_size, num_filters) per layer with
// per-block zero padding, followed by the dense-tail hidden unit counts.
std::vector<ArchVector> vectorize(const EnsembleSpec& ensemble);

// Classic Levenshtein distance over entries; exact entry equality.
// Throws MixedEntryKind when the two vectors encode different arch kinds.
int edit_distance(const ArchVector& a, const ArchVector& b);

// Exact number of trainable scalars (weights + biases).
std::int64_t param_count(const NetworkArch& arch);

// Spatial output shape (height, width, channels) after all conv blocks; the
// flattened size is the dense tail's input width. Dense archs return features.
struct FeatureShape {
    int height = 0;
    int width = 0;
    int channels = 0;
    int flat = 0;
};
FeatureShape conv_output_shape(const NetworkArch& arch);

// Input width of dense layer `i` (dense chain or conv dense tail).
int dense_input_width(const NetworkArch& arch, int layer_index);

} // namespace mothernets
