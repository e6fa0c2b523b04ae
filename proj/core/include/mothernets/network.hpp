#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mothernets/archspec.hpp"
#include "mothernets/tensor.hpp"

namespace mothernets {

// Parameter provenance after hatching.
enum : std::uint8_t { prov_mothernet_origin = 0, prov_introduced = 1 };

struct WeightedNetwork {
    NetworkArch arch;
    // Per conv layer: filter bank (num_filters, in_channels, f, f) + bias
    // (num_filters); then per dense layer: weight matrix (out, in) + bias
    // (out). Order follows the arch.
    std::vector<Tensor> weights;
    // Parallel to weights, one mark per scalar; empty when the network was
    // not produced by hatching.
    std::vector<std::vector<std::uint8_t>> provenance;
    std::uint64_t rng_seed = 0;
};

struct Dataset {
    Tensor features; // dense: (n, features); conv: (n, channels, height, width)
    std::vector<int> labels;
    int num_classes = 0;
};

void validate_dataset(const Dataset& data);

struct TrainConfig {
    int batch_size = 32;
    double learning_rate = 0.1;
    int max_epochs = 100;
    // epochs without train-accuracy improvement before stopping
    int patience = 15;
    std::uint64_t shuffle_seed = 0;
};

struct TrainLog {
    std::vector<double> loss;     // per epoch, mean cross-entropy on train set
    std::vector<double> accuracy; // per epoch, train accuracy
    int epochs = 0;
};

// Index of dense layer `i`'s weight tensor inside WeightedNetwork::weights
// (its bias follows at +1).
std::size_t dense_weight_index(const NetworkArch& arch, std::size_t i);

// Standard-normal weights scaled by 1/sqrt(fan_in) (pass scale_by_fan_in =
// false for the unscaled variant), zero biases. Deterministic per seed.
WeightedNetwork init_network(const NetworkArch& arch, std::uint64_t seed,
                             bool scale_by_fan_in = true);

// Class probabilities, shape (n, num_classes). Accepts a single example
// (rank 1 dense / rank 3 conv) or a batch. Throws ShapeMismatch or
// NonFiniteValue.
Tensor forward(const WeightedNetwork& net, const Tensor& x);

// Gradient of mean cross-entropy over the batch, one tensor per parameter
// tensor. Dense networks only (ConvTrainingUnsupported otherwise).
std::vector<Tensor> gradients(const WeightedNetwork& net, const Dataset& batch);

// Plain SGD with per-epoch shuffling and train-accuracy early stopping.
std::pair<WeightedNetwork, TrainLog> train(const WeightedNetwork& net, const Dataset& data,
                                           const TrainConfig& cfg);

// Argmax accuracy; ties break toward the lower class index.
double evaluate(const WeightedNetwork& net, const Dataset& data);

// Mean cross-entropy of predicted probabilities against labels.
double cross_entropy(const Tensor& probs, const std::vector<int>& labels);

} // namespace mothernets
