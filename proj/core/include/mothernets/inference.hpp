#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mothernets/transforms.hpp"

namespace mothernets {

// (models, examples, classes) probability stack.
struct PredictionMatrix {
    Tensor probs;
};

PredictionMatrix collect_predictions(const std::vector<WeightedNetwork>& nets,
                                     const Dataset& data);

struct Prediction {
    std::vector<int> labels;
    double accuracy = 0.0;
};

// Mean of member probability rows, argmax (ties toward lower class index).
Prediction predict_average(const std::vector<WeightedNetwork>& nets, const Dataset& data);

// Majority vote over member argmaxes; ties toward lower class index.
Prediction predict_vote(const std::vector<WeightedNetwork>& nets, const Dataset& data);

// Fraction of examples at least one member classifies correctly.
double oracle_accuracy(const std::vector<WeightedNetwork>& nets, const Dataset& data);

// One consolidated parameter store: MotherNet-origin scalars are kept once
// in `mother`; each member keeps only its introduced scalars plus fixed
// multiplicative factors tying its origin positions to the shared store.
struct SharedMember {
    std::string name;
    HatchPlan plan;
    WeightedNetwork hatched; // provenance marks + introduced weights
    std::vector<Tensor> factors;
};

struct SharedPlan {
    WeightedNetwork mother;
    std::vector<SharedMember> members;
    std::int64_t shared_param_total = 0;
};

// Consolidate dense widen-only members hatched from `mother`. Throws
// UnsupportedTopology for conv archs or plans containing deepen / residual /
// enlarge steps.
SharedPlan build_shared(const WeightedNetwork& mother,
                        const std::vector<std::string>& names,
                        const std::vector<HatchPlan>& plans,
                        const std::vector<WeightedNetwork>& members);

// Parameter reduction factor 1 - k|M| / sum |N_i|. Requires |M| <= min |N_i|.
double chi(std::int64_t mother_size, const std::vector<std::int64_t>& member_sizes);

// Effective per-member weights reconstructed from the shared store.
WeightedNetwork shared_member_network(const SharedPlan& plan, std::size_t member);

// K probability rows per example from the consolidated store.
PredictionMatrix shared_infer(const SharedPlan& plan, const Dataset& data);

// Joint SGD: loss = mean of per-head cross-entropies; shared scalars receive
// the sum of per-head gradients, introduced scalars update per head.
SharedPlan shared_finetune(const SharedPlan& plan, const Dataset& data, const TrainConfig& cfg);

} // namespace mothernets
