#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mothernets/network.hpp"

namespace mothernets {

enum class TransformKind { deepen_at, widen_layer, enlarge_filter, deepen_residual_at };

std::string to_string(TransformKind k);
TransformKind transform_kind_from_string(const std::string& s);

// Addressing: dense layers use block = -1 and position = dense layer index;
// conv layers use (block, position) within the block. deepen_at with
// block == current block count appends a new pool-free block.
struct TransformStep {
    TransformKind kind = TransformKind::deepen_at;
    int block = -1;
    int position = 0;
    int new_units = 0; // widen: new unit/filter count
    // widen: new index -> source index; the first old-count entries map to
    // themselves, the rest replicate existing units.
    std::vector<int> replication_map;
    int new_size = 0; // enlarge_filter: new (odd) filter size

    friend bool operator==(const TransformStep&, const TransformStep&) = default;
};

struct HatchPlan {
    std::vector<TransformStep> steps;
    NetworkArch source;
    NetworkArch target;
};

// Deterministic transform sequence turning `mother` into `target`: deepens
// (per block for conv), widens input-to-output (replication sources drawn
// with replacement from `seed`), then filter enlargements. Throws
// UnhatchableSpec when the target cannot be reached by growth-only steps.
HatchPlan plan_hatch(const NetworkArch& mother, const NetworkArch& target, std::uint64_t seed);

// Insert an identity layer at dense index `position` (the existing layer at
// position-1 is followed by an exact identity). The inserted layer copies
// the preceding layer's activation; relu insertion requires a provably
// nonnegative input (throws ActivationNotIdempotent otherwise).
WeightedNetwork deepen(const WeightedNetwork& net, int position);

// Conv variant: insert a 1x1 identity convolution at (block, position).
WeightedNetwork deepen_conv(const WeightedNetwork& net, int block, int position);

// Insert a residual block y = x + F(x) with F all-zero at dense index
// `position`; exactly function-preserving.
WeightedNetwork deepen_residual(const WeightedNetwork& net, int position);

// Widen dense layer `position` (block = -1) or conv layer (block, position)
// to new_units by replicating columns/filters per replication_map; downstream
// weights are divided by each source's replication count. Consecutive
// residual successors of a widened dense layer are widened along with it.
WeightedNetwork widen(const WeightedNetwork& net, int block, int position, int new_units,
                      const std::vector<int>& replication_map);

// Zero-pad the addressed conv layer's filters to new_size and raise its
// input padding to match; output shape and values are unchanged.
WeightedNetwork enlarge_filter(const WeightedNetwork& net, int block, int layer, int new_size);

enum class PerturbScope { new_params_only, all_params };

// Add i.i.d. N(0, sigma^2) noise to in-scope parameters. new_params_only
// requires provenance marks (MissingProvenance otherwise).
WeightedNetwork perturb(const WeightedNetwork& net, double sigma, std::uint64_t seed,
                        PerturbScope scope);

// Apply a full plan to a trained MotherNet. The result carries provenance
// marks and satisfies forward-equality with the mother.
WeightedNetwork hatch(const WeightedNetwork& mother_trained, const HatchPlan& plan);

// Shape-level replay of a step; used for plan verification and serialization
// checks.
void apply_step_shape(NetworkArch& arch, const TransformStep& step);

} // namespace mothernets
