#pragma once

#include <cstdint>
#include <vector>

#include "mothernets/clustering.hpp"
#include "mothernets/network.hpp"
#include "mothernets/rng.hpp"

// Independent oracles and generators for the property suites. Everything in
// here recomputes results from first principles instead of calling the code
// paths under test (except where the quantity being checked is itself defined
// in terms of library primitives, e.g. the clustering objective).
namespace testkit {

using namespace mothernets;

// --- oracles ---------------------------------------------------------------

// Minimal number of clusters over all consecutive partitions of the
// param_count-sorted ensemble satisfying the tau condition. n <= 12.
int oracle_consecutive_partitions(const EnsembleSpec& ensemble, double tau);

// Exhaustive search over balanced g-partitions; returns the minimal total
// edit distance of members to their cluster MotherNets. n <= 8, g <= 3.
std::int64_t oracle_balanced_partition_optimum(const EnsembleSpec& ensemble, int g);

// Full-matrix Levenshtein reference.
int reference_edit_distance(const ArchVector& a, const ArchVector& b);

// Max abs output difference over `trials` standard-normal inputs.
double oracle_forward_equality(const WeightedNetwork& a, const WeightedNetwork& b, int trials,
                               std::uint64_t seed);

// Central finite differences (h = 1e-5) of the mean cross-entropy.
std::vector<Tensor> finite_difference_gradients(const WeightedNetwork& net, const Dataset& batch,
                                                double h = 1e-5);

// Smallest |pre-activation| over all relu layers and batch rows (dense nets).
// Finite-difference checks resample nets whose value is near zero: at a relu
// kink the gradient is not defined and central differences measure a
// one-sided slope instead.
double min_relu_preactivation(const WeightedNetwork& net, const Dataset& batch);

// --- synthetic datasets ----------------------------------------------------

enum class Generator { blobs, spirals, random_images };

struct SyntheticSpec {
    Generator generator = Generator::blobs;
    int n = 200;
    int num_classes = 2;
    double noise = 0.1;
    std::uint64_t seed = 0;
    // random_images only
    int height = 8, width = 8, channels = 1;
};

Dataset gen(const SyntheticSpec& spec);

// --- architecture generators ------------------------------------------------

// Random valid dense arch (relu hidden layers, optional residual blocks).
NetworkArch gen_dense_arch(Rng& rng);

// Random valid conv arch (small spatial dims, odd filters, optional pooling).
NetworkArch gen_conv_arch(Rng& rng);

// A strictly-growable variant of `base`: wider layers, extra trailing layers
// and blocks, enlarged filters — always reachable by hatching from any
// MotherNet built over {base-family members}.
NetworkArch grow_arch(const NetworkArch& base, Rng& rng);

// Cluster of 2-5 grown variants of one base arch.
EnsembleSpec gen_cluster(Rng& rng, bool conv);

} // namespace testkit
