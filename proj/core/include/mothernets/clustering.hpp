#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mothernets/mothernet.hpp"

namespace mothernets {

enum class ClusterStrategy { kmeans_g, greedy_tau };

std::string to_string(ClusterStrategy s);
ClusterStrategy cluster_strategy_from_string(const std::string& s);

struct Cluster {
    std::vector<std::string> members;
    MotherNetResult mothernet;
};

struct ClusterPlan {
    ClusterStrategy strategy = ClusterStrategy::kmeans_g;
    std::vector<Cluster> clusters;
    // kmeans_g: total edit distance of members to their cluster's MotherNet;
    // greedy_tau: number of clusters.
    std::int64_t objective = 0;
};

// Balanced K-means under the arch-vector edit distance: initialize with g
// contiguous chunks of the param_count-sorted member list, then alternate
// MotherNet construction and capacity-constrained reassignment (greedy by
// distance margin plus pairwise-swap refinement) until stable. Iterations
// that would raise the total distance are rejected. Throws InvalidG unless
// 1 <= g <= |ensemble|.
ClusterPlan cluster_kmeans(const EnsembleSpec& ensemble, int g, int max_iters,
                           std::uint64_t seed);

// Minimum consecutive partition of the param_count-sorted member list such
// that every member j of each cluster satisfies
//   param_count(j) - param_count(mothernet) < tau * param_count(j).
// Throws InvalidTau unless tau is in (0, 1].
ClusterPlan cluster_greedy_tau(const EnsembleSpec& ensemble, double tau);

} // namespace mothernets
