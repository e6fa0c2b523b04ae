#include "mothernets/clustering.hpp"

#include <algorithm>
#include <climits>
#include <numeric>

#include "mothernets/rng.hpp"

namespace mothernets {

std::string to_string(ClusterStrategy s) {
    return s == ClusterStrategy::kmeans_g ? "kmeans_g" : "greedy_tau";
}

ClusterStrategy cluster_strategy_from_string(const std::string& s) {
    if (s == "kmeans_g") return ClusterStrategy::kmeans_g;
    if (s == "greedy_tau") return ClusterStrategy::greedy_tau;
    throw ParseError("unknown cluster strategy '" + s + "'");
}

namespace {

EnsembleSpec subset(const EnsembleSpec& ensemble, const std::vector<std::size_t>& idx) {
    EnsembleSpec sub;
    for (std::size_t i : idx) {
        sub.members.push_back(ensemble.members[i]);
        sub.names.push_back(ensemble.names[i]);
    }
    return sub;
}

// Members sorted ascending by param_count; equal sizes are ordered by a
// seed-derived key so the tie-break is deterministic yet seedable.
std::vector<std::size_t> sorted_order(const EnsembleSpec& ensemble, std::uint64_t seed) {
    std::vector<std::size_t> order(ensemble.members.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::int64_t> size(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) size[i] = param_count(ensemble.members[i]);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (size[a] != size[b]) return size[a] < size[b];
        return derive_seed(seed, ensemble.names[a]) < derive_seed(seed, ensemble.names[b]);
    });
    return order;
}

// Edit distances of every member to every cluster MotherNet, computed under
// one joint vectorization so padding lengths are consistent.
std::vector<std::vector<int>> distance_matrix(const EnsembleSpec& ensemble,
                                              const std::vector<NetworkArch>& mothers) {
    EnsembleSpec joint = ensemble;
    for (std::size_t c = 0; c < mothers.size(); ++c) {
        joint.members.push_back(mothers[c]);
        joint.names.push_back("\x01m" + std::to_string(c));
    }
    const auto vectors = vectorize(joint);
    const std::size_t n = ensemble.members.size();
    std::vector<std::vector<int>> dist(n, std::vector<int>(mothers.size()));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < mothers.size(); ++c)
            dist[i][c] = edit_distance(vectors[i], vectors[n + c]);
    return dist;
}

std::int64_t total_distance(const std::vector<int>& assignment,
                            const std::vector<std::vector<int>>& dist) {
    std::int64_t total = 0;
    for (std::size_t i = 0; i < assignment.size(); ++i) total += dist[i][assignment[i]];
    return total;
}

// Capacity-constrained assignment: members placed in descending order of how
// much their best cluster beats their second-best, each into the nearest
// cluster with room. Sizes stay within floor(n/g)..ceil(n/g) and only
// n mod g clusters may reach the ceiling.
std::vector<int> balanced_assign(const std::vector<std::vector<int>>& dist, int g,
                                 const std::vector<std::size_t>& tie_order) {
    const std::size_t n = dist.size();
    const std::size_t lo = n / static_cast<std::size_t>(g);
    std::size_t extras = n % static_cast<std::size_t>(g);

    std::vector<std::size_t> members(n);
    std::iota(members.begin(), members.end(), 0);
    std::vector<int> margin(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        int best = dist[i][0], second = INT_MAX;
        for (int c = 1; c < g; ++c) {
            if (dist[i][c] < best) {
                second = best;
                best = dist[i][c];
            } else {
                second = std::min(second, dist[i][c]);
            }
        }
        margin[i] = (g == 1) ? 0 : second - best;
    }
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
        if (margin[a] != margin[b]) return margin[a] > margin[b];
        return tie_order[a] < tie_order[b];
    });

    std::vector<int> assignment(n, -1);
    std::vector<std::size_t> count(static_cast<std::size_t>(g), 0);
    for (std::size_t i : members) {
        int pick = -1;
        for (int c = 0; c < g; ++c) {
            const auto& cnt = count[static_cast<std::size_t>(c)];
            const bool open = cnt < lo || (cnt == lo && extras > 0);
            if (open && (pick < 0 || dist[i][c] < dist[i][pick])) pick = c;
        }
        if (count[static_cast<std::size_t>(pick)] == lo) --extras;
        ++count[static_cast<std::size_t>(pick)];
        assignment[i] = pick;
    }
    return assignment;
}

// First-improvement pairwise swaps; sizes are untouched so balance holds.
void swap_refine(std::vector<int>& assignment, const std::vector<std::vector<int>>& dist) {
    const std::size_t n = assignment.size();
    bool improved = true;
    while (improved) {
        improved = false;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const int ci = assignment[i], cj = assignment[j];
                if (ci == cj) continue;
                if (dist[i][cj] + dist[j][ci] < dist[i][ci] + dist[j][cj]) {
                    assignment[i] = cj;
                    assignment[j] = ci;
                    improved = true;
                }
            }
        }
    }
}

std::vector<std::vector<std::size_t>> group(const std::vector<int>& assignment, int g) {
    std::vector<std::vector<std::size_t>> idx(static_cast<std::size_t>(g));
    for (std::size_t i = 0; i < assignment.size(); ++i)
        idx[static_cast<std::size_t>(assignment[i])].push_back(i);
    return idx;
}

ClusterPlan finalize(const EnsembleSpec& ensemble, ClusterStrategy strategy,
                     const std::vector<std::vector<std::size_t>>& groups, std::int64_t objective) {
    ClusterPlan plan;
    plan.strategy = strategy;
    plan.objective = objective;
    for (const auto& idx : groups) {
        const EnsembleSpec sub = subset(ensemble, idx);
        plan.clusters.push_back(Cluster{sub.names, build_mothernet(sub)});
    }
    return plan;
}

} // namespace

ClusterPlan cluster_kmeans(const EnsembleSpec& ensemble, int g, int max_iters,
                           std::uint64_t seed) {
    validate(ensemble);
    const std::size_t n = ensemble.members.size();
    if (g < 1 || static_cast<std::size_t>(g) > n)
        throw InvalidG("g must be in [1, ensemble size], got " + std::to_string(g));
    if (max_iters < 1) throw InvalidG("max_iters must be positive");

    const auto order = sorted_order(ensemble, seed);
    std::vector<std::size_t> tie_order(n); // member index -> rank in sorted order
    for (std::size_t r = 0; r < n; ++r) tie_order[order[r]] = r;

    // contiguous chunks of the sorted list, larger chunks first
    std::vector<int> assignment(n);
    {
        const std::size_t lo = n / static_cast<std::size_t>(g);
        std::size_t extras = n % static_cast<std::size_t>(g), pos = 0;
        for (int c = 0; c < g; ++c) {
            std::size_t take = lo + (extras > 0 ? 1 : 0);
            if (extras > 0) --extras;
            for (std::size_t k = 0; k < take; ++k) assignment[order[pos++]] = c;
        }
    }

    std::int64_t best_total = -1;
    for (int iter = 0; iter < max_iters; ++iter) {
        std::vector<NetworkArch> mothers;
        for (const auto& idx : group(assignment, g))
            mothers.push_back(build_mothernet(subset(ensemble, idx)).arch);
        const auto dist = distance_matrix(ensemble, mothers);

        if (best_total < 0) best_total = total_distance(assignment, dist);

        std::vector<int> next = balanced_assign(dist, g, tie_order);
        swap_refine(next, dist);
        const std::int64_t next_total = total_distance(next, dist);
        if (next == assignment) break;
        if (next_total > best_total) break; // reject worsening reassignment
        assignment = std::move(next);
        best_total = next_total;
    }

    // Exact polish: the iteration above scores moves against fixed MotherNets,
    // a surrogate that leaves shallow local minima. Rescore first-improvement
    // swaps (and relocations that hand a ceiling slot to another cluster)
    // against the true objective with rebuilt MotherNets.
    auto objective_of = [&](const std::vector<int>& asg) {
        std::vector<NetworkArch> mothers;
        for (const auto& idx : group(asg, g))
            mothers.push_back(build_mothernet(subset(ensemble, idx)).arch);
        return total_distance(asg, distance_matrix(ensemble, mothers));
    };
    std::int64_t current = objective_of(assignment);
    bool improved = g > 1;
    while (improved) {
        improved = false;
        for (std::size_t i = 0; i < n && !improved; ++i) {
            for (std::size_t j = i + 1; j < n && !improved; ++j) {
                if (assignment[i] == assignment[j]) continue;
                std::vector<int> candidate = assignment;
                std::swap(candidate[i], candidate[j]);
                const std::int64_t total = objective_of(candidate);
                if (total < current) {
                    assignment = std::move(candidate);
                    current = total;
                    improved = true;
                }
            }
        }
        if (improved || n % static_cast<std::size_t>(g) == 0) continue;
        std::vector<std::size_t> count(static_cast<std::size_t>(g), 0);
        for (int c : assignment) ++count[static_cast<std::size_t>(c)];
        const std::size_t lo = n / static_cast<std::size_t>(g);
        for (std::size_t i = 0; i < n && !improved; ++i) {
            if (count[static_cast<std::size_t>(assignment[i])] == lo) continue;
            for (int c = 0; c < g && !improved; ++c) {
                if (c == assignment[i] || count[static_cast<std::size_t>(c)] != lo) continue;
                std::vector<int> candidate = assignment;
                candidate[i] = c;
                const std::int64_t total = objective_of(candidate);
                if (total < current) {
                    assignment = std::move(candidate);
                    current = total;
                    improved = true;
                }
            }
        }
    }

    // objective: total distance to the final clusters' MotherNets
    std::vector<NetworkArch> mothers;
    const auto groups = group(assignment, g);
    for (const auto& idx : groups) mothers.push_back(build_mothernet(subset(ensemble, idx)).arch);
    const auto dist = distance_matrix(ensemble, mothers);
    return finalize(ensemble, ClusterStrategy::kmeans_g, groups, total_distance(assignment, dist));
}

ClusterPlan cluster_greedy_tau(const EnsembleSpec& ensemble, double tau) {
    validate(ensemble);
    if (!(tau > 0.0 && tau <= 1.0))
        throw InvalidTau("tau must be in (0, 1], got " + std::to_string(tau));

    const auto order = sorted_order(ensemble, /*seed=*/0);
    auto feasible = [&](const std::vector<std::size_t>& idx) {
        const EnsembleSpec sub = subset(ensemble, idx);
        const std::int64_t mother_size = param_count(build_mothernet(sub).arch);
        for (const auto& m : sub.members) {
            const double size = static_cast<double>(param_count(m));
            if (!(size - static_cast<double>(mother_size) < tau * size)) return false;
        }
        return true;
    };

    std::vector<std::vector<std::size_t>> groups;
    std::vector<std::size_t> open;
    for (std::size_t i : order) {
        std::vector<std::size_t> candidate = open;
        candidate.push_back(i);
        if (open.empty() || feasible(candidate)) {
            open = std::move(candidate);
        } else {
            groups.push_back(std::move(open));
            open = {i};
        }
    }
    groups.push_back(std::move(open));
    return finalize(ensemble, ClusterStrategy::greedy_tau, groups,
                    static_cast<std::int64_t>(groups.size()));
}

} // namespace mothernets
