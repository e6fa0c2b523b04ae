#include "mothernets/inference.hpp"

#include <algorithm>
#include <numeric>

#include "mothernets/rng.hpp"

namespace mothernets {

namespace {

double accuracy_of(const std::vector<int>& labels, const std::vector<int>& truth) {
    double correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (labels[i] == truth[i]) ++correct;
    return correct / static_cast<double>(truth.size());
}

} // namespace

PredictionMatrix collect_predictions(const std::vector<WeightedNetwork>& nets,
                                     const Dataset& data) {
    if (nets.empty()) throw InvalidArch("prediction needs at least one network");
    validate_dataset(data);
    const int n = data.features.dim(0);
    PredictionMatrix pm;
    pm.probs = Tensor({static_cast<int>(nets.size()), n, data.num_classes});
    for (std::size_t m = 0; m < nets.size(); ++m) {
        const Tensor probs = forward(nets[m], data.features);
        if (probs.dim(1) != data.num_classes)
            throw ShapeMismatch("network class count does not match the dataset");
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < data.num_classes; ++j)
                pm.probs(static_cast<int>(m), i, j) = probs(i, j);
    }
    return pm;
}

Prediction predict_average(const std::vector<WeightedNetwork>& nets, const Dataset& data) {
    const PredictionMatrix pm = collect_predictions(nets, data);
    const int k = pm.probs.dim(0), n = pm.probs.dim(1), c = pm.probs.dim(2);
    Prediction out;
    for (int i = 0; i < n; ++i) {
        int arg = 0;
        double best = -1.0;
        for (int j = 0; j < c; ++j) {
            double mean = 0;
            for (int m = 0; m < k; ++m) mean += pm.probs(m, i, j);
            mean /= k;
            if (mean > best) {
                best = mean;
                arg = j;
            }
        }
        out.labels.push_back(arg);
    }
    out.accuracy = accuracy_of(out.labels, data.labels);
    return out;
}

Prediction predict_vote(const std::vector<WeightedNetwork>& nets, const Dataset& data) {
    const PredictionMatrix pm = collect_predictions(nets, data);
    const int k = pm.probs.dim(0), n = pm.probs.dim(1), c = pm.probs.dim(2);
    Prediction out;
    for (int i = 0; i < n; ++i) {
        std::vector<int> votes(static_cast<std::size_t>(c), 0);
        for (int m = 0; m < k; ++m) {
            int arg = 0;
            for (int j = 1; j < c; ++j)
                if (pm.probs(m, i, j) > pm.probs(m, i, arg)) arg = j;
            ++votes[static_cast<std::size_t>(arg)];
        }
        int winner = 0;
        for (int j = 1; j < c; ++j)
            if (votes[static_cast<std::size_t>(j)] > votes[static_cast<std::size_t>(winner)])
                winner = j;
        out.labels.push_back(winner);
    }
    out.accuracy = accuracy_of(out.labels, data.labels);
    return out;
}

double oracle_accuracy(const std::vector<WeightedNetwork>& nets, const Dataset& data) {
    const PredictionMatrix pm = collect_predictions(nets, data);
    const int k = pm.probs.dim(0), n = pm.probs.dim(1), c = pm.probs.dim(2);
    double covered = 0;
    for (int i = 0; i < n; ++i) {
        for (int m = 0; m < k; ++m) {
            int arg = 0;
            for (int j = 1; j < c; ++j)
                if (pm.probs(m, i, j) > pm.probs(m, i, arg)) arg = j;
            if (arg == data.labels[static_cast<std::size_t>(i)]) {
                ++covered;
                break;
            }
        }
    }
    return covered / n;
}

namespace {

void require_widen_only(const HatchPlan& plan) {
    if (plan.source.kind != ArchKind::dense)
        throw UnsupportedTopology("shared plans cover dense networks only");
    for (const auto& layer : plan.target.dense_layers)
        if (layer.residual) throw UnsupportedTopology("shared plans cannot contain residual layers");
    for (const auto& step : plan.steps)
        if (step.kind != TransformKind::widen_layer)
            throw UnsupportedTopology("shared plans must be widen-only");
}

std::int64_t introduced_count(const WeightedNetwork& net) {
    if (net.provenance.empty()) throw MissingProvenance("hatched member lacks provenance marks");
    std::int64_t n = 0;
    for (const auto& marks : net.provenance)
        for (std::uint8_t m : marks) n += m == prov_introduced;
    return n;
}

std::int64_t scalar_count(const WeightedNetwork& net) {
    std::int64_t n = 0;
    for (const auto& t : net.weights) n += static_cast<std::int64_t>(t.size());
    return n;
}

} // namespace

SharedPlan build_shared(const WeightedNetwork& mother, const std::vector<std::string>& names,
                        const std::vector<HatchPlan>& plans,
                        const std::vector<WeightedNetwork>& members) {
    if (members.empty()) throw EmptyCluster("shared plan needs at least one member");
    if (names.size() != members.size() || plans.size() != members.size())
        throw InvalidArch("names, plans and members must be parallel");
    if (mother.arch.kind != ArchKind::dense)
        throw UnsupportedTopology("shared plans cover dense networks only");

    SharedPlan shared;
    shared.mother = mother;
    const std::int64_t mother_params = scalar_count(mother);
    std::int64_t total = mother_params;

    // all-ones replay isolates the widen division factors: after hatching an
    // all-ones mother, each origin position holds exactly the factor its
    // shared value is multiplied by in the member
    WeightedNetwork ones = mother;
    for (auto& t : ones.weights) std::fill(t.data.begin(), t.data.end(), 1.0);

    for (std::size_t i = 0; i < members.size(); ++i) {
        require_widen_only(plans[i]);
        if (!(plans[i].source == mother.arch))
            throw UnhatchableSpec("member plan does not start from the shared mother");
        if (!(plans[i].target == members[i].arch))
            throw UnhatchableSpec("member does not match its plan target");
        SharedMember sm;
        sm.name = names[i];
        sm.plan = plans[i];
        sm.hatched = members[i];
        sm.factors = hatch(ones, plans[i]).weights;
        total += introduced_count(sm.hatched);
        shared.members.push_back(std::move(sm));
    }
    shared.shared_param_total = total;
    return shared;
}

double chi(std::int64_t mother_size, const std::vector<std::int64_t>& member_sizes) {
    if (member_sizes.empty()) throw EmptyCluster("chi needs at least one member size");
    std::int64_t sum = 0;
    for (std::int64_t s : member_sizes) {
        if (mother_size > s)
            throw InvalidArch("mother size must not exceed any member size");
        sum += s;
    }
    const double k = static_cast<double>(member_sizes.size());
    return 1.0 - k * static_cast<double>(mother_size) / static_cast<double>(sum);
}

WeightedNetwork shared_member_network(const SharedPlan& plan, std::size_t member) {
    const SharedMember& sm = plan.members.at(member);
    WeightedNetwork eff = sm.hatched;
    // widen-only plans embed every mother tensor as the top-left block of the
    // member's tensor, so origin positions map by coordinates
    for (std::size_t t = 0; t < eff.weights.size(); ++t) {
        const Tensor& shared = plan.mother.weights[t];
        const Tensor& factor = sm.factors[t];
        Tensor& out = eff.weights[t];
        if (out.rank() == 1) {
            for (int o = 0; o < shared.dim(0); ++o) out(o) = shared(o) * factor(o);
        } else {
            for (int o = 0; o < shared.dim(0); ++o)
                for (int j = 0; j < shared.dim(1); ++j) out(o, j) = shared(o, j) * factor(o, j);
        }
    }
    return eff;
}

PredictionMatrix shared_infer(const SharedPlan& plan, const Dataset& data) {
    std::vector<WeightedNetwork> nets;
    for (std::size_t i = 0; i < plan.members.size(); ++i)
        nets.push_back(shared_member_network(plan, i));
    return collect_predictions(nets, data);
}

SharedPlan shared_finetune(const SharedPlan& plan, const Dataset& data, const TrainConfig& cfg) {
    for (const auto& sm : plan.members) require_widen_only(sm.plan);
    validate_dataset(data);
    if (cfg.batch_size < 1 || cfg.patience < 1 || cfg.learning_rate < 0.0)
        throw InvalidArch("train config values must be positive");

    SharedPlan cur = plan;
    const std::size_t k = cur.members.size();
    const std::size_t n = data.labels.size();
    const int features = data.features.dim(1);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    double best_accuracy = -1.0;
    int since_best = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Rng rng(derive_seed(cfg.shuffle_seed, static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), rng);

        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t end = std::min(n, start + cfg.batch_size);
            Dataset batch;
            batch.num_classes = data.num_classes;
            batch.features = Tensor({static_cast<int>(end - start), features});
            for (std::size_t i = start; i < end; ++i) {
                for (int j = 0; j < features; ++j)
                    batch.features(static_cast<int>(i - start), j) =
                        data.features(static_cast<int>(order[i]), j);
                batch.labels.push_back(data.labels[order[i]]);
            }

            // all gradients against the same snapshot; joint loss is the mean
            // of head losses, so each head's gradient is scaled by 1/k
            std::vector<std::vector<Tensor>> grads;
            for (std::size_t m = 0; m < k; ++m)
                grads.push_back(gradients(shared_member_network(cur, m), batch));

            std::vector<Tensor> mother_grad;
            for (const auto& t : cur.mother.weights) mother_grad.emplace_back(t.shape);

            for (std::size_t m = 0; m < k; ++m) {
                SharedMember& sm = cur.members[m];
                for (std::size_t t = 0; t < grads[m].size(); ++t) {
                    const Tensor& g = grads[m][t];
                    const Tensor& factor = sm.factors[t];
                    const Tensor& shared = cur.mother.weights[t];
                    if (g.rank() == 1) {
                        for (int o = 0; o < g.dim(0); ++o) {
                            if (o < shared.dim(0))
                                mother_grad[t](o) += g(o) * factor(o) / static_cast<double>(k);
                            else
                                sm.hatched.weights[t](o) -=
                                    cfg.learning_rate * g(o) / static_cast<double>(k);
                        }
                    } else {
                        for (int o = 0; o < g.dim(0); ++o)
                            for (int j = 0; j < g.dim(1); ++j) {
                                if (o < shared.dim(0) && j < shared.dim(1))
                                    mother_grad[t](o, j) +=
                                        g(o, j) * factor(o, j) / static_cast<double>(k);
                                else
                                    sm.hatched.weights[t](o, j) -=
                                        cfg.learning_rate * g(o, j) / static_cast<double>(k);
                            }
                    }
                }
            }
            for (std::size_t t = 0; t < mother_grad.size(); ++t)
                for (std::size_t e = 0; e < mother_grad[t].size(); ++e)
                    cur.mother.weights[t].data[e] -= cfg.learning_rate * mother_grad[t].data[e];
        }

        // early stopping on averaged-head train accuracy
        const PredictionMatrix pm = shared_infer(cur, data);
        double correct = 0;
        for (int i = 0; i < pm.probs.dim(1); ++i) {
            int arg = 0;
            double best = -1.0;
            for (int j = 0; j < pm.probs.dim(2); ++j) {
                double mean = 0;
                for (int m = 0; m < pm.probs.dim(0); ++m) mean += pm.probs(m, i, j);
                if (mean > best) {
                    best = mean;
                    arg = j;
                }
            }
            if (arg == data.labels[static_cast<std::size_t>(i)]) ++correct;
        }
        const double accuracy = correct / static_cast<double>(n);
        if (accuracy > best_accuracy) {
            best_accuracy = accuracy;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    return cur;
}

} // namespace mothernets
