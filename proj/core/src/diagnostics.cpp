#include "mothernets/diagnostics.hpp"

#include "mothernets/rng.hpp"

namespace mothernets {

SoftmaxSamples collect_samples(const RunConfig& cfg, const Dataset& train_data,
                               const Dataset& eval_data, int trials) {
    if (trials < 2) throw InsufficientTrials("variance estimation needs at least 2 trials");
    validate_dataset(eval_data);

    SoftmaxSamples samples;
    samples.y.resize(cfg.ensemble.members.size());
    for (int r = 0; r < trials; ++r) {
        RunConfig trial_cfg = cfg;
        trial_cfg.seed = derive_seed(cfg.seed, "trial", static_cast<std::uint64_t>(r));
        const RunReport report = run(trial_cfg, train_data);
        if (report.members.size() != samples.y.size())
            throw ShapeMismatch("trial produced an unexpected member count");
        for (std::size_t m = 0; m < report.members.size(); ++m) {
            const Tensor probs = forward(report.members[m].net, eval_data.features);
            std::vector<double> row;
            for (std::size_t j = 0; j < eval_data.labels.size(); ++j)
                row.push_back(probs(static_cast<int>(j), eval_data.labels[j]));
            samples.y[m].push_back(std::move(row));
        }
    }
    return samples;
}

CovarianceReport covariance_report(const SoftmaxSamples& samples) {
    const std::size_t m = samples.y.size();
    if (m == 0) throw InsufficientTrials("no models in the sample");
    const std::size_t r = samples.y.front().size();
    if (r < 2) throw InsufficientTrials("covariance needs at least 2 trials");
    const std::size_t n = samples.y.front().front().size();
    for (const auto& model : samples.y)
        if (model.size() != r || model.front().size() != n)
            throw ShapeMismatch("ragged softmax samples");

    CovarianceReport report;
    report.covariance.assign(m, std::vector<double>(m, 0.0));

    // per-example sample covariances over trials, averaged over examples
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<double> mean(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t t = 0; t < r; ++t) mean[i] += samples.y[i][t][j];
            mean[i] /= static_cast<double>(r);
        }
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t i2 = 0; i2 < m; ++i2) {
                double acc = 0;
                for (std::size_t t = 0; t < r; ++t)
                    acc += (samples.y[i][t][j] - mean[i]) * (samples.y[i2][t][j] - mean[i2]);
                report.covariance[i][i2] += acc / static_cast<double>(r - 1) / static_cast<double>(n);
            }
    }
    for (std::size_t i = 0; i < m; ++i) report.variance.push_back(report.covariance[i][i]);

    // model-mean statistics, same per-example protocol
    double ens_var = 0, ens_mean = 0;
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<double> yhat(r, 0.0);
        for (std::size_t t = 0; t < r; ++t) {
            for (std::size_t i = 0; i < m; ++i) yhat[t] += samples.y[i][t][j];
            yhat[t] /= static_cast<double>(m);
        }
        double mu = 0;
        for (double v : yhat) mu += v;
        mu /= static_cast<double>(r);
        double acc = 0;
        for (double v : yhat) acc += (v - mu) * (v - mu);
        ens_var += acc / static_cast<double>(r - 1) / static_cast<double>(n);
        ens_mean += mu / static_cast<double>(n);
    }
    report.ensemble_variance = ens_var;
    report.mean_correct_prob = ens_mean;
    return report;
}

double chebyshev_bound(double e_yhat, double var_yhat) {
    if (var_yhat < 0.0) throw InvalidArch("variance must be nonnegative");
    if (e_yhat <= 0.5)
        throw AssumptionViolated("chebyshev bound requires mean correct probability > 1/2");
    const double gap = e_yhat - 0.5;
    return var_yhat / (gap * gap);
}

} // namespace mothernets
