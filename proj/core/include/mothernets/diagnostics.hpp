#pragma once

#include <vector>

#include "mothernets/pipeline.hpp"

namespace mothernets {

// y[model][trial][example]: softmax probability of the correct class.
struct SoftmaxSamples {
    std::vector<std::vector<std::vector<double>>> y;
};

struct CovarianceReport {
    std::vector<double> variance;                 // per model, averaged over examples
    std::vector<std::vector<double>> covariance;  // pairwise, diagonal = variance
    double ensemble_variance = 0.0;               // Var of the model-mean
    double mean_correct_prob = 0.0;               // E of the model-mean
};

// Trains the configured ensemble `trials` times under distinct derived seeds
// and records the correct-class softmax on eval_data. Throws
// InsufficientTrials for trials < 2.
SoftmaxSamples collect_samples(const RunConfig& cfg, const Dataset& train_data,
                               const Dataset& eval_data, int trials);

// Per-example sample statistics over trials (divisor R-1), averaged over
// examples. Satisfies the exact decomposition
//   Var(mean) = (1/m^2) (sum Var_i + sum_{i != i'} Cov_{i,i'}).
CovarianceReport covariance_report(const SoftmaxSamples& samples);

// var / (e - 1/2)^2; requires e > 1/2 (AssumptionViolated otherwise). Values
// above 1 are reported as-is.
double chebyshev_bound(double e_yhat, double var_yhat);

} // namespace mothernets
