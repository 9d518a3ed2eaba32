#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "credit/rng.hpp"

namespace credit {

struct SingleClass : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ScoreSet {
    std::vector<double> scores;  // predicted default probabilities
    std::vector<int> labels;     // 0 / 1
};

// Rank-based AUC (concordant pairs plus half ties).
double auc(const ScoreSet& s);

// Maximum vertical gap between the class-conditional score CDFs.
double ks_statistic(const ScoreSet& s);

// Hand's H-measure with the Beta(pi1+1, pi0+1) cost-weight distribution,
// evaluated in closed form on the ROC convex hull.
double h_measure(const ScoreSet& s);

struct MetricSummary {
    std::string metric;  // AUC | KS | H
    double mean = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    int n_estimates = 0;
    int n_skipped = 0;  // resamples dropped after repeated single-class draws
};

// Per-seed bootstrap over fixed test predictions: each entry of
// `per_seed_scores` is resampled `resamples` times and all estimates are
// pooled into one mean and percentile 95% CI per metric.
std::vector<MetricSummary> bootstrap_summary(const std::vector<ScoreSet>& per_seed_scores,
                                             int resamples, std::uint64_t master_seed);

struct SpearmanMatrix {
    std::vector<std::vector<double>> rho;   // symmetric, diagonal 1
    std::vector<std::vector<bool>> flagged; // true where a constant vector made rho undefined
};

SpearmanMatrix spearman_matrix(const std::vector<std::vector<double>>& probability_vectors);

// Average ranks (ties averaged), 1-based.
std::vector<double> average_ranks(std::span<const double> values);

double spearman_rho(std::span<const double> a, std::span<const double> b, bool* degenerate = nullptr);

// Linear-interpolation empirical quantile, q in [0, 1].
double quantile(std::vector<double> values, double q);

}  // namespace credit
