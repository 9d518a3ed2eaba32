#include "credit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/special_functions/beta.hpp>

namespace credit {

namespace {
void count_classes(const ScoreSet& s, int& n0, int& n1) {
    if (s.scores.size() != s.labels.size())
        throw std::invalid_argument("scores/labels length mismatch");
    n0 = n1 = 0;
    for (int y : s.labels) (y == 1 ? n1 : n0)++;
    if (n0 == 0 || n1 == 0) throw SingleClass("metric requires both classes");
}
}  // namespace

std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double auc(const ScoreSet& s) {
    int n0, n1;
    count_classes(s, n0, n1);
    const auto ranks = average_ranks(s.scores);
    double rank_sum_pos = 0.0;
    for (std::size_t i = 0; i < ranks.size(); ++i)
        if (s.labels[i] == 1) rank_sum_pos += ranks[i];
    return (rank_sum_pos - n1 * (n1 + 1.0) / 2.0) / (static_cast<double>(n0) * n1);
}

double ks_statistic(const ScoreSet& s) {
    int n0, n1;
    count_classes(s, n0, n1);
    std::vector<std::size_t> order(s.scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });
    double best = 0.0;
    double c0 = 0.0, c1 = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double v = s.scores[order[i]];
        while (i < order.size() && s.scores[order[i]] == v) {
            (s.labels[order[i]] == 1 ? c1 : c0) += 1.0;
            ++i;
        }
        best = std::max(best, std::abs(c1 / n1 - c0 / n0));
    }
    return best;
}

namespace {
struct CdfPoint {
    double f0, f1;
};

// Convex minorant of the per-threshold (F0, F1) curve from (0,0) to (1,1);
// slopes are non-decreasing along the hull.
std::vector<CdfPoint> roc_hull(const ScoreSet& s, int n0, int n1) {
    std::vector<std::size_t> order(s.scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });

    std::vector<CdfPoint> pts;
    pts.push_back({0.0, 0.0});
    double c0 = 0.0, c1 = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double v = s.scores[order[i]];
        while (i < order.size() && s.scores[order[i]] == v) {
            (s.labels[order[i]] == 1 ? c1 : c0) += 1.0;
            ++i;
        }
        pts.push_back({c0 / n0, c1 / n1});
    }

    std::vector<CdfPoint> hull;
    for (const auto& p : pts) {
        while (hull.size() >= 2) {
            const auto& a = hull[hull.size() - 2];
            const auto& b = hull[hull.size() - 1];
            const double cross = (b.f0 - a.f0) * (p.f1 - a.f1) - (b.f1 - a.f1) * (p.f0 - a.f0);
            if (cross <= 0.0)
                hull.pop_back();  // b lies on or above segment a-p
            else
                break;
        }
        hull.push_back(p);
    }
    return hull;
}
}  // namespace

double h_measure(const ScoreSet& s) {
    int n0, n1;
    count_classes(s, n0, n1);
    const double n = static_cast<double>(n0 + n1);
    const double pi0 = n0 / n, pi1 = n1 / n;

    const auto hull = roc_hull(s, n0, n1);
    const std::size_t m = hull.size();

    // Cost breakpoints: vertex k is loss-optimal for c in [cuts[k], cuts[k+1]].
    std::vector<double> cuts(m + 1);
    cuts[0] = 0.0;
    cuts[m] = 1.0;
    for (std::size_t k = 1; k < m; ++k) {
        const double df0 = hull[k].f0 - hull[k - 1].f0;
        const double df1 = hull[k].f1 - hull[k - 1].f1;
        cuts[k] = pi1 * df1 / (pi0 * df0 + pi1 * df1);
    }

    const double alpha = pi1 + 1.0, beta = pi0 + 1.0;
    auto moment_c = [&](double a, double b) {  // integral of c * u(c) over [a, b]
        return alpha / (alpha + beta) *
               (boost::math::ibeta(alpha + 1.0, beta, b) - boost::math::ibeta(alpha + 1.0, beta, a));
    };
    auto moment_1mc = [&](double a, double b) {  // integral of (1-c) * u(c)
        return beta / (alpha + beta) *
               (boost::math::ibeta(alpha, beta + 1.0, b) - boost::math::ibeta(alpha, beta + 1.0, a));
    };

    double expected_min_loss = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const double lo = cuts[k], hi = cuts[k + 1];
        if (hi <= lo) continue;
        expected_min_loss += pi0 * (1.0 - hull[k].f0) * moment_c(lo, hi) +
                             pi1 * hull[k].f1 * moment_1mc(lo, hi);
    }

    const double trivial_loss = pi0 * moment_c(0.0, pi1) + pi1 * moment_1mc(pi1, 1.0);
    if (trivial_loss <= 0.0) return 0.0;
    return std::clamp(1.0 - expected_min_loss / trivial_loss, 0.0, 1.0);
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile of empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * (values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - lo;
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

std::vector<MetricSummary> bootstrap_summary(const std::vector<ScoreSet>& per_seed_scores,
                                             int resamples, std::uint64_t master_seed) {
    if (per_seed_scores.empty()) throw std::invalid_argument("no score sets");
    constexpr int kMaxRedraws = 100;

    std::vector<double> aucs, kss, hs;
    int skipped = 0;
    const Rng master(master_seed);
    for (std::size_t seed_idx = 0; seed_idx < per_seed_scores.size(); ++seed_idx) {
        const ScoreSet& base = per_seed_scores[seed_idx];
        if (base.scores.empty()) throw std::invalid_argument("empty score set");
        Rng rng = master.stream("bootstrap/seed" + std::to_string(seed_idx));
        const std::size_t n = base.scores.size();
        for (int r = 0; r < resamples; ++r) {
            ScoreSet draw;
            draw.scores.resize(n);
            draw.labels.resize(n);
            bool ok = false;
            for (int attempt = 0; attempt < kMaxRedraws && !ok; ++attempt) {
                int pos = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    const std::size_t j = static_cast<std::size_t>(rng.uniform_int(n));
                    draw.scores[i] = base.scores[j];
                    draw.labels[i] = base.labels[j];
                    pos += base.labels[j];
                }
                ok = pos > 0 && pos < static_cast<int>(n);
            }
            if (!ok) {
                ++skipped;
                continue;
            }
            aucs.push_back(auc(draw));
            kss.push_back(ks_statistic(draw));
            hs.push_back(h_measure(draw));
        }
    }

    auto summarize = [&](const char* name, const std::vector<double>& v) {
        MetricSummary s;
        s.metric = name;
        s.n_estimates = static_cast<int>(v.size());
        s.n_skipped = skipped;
        if (!v.empty()) {
            s.mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
            s.ci_low = quantile(v, 0.025);
            s.ci_high = quantile(v, 0.975);
        }
        return s;
    };
    return {summarize("AUC", aucs), summarize("KS", kss), summarize("H", hs)};
}

double spearman_rho(std::span<const double> a, std::span<const double> b, bool* degenerate) {
    if (a.size() != b.size() || a.empty()) throw std::invalid_argument("rank vectors misaligned");
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (degenerate) *degenerate = false;
    if (va <= 0.0 || vb <= 0.0) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    return cov / std::sqrt(va * vb);
}

SpearmanMatrix spearman_matrix(const std::vector<std::vector<double>>& probability_vectors) {
    const std::size_t k = probability_vectors.size();
    for (const auto& v : probability_vectors)
        if (v.size() != probability_vectors.front().size())
            throw std::invalid_argument("probability vectors cover different loans");
    SpearmanMatrix m;
    m.rho.assign(k, std::vector<double>(k, 1.0));
    m.flagged.assign(k, std::vector<bool>(k, false));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            bool degenerate = false;
            const double rho = spearman_rho(probability_vectors[i], probability_vectors[j], &degenerate);
            m.rho[i][j] = m.rho[j][i] = rho;
            m.flagged[i][j] = m.flagged[j][i] = degenerate;
        }
    }
    return m;
}

}  // namespace credit
