#include "credit/spi.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/gamma.hpp>

namespace credit {

namespace {
constexpr int kMinHistory = 30;
constexpr double kDegenerateEps = 1e-12;

GammaFit fit_impl(std::span<const double> history, bool allow_step_fallback) {
    const int n = static_cast<int>(history.size());
    if (n < kMinHistory) throw HistoryTooShort("gamma fit requires at least 30 samples");

    int zeros = 0;
    double sum = 0.0, log_sum = 0.0;
    int positives = 0;
    for (double x : history) {
        if (x < 0.0) throw std::invalid_argument("negative precipitation in history");
        if (x > 0.0) {
            sum += x;
            log_sum += std::log(x);
            ++positives;
        } else {
            ++zeros;
        }
    }

    GammaFit fit;
    fit.sample_size = n;
    fit.zero_fraction = static_cast<double>(zeros) / n;

    auto degenerate = [&](double value) {
        if (!allow_step_fallback) throw DegenerateSample("all positive precipitation values equal");
        fit.kind = GammaFit::Kind::Step;
        fit.step_value = value;
        return fit;
    };

    if (positives == 0) return degenerate(0.0);

    const double mean = sum / positives;
    const double a = std::log(mean) - log_sum / positives;  // >= 0 by concavity of log
    if (a <= kDegenerateEps) return degenerate(mean);

    fit.kind = GammaFit::Kind::Gamma;
    fit.shape = (1.0 + std::sqrt(1.0 + 4.0 * a / 3.0)) / (4.0 * a);
    fit.scale = mean / fit.shape;
    return fit;
}
}  // namespace

GammaFit fit_gamma(std::span<const double> monthly_totals) {
    return fit_impl(monthly_totals, /*allow_step_fallback=*/false);
}

GammaFit fit_precip_cdf(std::span<const double> monthly_totals) {
    return fit_impl(monthly_totals, /*allow_step_fallback=*/true);
}

double precip_probability(const GammaFit& fit, double x0) {
    if (x0 < 0.0) throw std::invalid_argument("negative precipitation value");
    const double q = fit.zero_fraction;
    if (x0 <= 0.0) return q;
    if (fit.kind == GammaFit::Kind::Step) return x0 < fit.step_value ? q : 1.0;
    return q + (1.0 - q) * boost::math::gamma_p(fit.shape, x0 / fit.scale);
}

double spi_from_probability(double cumulative) {
    constexpr double c0 = 2.515517, c1 = 0.802853, c2 = 0.010328;
    constexpr double d1 = 1.432788, d2 = 0.189269, d3 = 0.001308;

    double f = std::clamp(cumulative, 1e-12, 1.0 - 1e-12);
    const double sign = f > 0.5 ? 1.0 : -1.0;
    const double tail = f > 0.5 ? 1.0 - f : f;
    const double t = std::sqrt(std::log(1.0 / (tail * tail)));
    const double value = t - ((c2 * t + c1) * t + c0) / (((d3 * t + d2) * t + d1) * t + 1.0);
    return std::clamp(sign * value, -4.0, 4.0);
}

double compute_spi(const GammaFit& fit, double x0) {
    return spi_from_probability(precip_probability(fit, x0));
}

}  // namespace credit
