#pragma once

#include <span>
#include <stdexcept>

namespace credit {

struct HistoryTooShort : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DegenerateSample : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Fitted CDF model for monthly precipitation totals. The gamma parameters come
// from the log-moment approximation on the strictly positive subsample; when
// every positive observation is identical the fit degenerates and the CDF
// falls back to a step at the common value.
struct GammaFit {
    enum class Kind { Gamma, Step };
    Kind kind = Kind::Gamma;
    double shape = 0.0;          // gamma shape, > 0 when kind == Gamma
    double scale = 0.0;          // gamma scale, > 0 when kind == Gamma
    double zero_fraction = 0.0;  // share of zero-precipitation samples
    int sample_size = 0;
    double step_value = 0.0;  // atom location when kind == Step
};

// Log-moment gamma fit over monthly precipitation totals. Throws
// HistoryTooShort for n < 30 and DegenerateSample when every positive value is
// equal (the shape parameter is then undefined).
GammaFit fit_gamma(std::span<const double> monthly_totals);

// Like fit_gamma but degrades to the step-CDF fallback instead of throwing
// DegenerateSample.
GammaFit fit_precip_cdf(std::span<const double> monthly_totals);

// Cumulative probability of a precipitation value under the fit: zero mass at
// x = 0 plus the gamma (or step) CDF over the positive part.
double precip_probability(const GammaFit& fit, double x0);

// Inverse-normal rational approximation applied to a cumulative probability,
// two-sided around F = 0.5. Output clamped to [-4, 4].
double spi_from_probability(double cumulative);

double compute_spi(const GammaFit& fit, double x0);

}  // namespace credit
