#pragma once

#include <string>
#include <vector>

#include "credit/climate.hpp"
#include "credit/features.hpp"
#include "credit/panel.hpp"
#include "credit/rng.hpp"

namespace credit {

struct RateUnreachable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Planted-effect generator settings. Effect coefficients act on standardized
// drivers: latent borrower quality, the four panel-mean climate factors, and
// the realized text sentiment.
struct GenSpec {
    int n_loans = 4172;
    double default_rate = 0.015;  // production-like imbalance; tests mostly use 0.05
    int n_stations = 9;
    int clim_year_from = 2001;
    int clim_year_to = 2020;
    int loan_year_from = 2021;
    int loan_year_to = 2022;
    double beta_struct = 0.8;
    double beta_wlr = 1.5;
    double beta_drought = 0.3;
    double beta_ht = 0.25;
    double beta_cf = 0.2;
    double beta_text = 0.6;
    std::uint64_t seed = 1;
    int text_min_len = 15;
    int text_mean_len = 107;
    int text_len_sd = 38;
    int text_max_len = 326;

    void validate() const;
};

struct SynthDataset {
    std::vector<StationSeries> weather;       // per station, meta included
    std::vector<MonthlyIndexRow> index_rows;  // all stations, full range
    std::vector<LoanRecord> loans;
    std::vector<ClimatePanel> panels;  // aligned with loans
    // ground truth for property tests
    std::vector<double> quality;
    std::vector<double> sentiment;
    double intercept = 0.0;  // tuned logit intercept

    std::vector<StationMeta> station_meta() const;
};

// Structured column names of the generated loans (Table-B1-style subset plus
// a pure-noise control column).
struct StructuredSchema {
    std::vector<std::string> numeric;
    std::vector<std::string> categorical;
};
const StructuredSchema& synth_structured_schema();

// Attribute map -> typed frame using an explicit schema. Missing numeric
// cells parse from empty strings to NaN.
StructuredFrame frame_from_attributes(const std::vector<LoanRecord>& loans,
                                      const StructuredSchema& schema);

std::vector<StationSeries> gen_station_weather(const GenSpec& spec);

// Officer-note token list whose sentiment token mix saturates with quality:
// the positive-token share is clamp(0.5 + q/4, 0, 1).
std::vector<std::string> gen_text(double quality, Rng& rng, const GenSpec& spec);

// Realized sentiment of a token list in [-1, 1] (0 when no sentiment tokens).
double text_sentiment(const std::vector<std::string>& tokens);

// Full dataset: weather -> indices -> loans matched to nearest stations with
// 12-month panels -> planted-logit labels with the intercept bisected onto
// the target default rate.
SynthDataset generate_dataset(const GenSpec& spec);

}  // namespace credit
