#pragma once

#include <array>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "credit/calendar.hpp"
#include "credit/spi.hpp"

namespace credit {

struct LengthMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NegativePrecipitation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DailyWeather {
    Date date;
    double precip = 0.0;  // mm
    double t_max = 0.0;   // deg C
    double t_min = 0.0;
    double t_avg = 0.0;
    bool snow_day = false;
};

struct StationMeta {
    std::string station_id;
    double latitude = 0.0;
    double longitude = 0.0;
    double drought_region_weight = 1.0;  // a_i in {0, 0.6, 1}
    double freeze_region_weight = 1.0;   // d_i in {0.5, 1}
};

struct StationSeries {
    StationMeta meta;
    std::vector<DailyWeather> days;  // contiguous, ascending by date
};

struct PentadStat {
    double mean_temp = 0.0;
    double std_temp = 0.0;  // >= 0
};

// Six pentads per calendar month, aggregated over a reference period.
struct PentadClimatology {
    std::array<std::array<PentadStat, 6>, 12> by_month{};  // [month-1][pentad]

    const std::array<PentadStat, 6>& month(int m) const { return by_month.at(m - 1); }
};

struct MonthlyIndexRow {
    std::string station_id;
    YearMonth ym;
    double di = 0.0;
    double wlr = 0.0;
    double ht = 0.0;
    double cf = 0.0;

    double factor(int f) const {
        switch (f) {
            case 0: return di;
            case 1: return wlr;
            case 2: return ht;
            case 3: return cf;
        }
        throw std::out_of_range("factor index");
    }
};

inline constexpr std::array<const char*, 4> kFactorNames = {"di", "wlr", "ht", "cf"};

// Daily drought index as a piecewise-linear map of the SPI; 0 above -1,
// steepening slopes below. Continuous at the breakpoints.
double daily_drought_index(double spi);

// Monthly weights: 1.5 May-Sep, 1.0 Mar/Apr/Oct/Nov, 0.5 Dec-Feb.
double drought_month_weight(int month);

// Monthly drought severity: sum of daily indices over days whose average
// temperature exceeds 0 C, weighted by the station and month weights, then
// sign-flipped so that larger = more severe.
double monthly_drought(std::span<const double> daily_spi, std::span<const double> daily_tavg,
                       double region_weight, int month);

// Monthly water-logging-by-rain index. The consecutive-rain-day counter n
// tracks days with any positive precipitation and resets on dry days.
double monthly_wlr(std::span<const double> daily_precip, int month);

// Monthly high-temperature index from daily max/min temperatures with running
// streak lengths for the >=35 C day and >=25 C night conditions.
double monthly_ht(std::span<const double> daily_tmax, std::span<const double> daily_tmin,
                  int month);

// Monthly cryogenic freezing index over six pentads. A zero climatological
// sigma forces the anomaly class to 0 for that pentad.
double monthly_cf(std::span<const double> pentad_means, std::span<const PentadStat> climatology,
                  std::span<const int> snow_days_per_pentad, double region_weight, int month);

// Affine [0,10] rescale fitted on a reference series; out-of-range inputs
// clamp, and a constant reference collapses everything to 0.
struct RescaleMap {
    double ref_min = 0.0;
    double ref_max = 0.0;

    static RescaleMap fit(std::span<const double> reference);
    double apply(double v) const;
};

std::vector<double> rescale_index(std::span<const double> values, const RescaleMap& map);

// --- station pipeline -------------------------------------------------------

// Mean of daily average temperatures and snow-day counts per pentad for one
// month of daily records.
void pentad_aggregates(std::span<const DailyWeather> month_days,
                       std::array<double, 6>& mean_temp, std::array<int, 6>& snow_days);

// Pentad temperature climatology over [year_from, year_to] (sample std dev).
PentadClimatology build_pentad_climatology(const StationSeries& station, int year_from,
                                           int year_to);

// Pooled calendar-month precipitation totals over [year_from, year_to].
std::vector<double> monthly_precip_totals(const StationSeries& station, int year_from,
                                          int year_to);

// All four monthly indices for [from, to]. Daily SPI values standardize the
// trailing 30-day precipitation sum against the pooled monthly-total fit.
std::vector<MonthlyIndexRow> compute_station_indices(const StationSeries& station,
                                                     const PentadClimatology& climatology,
                                                     const GammaFit& fit, YearMonth from,
                                                     YearMonth to);

}  // namespace credit
