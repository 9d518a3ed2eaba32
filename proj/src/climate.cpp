#include "credit/climate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace credit {

double daily_drought_index(double spi) {
    if (spi >= -1.0) return 0.0;
    if (spi >= -1.5) return spi + 1.0;
    if (spi >= -2.0) return 2.0 * spi + 2.5;
    return 3.0 * spi + 4.5;
}

double drought_month_weight(int month) {
    if (month >= 5 && month <= 9) return 1.5;
    if (month == 3 || month == 4 || month == 10 || month == 11) return 1.0;
    return 0.5;
}

double monthly_drought(std::span<const double> daily_spi, std::span<const double> daily_tavg,
                       double region_weight, int month) {
    if (daily_spi.size() != daily_tavg.size())
        throw LengthMismatch("daily SPI and temperature series differ in length");
    const double b = drought_month_weight(month);
    double raw = 0.0;
    for (std::size_t i = 0; i < daily_spi.size(); ++i) {
        if (daily_tavg[i] > 0.0) raw += daily_drought_index(daily_spi[i]) * region_weight * b;
    }
    return -raw;  // severity orientation, raw sum is <= 0
}

double monthly_wlr(std::span<const double> daily_precip, int month) {
    const int day_count = static_cast<int>(daily_precip.size());
    const double c = (month >= 6 && month <= 8) ? 2.0 : 1.0;
    double sum = 0.0;
    int streak = 0;
    for (double p : daily_precip) {
        if (p < 0.0) throw NegativePrecipitation("negative daily precipitation");
        streak = p > 0.0 ? streak + 1 : 0;
        if (p < 50.0) continue;
        const double n2 = static_cast<double>(streak) * streak;
        if (p < 100.0)
            sum += n2;
        else if (p < 200.0)
            sum += 2.0 * n2;
        else
            sum += 3.0 * n2;
    }
    return day_count > 0 ? sum / day_count * c : 0.0;
}

namespace {
int heat_class(double t, double lo, double mid, double hi) {
    if (t >= hi) return 3;
    if (t >= mid) return 2;
    if (t >= lo) return 1;
    return 0;
}
}  // namespace

double monthly_ht(std::span<const double> daily_tmax, std::span<const double> daily_tmin,
                  int month) {
    (void)month;  // no seasonal weight in the HT formulation
    if (daily_tmax.size() != daily_tmin.size())
        throw LengthMismatch("daily max/min temperature series differ in length");
    const int day_count = static_cast<int>(daily_tmax.size());
    if (day_count == 0) return 0.0;

    double sum = 0.0;
    int day_streak = 0, night_streak = 0;
    for (int i = 0; i < day_count; ++i) {
        day_streak = daily_tmax[i] >= 35.0 ? day_streak + 1 : 0;
        night_streak = daily_tmin[i] >= 25.0 ? night_streak + 1 : 0;
        const int tg = heat_class(daily_tmax[i], 35.0, 37.0, 40.0);
        const int td = heat_class(daily_tmin[i], 25.0, 28.0, 30.0);
        if (tg > 0) sum += tg * std::sqrt(static_cast<double>(day_streak));
        if (td > 0) sum += td * std::sqrt(static_cast<double>(night_streak));
    }
    return sum / day_count;
}

namespace {
double freeze_season_weight(int month) {
    if (month == 12) return 1.0;
    if (month == 1 || month == 2) return 2.0;
    return 0.5;
}
}  // namespace

double monthly_cf(std::span<const double> pentad_means, std::span<const PentadStat> climatology,
                  std::span<const int> snow_days_per_pentad, double region_weight, int month) {
    if (pentad_means.size() != 6 || climatology.size() != 6 || snow_days_per_pentad.size() != 6)
        throw LengthMismatch("CF expects exactly six pentads");

    double total = 0.0;
    for (int p = 0; p < 6; ++p) {
        const double sigma = climatology[p].std_temp;
        if (sigma <= 0.0) continue;  // anomaly class not definable
        const double anomaly = pentad_means[p] - climatology[p].mean_temp;
        int a = 0;
        if (anomaly <= -3.0 * sigma)
            a = 3;
        else if (anomaly <= -2.0 * sigma)
            a = 2;
        else if (anomaly <= -1.0 * sigma)
            a = 1;
        if (a == 0) continue;
        const double snow_coeff = 1.0 + snow_days_per_pentad[p] / 10.0;
        total += a * std::abs(anomaly / sigma) * snow_coeff * region_weight;
    }
    return total * freeze_season_weight(month);
}

RescaleMap RescaleMap::fit(std::span<const double> reference) {
    if (reference.empty()) throw std::invalid_argument("empty rescale reference series");
    RescaleMap m;
    m.ref_min = *std::min_element(reference.begin(), reference.end());
    m.ref_max = *std::max_element(reference.begin(), reference.end());
    return m;
}

double RescaleMap::apply(double v) const {
    const double range = ref_max - ref_min;
    if (range <= 0.0) return 0.0;  // constant reference
    return std::clamp((v - ref_min) / range * 10.0, 0.0, 10.0);
}

std::vector<double> rescale_index(std::span<const double> values, const RescaleMap& map) {
    std::vector<double> out;
    out.reserve(values.size());
    for (double v : values) out.push_back(map.apply(v));
    return out;
}

// --- station pipeline -------------------------------------------------------

void pentad_aggregates(std::span<const DailyWeather> month_days, std::array<double, 6>& mean_temp,
                       std::array<int, 6>& snow_days) {
    std::array<double, 6> sums{};
    std::array<int, 6> counts{};
    snow_days.fill(0);
    for (const auto& d : month_days) {
        const int p = pentad_of_day(d.date.day);
        sums[p] += d.t_avg;
        counts[p] += 1;
        if (d.snow_day) snow_days[p] += 1;
    }
    for (int p = 0; p < 6; ++p) mean_temp[p] = counts[p] > 0 ? sums[p] / counts[p] : 0.0;
}

PentadClimatology build_pentad_climatology(const StationSeries& station, int year_from,
                                           int year_to) {
    // value accumulator per (month, pentad) across years
    std::array<std::array<std::vector<double>, 6>, 12> samples;

    std::size_t i = 0;
    const auto& days = station.days;
    while (i < days.size()) {
        const int y = days[i].date.year;
        const int m = days[i].date.month;
        std::size_t j = i;
        while (j < days.size() && days[j].date.year == y && days[j].date.month == m) ++j;
        if (y >= year_from && y <= year_to) {
            std::array<double, 6> means;
            std::array<int, 6> snow;
            pentad_aggregates(std::span(days).subspan(i, j - i), means, snow);
            for (int p = 0; p < 6; ++p) samples[m - 1][p].push_back(means[p]);
        }
        i = j;
    }

    PentadClimatology clim;
    for (int m = 0; m < 12; ++m) {
        for (int p = 0; p < 6; ++p) {
            const auto& v = samples[m][p];
            if (v.empty()) continue;
            const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
            double ss = 0.0;
            for (double x : v) ss += (x - mean) * (x - mean);
            const double sd = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0;
            clim.by_month[m][p] = {mean, sd};
        }
    }
    return clim;
}

std::vector<double> monthly_precip_totals(const StationSeries& station, int year_from,
                                          int year_to) {
    std::map<int, double> totals;  // month index -> total
    for (const auto& d : station.days) {
        if (d.date.year < year_from || d.date.year > year_to) continue;
        totals[month_index({d.date.year, d.date.month})] += d.precip;
    }
    std::vector<double> out;
    out.reserve(totals.size());
    for (const auto& [_, v] : totals) out.push_back(v);
    return out;
}

std::vector<MonthlyIndexRow> compute_station_indices(const StationSeries& station,
                                                     const PentadClimatology& climatology,
                                                     const GammaFit& fit, YearMonth from,
                                                     YearMonth to) {
    const auto& days = station.days;
    if (days.empty()) throw std::invalid_argument("empty station series");
    const long first_day = day_number(days.front().date);

    auto day_at = [&](long serial) -> const DailyWeather* {
        const long off = serial - first_day;
        if (off < 0 || off >= static_cast<long>(days.size())) return nullptr;
        return &days[static_cast<std::size_t>(off)];
    };

    std::vector<MonthlyIndexRow> rows;
    for (int mi = month_index(from); mi <= month_index(to); ++mi) {
        const YearMonth ym = year_month_from_index(mi);
        const int n_days = days_in_month(ym.year, ym.month);

        std::vector<double> spi(n_days), tavg(n_days), precip(n_days), tmax(n_days), tmin(n_days);
        std::vector<DailyWeather> month_days(n_days);
        for (int d = 0; d < n_days; ++d) {
            const long serial = days_from_civil(ym.year, ym.month, d + 1);
            const DailyWeather* w = day_at(serial);
            if (!w) throw std::runtime_error("station series does not cover " + to_string(ym));
            month_days[d] = *w;
            tavg[d] = w->t_avg;
            precip[d] = w->precip;
            tmax[d] = w->t_max;
            tmin[d] = w->t_min;

            double trailing = 0.0;  // 30-day accumulation ending at this day
            for (long s = serial - 29; s <= serial; ++s) {
                const DailyWeather* p = day_at(s);
                if (p) trailing += p->precip;
            }
            spi[d] = compute_spi(fit, trailing);
        }

        std::array<double, 6> pentad_means;
        std::array<int, 6> snow;
        pentad_aggregates(month_days, pentad_means, snow);

        MonthlyIndexRow row;
        row.station_id = station.meta.station_id;
        row.ym = ym;
        row.di = monthly_drought(spi, tavg, station.meta.drought_region_weight, ym.month);
        row.wlr = monthly_wlr(precip, ym.month);
        row.ht = monthly_ht(tmax, tmin, ym.month);
        row.cf = monthly_cf(pentad_means, climatology.month(ym.month), snow,
                            station.meta.freeze_region_weight, ym.month);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace credit
