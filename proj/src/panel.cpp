#include "credit/panel.hpp"

#include <cmath>

namespace credit {

namespace {
std::string gap_message(const std::string& station, const std::vector<YearMonth>& gaps) {
    std::string msg = "missing index months for station " + station + ":";
    for (const auto& g : gaps) msg += " " + to_string(g);
    return msg;
}
}  // namespace

MissingMonth::MissingMonth(std::string station, std::vector<YearMonth> gaps_)
    : std::runtime_error(gap_message(station, gaps_)),
      station_id(std::move(station)),
      gaps(std::move(gaps_)) {}

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
    constexpr double kEarthRadiusKm = 6371.0;
    constexpr double kDeg = 0.017453292519943295;  // pi / 180
    const double phi1 = lat1 * kDeg, phi2 = lat2 * kDeg;
    const double dphi = (lat2 - lat1) * kDeg;
    const double dlam = (lon2 - lon1) * kDeg;
    const double s1 = std::sin(dphi / 2.0), s2 = std::sin(dlam / 2.0);
    const double a = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

std::string nearest_station(const LoanRecord& loan, std::span<const StationMeta> stations) {
    if (stations.empty()) throw EmptyStationSet("no stations available");
    const StationMeta* best = nullptr;
    double best_dist = 0.0;
    for (const auto& s : stations) {
        const double d = haversine_km(loan.latitude, loan.longitude, s.latitude, s.longitude);
        if (!best || d < best_dist || (d == best_dist && s.station_id < best->station_id)) {
            best = &s;
            best_dist = d;
        }
    }
    return best->station_id;
}

void MonthlyIndexStore::insert(const MonthlyIndexRow& row) {
    rows_[{row.station_id, month_index(row.ym)}] = row;
}

const MonthlyIndexRow* MonthlyIndexStore::find(const std::string& station_id,
                                               const YearMonth& ym) const {
    const auto it = rows_.find({station_id, month_index(ym)});
    return it == rows_.end() ? nullptr : &it->second;
}

ClimatePanel build_panel(const LoanRecord& loan, const std::string& station_id,
                         const MonthlyIndexStore& store) {
    ClimatePanel panel;
    panel.loan_id = loan.loan_id;
    const int start = month_index(year_month_of(loan.start_date));

    std::vector<YearMonth> gaps;
    for (int offset = -kPanelMonths; offset <= -1; ++offset) {
        const YearMonth ym = year_month_from_index(start + offset);
        const MonthlyIndexRow* row = store.find(station_id, ym);
        if (!row) {
            gaps.push_back(ym);
            continue;
        }
        auto& dest = panel.values[offset + kPanelMonths];
        dest = {row->di, row->wlr, row->ht, row->cf};
    }
    if (!gaps.empty()) throw MissingMonth(station_id, std::move(gaps));
    return panel;
}

}  // namespace credit
