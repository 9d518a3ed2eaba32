#pragma once

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "credit/calendar.hpp"
#include "credit/climate.hpp"

namespace credit {

struct EmptyStationSet : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MissingMonth : std::runtime_error {
    explicit MissingMonth(std::string station, std::vector<YearMonth> gaps_);
    std::string station_id;
    std::vector<YearMonth> gaps;
};

struct LoanRecord {
    std::string loan_id;
    double latitude = 0.0;
    double longitude = 0.0;
    Date start_date;
    int term_months = 1;
    std::map<std::string, std::string> attributes;  // structured columns, raw text form
    std::vector<std::string> tokens;                // officer-assessment text
    int label = 0;                                  // 1 = default
};

inline constexpr int kPanelMonths = 12;
inline constexpr int kPanelFactors = 4;

// 12 months x 4 factors (DI, WLR, HT, CF), rows ordered t-12 .. t-1.
struct ClimatePanel {
    std::string loan_id;
    std::array<std::array<double, kPanelFactors>, kPanelMonths> values{};

    double at(int month_row, int factor) const { return values.at(month_row).at(factor); }
};

double haversine_km(double lat1, double lon1, double lat2, double lon2);

// Nearest station by great-circle distance; ties go to the lexicographically
// smaller station id.
std::string nearest_station(const LoanRecord& loan, std::span<const StationMeta> stations);

class MonthlyIndexStore {
public:
    void insert(const MonthlyIndexRow& row);
    const MonthlyIndexRow* find(const std::string& station_id, const YearMonth& ym) const;
    std::size_t size() const { return rows_.size(); }

private:
    std::map<std::pair<std::string, int>, MonthlyIndexRow> rows_;
};

// Panel of the 12 calendar months strictly before the loan's start month,
// oldest first. Throws MissingMonth listing every gap.
ClimatePanel build_panel(const LoanRecord& loan, const std::string& station_id,
                         const MonthlyIndexStore& store);

}  // namespace credit
