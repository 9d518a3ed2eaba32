#pragma once

#include <string>
#include <vector>

#include "credit/climate.hpp"
#include "credit/metrics.hpp"
#include "credit/panel.hpp"
#include "credit/synth.hpp"

namespace credit {

// station metadata CSV: station_id,lat,lon,drought_region_weight,freeze_region_weight
void write_stations_csv(const std::string& path, const std::vector<StationMeta>& stations);
std::vector<StationMeta> read_stations_csv(const std::string& path);

// daily weather CSV: station_id,date,precip_mm,tmax_c,tmin_c,tavg_c,snow
void write_weather_csv(const std::string& path, const std::vector<StationSeries>& stations);
std::vector<StationSeries> read_weather_csv(const std::string& path,
                                            const std::vector<StationMeta>& metas);

// monthly index CSV: station_id,year_month,di,wlr,ht,cf
void write_indices_csv(const std::string& path, const std::vector<MonthlyIndexRow>& rows);
std::vector<MonthlyIndexRow> read_indices_csv(const std::string& path);

// loan CSV: loan_id,lat,lon,start_date,term_months,label,<structured columns>
void write_loans_csv(const std::string& path, const std::vector<LoanRecord>& loans,
                     const StructuredSchema& schema);
std::vector<LoanRecord> read_loans_csv(const std::string& path, const StructuredSchema& schema);

// texts TSV: loan_id<TAB>whitespace-separated tokens; joined onto loans by id
void write_texts_tsv(const std::string& path, const std::vector<LoanRecord>& loans);
void read_texts_tsv(const std::string& path, std::vector<LoanRecord>& loans);

// panel CSV: loan_id,month_offset,di,wlr,ht,cf with offsets -12..-1
void write_panels_csv(const std::string& path, const std::vector<ClimatePanel>& panels);
std::vector<ClimatePanel> read_panels_csv(const std::string& path);

// feature selection CSV: feature,iv,vif,status
void write_selection_csv(const std::string& path, const SelectionReport& report);

struct PredictionRow {
    std::string model;  // modality label
    int seed = 0;
    std::string loan_id;
    std::string split;  // train|val|test
    int label = 0;
    double probability = 0.0;
};
void write_predictions_csv(const std::string& path, const std::vector<PredictionRow>& rows);
std::vector<PredictionRow> read_predictions_csv(const std::string& path);

struct ReportRow {
    std::string model;     // encoder kind
    std::string modality;  // mask label
    std::string metric;
    double mean = 0.0, ci_low = 0.0, ci_high = 0.0;
};
void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows);

void write_spearman_csv(const std::string& path, const std::vector<std::string>& names,
                        const SpearmanMatrix& matrix);

struct ShapRow {
    std::string loan_id;
    int seed = 0;
    std::string feature;
    std::string factor;    // empty for non-climate features
    int month_offset = 0;  // 0 when not a climate cell
    double feature_value = 0.0;
    double shap_value = 0.0;
    double base_value = 0.0;
};
void write_shap_csv(const std::string& path, const std::vector<ShapRow>& rows);

std::uint64_t file_checksum(const std::string& path);
std::string checksum_hex(std::uint64_t value);

}  // namespace credit
