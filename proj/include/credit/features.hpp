#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace credit {

struct SingleClassLabels : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline const std::string kMissingCategory = "MISSING";

// Column-typed structured data. Numeric missing values are NaN; categorical
// missing values are empty strings until imputation renames them MISSING.
struct NumericColumn {
    std::string name;
    std::vector<double> values;  // NaN = missing
};

struct CategoricalColumn {
    std::string name;
    std::vector<std::string> values;  // "" = missing
};

struct StructuredFrame {
    std::vector<NumericColumn> numeric;
    std::vector<CategoricalColumn> categorical;

    std::size_t n_rows() const;
    void validate() const;  // equal column lengths
};

struct ImputeStats {
    std::map<std::string, double> numeric_means;  // fit on training rows only
};

ImputeStats fit_impute(const StructuredFrame& frame, std::span<const int> train_rows);
void apply_impute(StructuredFrame& frame, const ImputeStats& stats);

// One fitted WoE encoder for a single feature.
struct BinSpec {
    std::string feature;
    bool continuous = false;
    std::vector<double> cuts;                   // ascending interior cut points
    std::map<std::string, int> category_to_bin; // includes MISSING
    std::vector<double> woe;                    // per bin
    std::vector<double> good_share;             // smoothed p_good per bin
    std::vector<double> bad_share;              // smoothed p_bad per bin

    int bin_of_numeric(double v) const;
    int bin_of_category(const std::string& v) const;  // unseen -> MISSING bin
    double encode_numeric(double v) const { return woe[static_cast<std::size_t>(bin_of_numeric(v))]; }
    double encode_category(const std::string& v) const {
        return woe[static_cast<std::size_t>(bin_of_category(v))];
    }
};

// Equal-frequency quantile bins (default 5) with 0.5 additive smoothing per
// class per bin; WoE_b = ln(p_good_b / p_bad_b).
BinSpec fit_woe_numeric(const std::string& name, std::span<const double> values,
                        std::span<const int> labels, std::span<const int> train_rows,
                        int n_bins = 5);
BinSpec fit_woe_categorical(const std::string& name, const std::vector<std::string>& values,
                            std::span<const int> labels, std::span<const int> train_rows);

double information_value(const BinSpec& spec);

struct SelectionEntry {
    std::string feature;
    double iv = 0.0;
    double vif = 0.0;  // VIF at removal time; final VIF for kept features
    std::string reason;  // IV_LOW | IV_HIGH | VIF | KEPT
};

struct SelectionReport {
    std::vector<SelectionEntry> entries;
    std::vector<std::string> retained;
};

// Iterative VIF elimination over WoE-encoded training columns: drop the
// max-VIF feature (ties to the lexicographically smaller name) while the max
// exceeds `vif_max`; perfect collinearity counts as infinite VIF.
struct VifResult {
    std::vector<std::string> removed;           // in removal order
    std::map<std::string, double> vif_at_removal;
    std::map<std::string, double> final_vif;    // for survivors
};
VifResult vif_filter(const std::vector<std::string>& names,
                     const std::vector<std::vector<double>>& columns, double vif_max = 10.0);

struct WoeConfig {
    int n_bins = 5;
    double iv_low = 0.01;   // exclusive bounds: keep iv_low < IV < iv_high
    double iv_high = 0.50;
    double vif_max = 10.0;
};

// Full fitted pipeline: impute -> per-feature WoE -> IV screen -> VIF loop.
class WoePipeline {
public:
    static WoePipeline fit(const StructuredFrame& raw, std::span<const int> labels,
                           std::span<const int> train_rows, const WoeConfig& cfg = {});

    // Encodes the retained features for every row; column order matches
    // selected_features().
    std::vector<std::vector<double>> encode(const StructuredFrame& raw) const;

    const std::vector<std::string>& selected_features() const { return report_.retained; }
    const SelectionReport& report() const { return report_; }
    const std::vector<BinSpec>& specs() const { return specs_; }  // all fitted features

    nlohmann::json to_json() const;
    static WoePipeline from_json(const nlohmann::json& j);

private:
    ImputeStats impute_;
    std::vector<BinSpec> specs_;
    SelectionReport report_;
    WoeConfig cfg_;
};

}  // namespace credit
