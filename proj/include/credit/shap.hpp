#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "credit/metrics.hpp"
#include "credit/model.hpp"

namespace credit {

struct BudgetTooSmall : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyWindow : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapResult {
    double base_value = 0.0;  // value of the empty coalition
    double full_value = 0.0;  // model output on the explained instance
    std::vector<double> values;
};

// Returns v(S) for each queried coalition (true = feature comes from the
// explained instance, false = from the background distribution).
using CoalitionValueFn =
    std::function<std::vector<double>(const std::vector<std::vector<bool>>&)>;

struct ShapConfig {
    int budget = 2048;  // coalition evaluations (empty/full come for free)
    std::uint64_t seed = 0;
};

// Kernel SHAP: Shapley-kernel-weighted least squares over coalitions, with
// the sum constraint driven through by eliminating the last feature. When the
// budget covers all 2^M - 2 proper coalitions the solution is the exact
// Shapley value.
ShapResult kernel_shap(int n_features, const CoalitionValueFn& value_fn, double base_value,
                       double full_value, const ShapConfig& cfg);

// Per-instance explainer for a fusion model over the flattened feature space
// [structured WoE ... | climate factor-months ... | text presence flag].
// Absent features are replaced by background-row values (marginal
// expectation); text enters as one grouped feature.
class FusionShapExplainer {
public:
    FusionShapExplainer(const FusionModel& model, const DataBundle& data,
                        std::vector<int> background_rows, bool include_text_flag);

    int n_features() const;
    int n_structured() const { return n_structured_; }
    int n_climate() const { return n_climate_cells_; }
    bool has_text_flag() const { return include_text_flag_; }

    ShapResult explain(int row, const ShapConfig& cfg) const;

    std::string feature_name(int j) const;
    // climate cell helpers; j must index a climate feature
    int climate_factor(int j) const;
    int climate_month_offset(int j) const;  // -12 .. -1
    double feature_value(int row, int j) const;

private:
    std::vector<double> numeric_view(int row) const;  // structured + climate cells

    const FusionModel* model_;
    const DataBundle* data_;
    std::vector<int> background_;
    bool include_text_flag_;
    int n_structured_;
    int n_climate_cells_;
    int climate_factors_;
};

struct UncertainCaseSet {
    std::vector<int> rows;               // selected, best improvement first
    std::vector<double> improvement;     // |p_s - y| - |p_c - y|, aligned with rows
    double window_low = 0.0;             // percentile bounds on structured probs
    double window_high = 0.0;
    bool degenerate = false;             // all structured probabilities equal
};

// Loans whose structured-only probability falls in the percentile window and
// whose combined-model probability moved toward the label.
UncertainCaseSet select_uncertain_cases(const std::vector<double>& structured_probs,
                                        const std::vector<double>& combined_probs,
                                        const std::vector<int>& labels,
                                        double pct_low = 0.30, double pct_high = 0.70,
                                        int top_k = 500);

struct FactorAttribution {
    std::vector<double> mean_abs_shap;     // per factor
    std::vector<double> mean_signed_shap;  // per factor
    // [factor][month 0..11] -> (feature_value, shap_value) samples
    std::vector<std::vector<std::vector<std::pair<double, double>>>> distributions;
};

FactorAttribution factor_attribution(const FusionShapExplainer& explainer,
                                     const std::vector<int>& rows,
                                     const std::vector<ShapResult>& results);

struct AblationEntry {
    std::string model_name;  // "S", "S+di", ...
    std::vector<MetricSummary> metrics;
};

struct AblationResult {
    std::vector<AblationEntry> entries;  // S first, then one per factor
    SpearmanMatrix correlations;         // matching order
};

// Structured + one climate factor at a time: trains the four single-factor
// fusion models plus the structured benchmark, bootstraps their test metrics
// and cross-correlates the prediction rankings.
AblationResult per_factor_ablation(const ModelConfig& fusion_cfg, const DataBundle& data,
                                   const SplitPlan& split, int resamples,
                                   std::uint64_t metric_seed);

// (N,12,1) bundle view keeping a single climate factor.
DataBundle single_factor_bundle(const DataBundle& data, int factor);

}  // namespace credit
