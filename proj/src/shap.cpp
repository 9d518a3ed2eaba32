#include "credit/shap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "credit/climate.hpp"

namespace credit {

namespace {
double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    k = std::min(k, n - k);
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r *= static_cast<double>(n - i + 1) / i;
    return r;
}

struct WeightedCoalition {
    std::vector<bool> members;
    double weight;
};

// Shapley kernel mass of one size class: sum of per-coalition weights.
double size_class_mass(int m, int s) {
    return static_cast<double>(m - 1) / (static_cast<double>(s) * (m - s));
}
}  // namespace

ShapResult kernel_shap(int n_features, const CoalitionValueFn& value_fn, double base_value,
                       double full_value, const ShapConfig& cfg) {
    const int m = n_features;
    if (m < 1) throw std::invalid_argument("kernel_shap needs at least one feature");
    ShapResult result;
    result.base_value = base_value;
    result.full_value = full_value;
    if (m == 1) {
        result.values = {full_value - base_value};
        return result;
    }
    if (cfg.budget < 2 * m)
        throw BudgetTooSmall("coalition budget " + std::to_string(cfg.budget) +
                             " below twice the feature count " + std::to_string(m));

    // Enumerate complete size classes from the outside in while they fit the
    // budget; remaining size pairs are sampled antithetically (subset plus
    // complement) with each class's kernel mass spread over its draws.
    std::vector<WeightedCoalition> coalitions;
    Rng rng(cfg.seed, "kernel_shap");

    std::vector<int> sampled_pairs;  // representative size s <= m/2
    int budget_left = cfg.budget;
    for (int s = 1; s <= m / 2; ++s) {
        const int partner = m - s;
        std::vector<int> sizes = {s};
        if (partner != s) sizes.push_back(partner);
        double class_count = 0.0;
        for (int size : sizes) class_count += binomial(m, size);
        if (class_count <= static_cast<double>(budget_left)) {
            for (int size : sizes) {
                const double w = size_class_mass(m, size) / binomial(m, size);
                std::vector<bool> members(static_cast<std::size_t>(m), false);
                for (int j = 0; j < size; ++j) members[static_cast<std::size_t>(j)] = true;
                // lexicographic subset enumeration
                for (;;) {
                    coalitions.push_back({members, w});
                    int i = m - 1, ones = 0;
                    while (i >= 0 && members[static_cast<std::size_t>(i)]) {
                        members[static_cast<std::size_t>(i)] = false;
                        ++ones;
                        --i;
                    }
                    while (i >= 0 && !members[static_cast<std::size_t>(i)]) --i;
                    if (i < 0) break;
                    members[static_cast<std::size_t>(i)] = false;
                    for (int j = i + 1; j <= i + ones + 1; ++j)
                        members[static_cast<std::size_t>(j)] = true;
                }
                budget_left -= static_cast<int>(binomial(m, size));
            }
        } else {
            sampled_pairs.push_back(s);
        }
    }

    if (!sampled_pairs.empty() && budget_left >= 2) {
        auto pair_mass = [&](int s) {
            return s == m - s ? size_class_mass(m, s)
                              : size_class_mass(m, s) + size_class_mass(m, m - s);
        };
        double mass_left = 0.0;
        for (int s : sampled_pairs) mass_left += pair_mass(s);

        const int draw_budget = budget_left / 2;  // each draw adds two coalitions
        std::vector<int> draws(sampled_pairs.size(), 0);
        int used = 0;
        for (std::size_t i = 0; i < sampled_pairs.size(); ++i) {
            draws[i] = std::max(1, static_cast<int>(std::floor(
                                       draw_budget * pair_mass(sampled_pairs[i]) / mass_left)));
            used += draws[i];
        }
        for (std::size_t i = 0; used > draw_budget && i < draws.size(); ++i) {
            const int give = std::min(draws[i] - 1, used - draw_budget);
            draws[i] -= give;
            used -= give;
        }

        std::vector<int> order(static_cast<std::size_t>(m));
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = 0; i < sampled_pairs.size(); ++i) {
            const int s = sampled_pairs[i];
            const int n_draws = draws[i];
            const bool middle = s == m - s;
            const double w_subset =
                size_class_mass(m, s) / (middle ? 2.0 * n_draws : 1.0 * n_draws);
            const double w_complement =
                middle ? w_subset : size_class_mass(m, m - s) / n_draws;
            for (int k = 0; k < n_draws; ++k) {
                rng.shuffle(order);
                std::vector<bool> members(static_cast<std::size_t>(m), false);
                for (int j = 0; j < s; ++j)
                    members[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])] = true;
                std::vector<bool> complement(static_cast<std::size_t>(m));
                for (int j = 0; j < m; ++j)
                    complement[static_cast<std::size_t>(j)] = !members[static_cast<std::size_t>(j)];
                coalitions.push_back({std::move(members), w_subset});
                coalitions.push_back({std::move(complement), w_complement});
            }
        }
    }

    std::vector<std::vector<bool>> queries;
    queries.reserve(coalitions.size());
    for (const auto& c : coalitions) queries.push_back(c.members);
    const std::vector<double> values = value_fn(queries);
    if (values.size() != coalitions.size())
        throw std::runtime_error("coalition value function returned wrong count");

    // Weighted regression of v(S) - base on membership with the sum pinned to
    // full - base through a KKT system, keeping every feature symmetric.
    const double span = full_value - base_value;
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 1);
    Eigen::VectorXd row(m);
    for (std::size_t c = 0; c < coalitions.size(); ++c) {
        const auto& members = coalitions[c].members;
        const double w = coalitions[c].weight;
        for (int j = 0; j < m; ++j) row(j) = members[static_cast<std::size_t>(j)] ? 1.0 : 0.0;
        kkt.topLeftCorner(m, m).noalias() += w * row * row.transpose();
        rhs.head(m).noalias() += w * (values[c] - base_value) * row;
    }
    for (int j = 0; j < m; ++j) {
        kkt(j, m) = 1.0;
        kkt(m, j) = 1.0;
    }
    rhs(m) = span;
    const Eigen::VectorXd phi = kkt.colPivHouseholderQr().solve(rhs);

    result.values.assign(static_cast<std::size_t>(m), 0.0);
    for (int j = 0; j < m; ++j) result.values[static_cast<std::size_t>(j)] = phi(j);
    // drive the constraint through exactly despite finite solver precision
    double sum = 0.0;
    for (double v : result.values) sum += v;
    const double correction = (span - sum) / m;
    for (double& v : result.values) v += correction;
    return result;
}

// --- fusion-model explainer -----------------------------------------------------

FusionShapExplainer::FusionShapExplainer(const FusionModel& model, const DataBundle& data,
                                         std::vector<int> background_rows, bool include_text_flag)
    : model_(&model),
      data_(&data),
      background_(std::move(background_rows)),
      include_text_flag_(include_text_flag) {
    if (background_.empty()) throw std::invalid_argument("empty SHAP background");
    n_structured_ = model.config().mask.structured ? data.n_structured() : 0;
    climate_factors_ = model.config().mask.climate ? data.climate_factors() : 0;
    n_climate_cells_ = model.config().mask.climate ? 12 * climate_factors_ : 0;
}

int FusionShapExplainer::n_features() const {
    return n_structured_ + n_climate_cells_ + (include_text_flag_ ? 1 : 0);
}

std::string FusionShapExplainer::feature_name(int j) const {
    if (j < n_structured_) return "structured_" + std::to_string(j);
    if (j < n_structured_ + n_climate_cells_)
        return std::string(kFactorNames[static_cast<std::size_t>(climate_factor(j))]) + "_t" +
               std::to_string(climate_month_offset(j));
    return "text";
}

int FusionShapExplainer::climate_factor(int j) const {
    const int cell = j - n_structured_;
    return cell % climate_factors_;
}

int FusionShapExplainer::climate_month_offset(int j) const {
    const int cell = j - n_structured_;
    return cell / climate_factors_ - 12;  // row 0 is month t-12
}

double FusionShapExplainer::feature_value(int row, int j) const {
    if (j < n_structured_)
        return data_->structured[static_cast<std::size_t>(row)][static_cast<std::size_t>(j)];
    if (j < n_structured_ + n_climate_cells_) {
        const int cell = j - n_structured_;
        return data_->climate[static_cast<std::size_t>(
            static_cast<std::int64_t>(row) * n_climate_cells_ + cell)];
    }
    return 1.0;
}

std::vector<double> FusionShapExplainer::numeric_view(int row) const {
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(n_structured_ + n_climate_cells_));
    for (int j = 0; j < n_structured_ + n_climate_cells_; ++j) v.push_back(feature_value(row, j));
    return v;
}

ShapResult FusionShapExplainer::explain(int row, const ShapConfig& cfg) const {
    const int m = n_features();
    const std::vector<double> x = numeric_view(row);
    std::vector<std::vector<double>> bg;
    bg.reserve(background_.size());
    for (int r : background_) bg.push_back(numeric_view(r));

    const bool uses_text = model_->config().mask.text;

    // v(S): average over background rows of the model on mixed inputs
    auto value_fn = [&](const std::vector<std::vector<bool>>& coalitions) {
        const int n_bg = static_cast<int>(background_.size());
        const std::size_t total = coalitions.size() * static_cast<std::size_t>(n_bg);

        DataBundle scratch;
        scratch.loan_ids.assign(total, "shap");
        scratch.labels.assign(total, 0);
        if (n_structured_ > 0)
            scratch.structured.assign(total, std::vector<double>(static_cast<std::size_t>(n_structured_)));
        else if (model_->config().mask.structured)
            scratch.structured.assign(total, {});
        if (n_climate_cells_ > 0)
            scratch.climate = Tensor(std::vector<int>{static_cast<int>(total), 12, climate_factors_});
        if (uses_text) scratch.texts.assign(total, {});

        std::size_t at = 0;
        for (const auto& members : coalitions) {
            const bool text_from_instance =
                !include_text_flag_ || members[static_cast<std::size_t>(m - 1)];
            for (int b = 0; b < n_bg; ++b, ++at) {
                for (int j = 0; j < n_structured_; ++j)
                    scratch.structured[at][static_cast<std::size_t>(j)] =
                        members[static_cast<std::size_t>(j)] ? x[static_cast<std::size_t>(j)]
                                                             : bg[static_cast<std::size_t>(b)][static_cast<std::size_t>(j)];
                for (int c = 0; c < n_climate_cells_; ++c) {
                    const int j = n_structured_ + c;
                    scratch.climate[at * static_cast<std::size_t>(n_climate_cells_) + static_cast<std::size_t>(c)] =
                        members[static_cast<std::size_t>(j)] ? x[static_cast<std::size_t>(j)]
                                                             : bg[static_cast<std::size_t>(b)][static_cast<std::size_t>(j)];
                }
                if (uses_text)
                    scratch.texts[at] =
                        text_from_instance ? data_->texts[static_cast<std::size_t>(row)]
                                           : data_->texts[static_cast<std::size_t>(background_[static_cast<std::size_t>(b)])];
            }
        }

        std::vector<int> all_rows(total);
        std::iota(all_rows.begin(), all_rows.end(), 0);
        const std::vector<double> preds = model_->predict(scratch, all_rows);

        std::vector<double> out(coalitions.size(), 0.0);
        for (std::size_t c = 0; c < coalitions.size(); ++c) {
            double sum = 0.0;
            for (int b = 0; b < n_bg; ++b) sum += preds[c * static_cast<std::size_t>(n_bg) + static_cast<std::size_t>(b)];
            out[c] = sum / n_bg;
        }
        return out;
    };

    // base = v(empty), full = f(x)
    const std::vector<bool> empty(static_cast<std::size_t>(m), false);
    const std::vector<bool> full(static_cast<std::size_t>(m), true);
    const double base_value = value_fn({empty})[0];
    const double full_value = value_fn({full})[0];

    return kernel_shap(m, value_fn, base_value, full_value, cfg);
}

// --- uncertain cases --------------------------------------------------------------

UncertainCaseSet select_uncertain_cases(const std::vector<double>& structured_probs,
                                        const std::vector<double>& combined_probs,
                                        const std::vector<int>& labels, double pct_low,
                                        double pct_high, int top_k) {
    if (structured_probs.size() != combined_probs.size() ||
        structured_probs.size() != labels.size())
        throw std::invalid_argument("uncertain-case vectors misaligned");
    if (structured_probs.empty()) throw EmptyWindow("no cases supplied");

    UncertainCaseSet set;
    set.window_low = quantile(structured_probs, pct_low);
    set.window_high = quantile(structured_probs, pct_high);
    set.degenerate = std::all_of(structured_probs.begin(), structured_probs.end(),
                                 [&](double p) { return p == structured_probs.front(); });

    std::vector<std::pair<double, int>> eligible;  // (improvement, row)
    for (std::size_t i = 0; i < structured_probs.size(); ++i) {
        const double ps = structured_probs[i];
        if (ps < set.window_low || ps > set.window_high) continue;
        const double y = labels[i];
        const double gain = std::abs(ps - y) - std::abs(combined_probs[i] - y);
        if (gain > 0.0) eligible.push_back({gain, static_cast<int>(i)});
    }
    if (eligible.empty() && !set.degenerate)
        throw EmptyWindow("no uncertain cases improved under the combined model");

    std::sort(eligible.begin(), eligible.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    const std::size_t take = std::min<std::size_t>(eligible.size(), static_cast<std::size_t>(top_k));
    for (std::size_t i = 0; i < take; ++i) {
        set.rows.push_back(eligible[i].second);
        set.improvement.push_back(eligible[i].first);
    }
    return set;
}

FactorAttribution factor_attribution(const FusionShapExplainer& explainer,
                                     const std::vector<int>& rows,
                                     const std::vector<ShapResult>& results) {
    if (rows.size() != results.size())
        throw std::invalid_argument("attribution rows/results misaligned");
    const int n_struct = explainer.n_structured();
    const int n_climate = explainer.n_climate();
    if (n_climate == 0) throw std::invalid_argument("model has no climate branch to attribute");
    const int factors = n_climate / 12;

    FactorAttribution fa;
    fa.mean_abs_shap.assign(static_cast<std::size_t>(factors), 0.0);
    fa.mean_signed_shap.assign(static_cast<std::size_t>(factors), 0.0);
    fa.distributions.assign(static_cast<std::size_t>(factors),
                            std::vector<std::vector<std::pair<double, double>>>(12));

    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int c = 0; c < n_climate; ++c) {
            const int j = n_struct + c;
            const int factor = explainer.climate_factor(j);
            const int month = explainer.climate_month_offset(j) + 12;  // 0..11
            const double shap = results[i].values[static_cast<std::size_t>(j)];
            fa.mean_abs_shap[static_cast<std::size_t>(factor)] += std::abs(shap);
            fa.mean_signed_shap[static_cast<std::size_t>(factor)] += shap;
            fa.distributions[static_cast<std::size_t>(factor)][static_cast<std::size_t>(month)]
                .push_back({explainer.feature_value(rows[i], j), shap});
        }
    }
    const double denom = static_cast<double>(rows.size()) * 12.0;
    for (int f = 0; f < factors; ++f) {
        fa.mean_abs_shap[static_cast<std::size_t>(f)] /= denom;
        fa.mean_signed_shap[static_cast<std::size_t>(f)] /= denom;
    }
    return fa;
}

DataBundle single_factor_bundle(const DataBundle& data, int factor) {
    const int n = data.n_rows();
    const int T = data.climate.dim(1), F = data.climate.dim(2);
    if (factor < 0 || factor >= F) throw std::out_of_range("climate factor index");
    DataBundle out = data;
    out.climate = Tensor(std::vector<int>{n, T, 1});
    for (int i = 0; i < n; ++i)
        for (int t = 0; t < T; ++t)
            out.climate[static_cast<std::size_t>(static_cast<std::int64_t>(i) * T + t)] =
                data.climate[static_cast<std::size_t>((static_cast<std::int64_t>(i) * T + t) * F + factor)];
    return out;
}

AblationResult per_factor_ablation(const ModelConfig& fusion_cfg, const DataBundle& data,
                                   const SplitPlan& split, int resamples,
                                   std::uint64_t metric_seed) {
    const std::vector<int> test_rows = split.rows(Split::Test);
    AblationResult result;
    std::vector<std::vector<double>> prediction_vectors;

    auto evaluate = [&](const std::string& name, const ModelConfig& cfg,
                        const DataBundle& bundle) {
        const TrainResult r = train_model(cfg, bundle, split);
        const std::vector<double> preds = r.model->predict(bundle, test_rows);
        ScoreSet s;
        s.scores = preds;
        for (int row : test_rows) s.labels.push_back(bundle.labels[static_cast<std::size_t>(row)]);
        AblationEntry entry;
        entry.model_name = name;
        entry.metrics = bootstrap_summary({s}, resamples, metric_seed);
        result.entries.push_back(std::move(entry));
        prediction_vectors.push_back(preds);
    };

    ModelConfig s_only = fusion_cfg;
    s_only.mask = ModalityMask::parse("S");
    evaluate("S", s_only, data);

    const int factors = data.climate_factors();
    for (int f = 0; f < factors; ++f) {
        ModelConfig cfg = fusion_cfg;
        cfg.mask = ModalityMask::parse("S+C");
        evaluate("S+" + std::string(kFactorNames[static_cast<std::size_t>(f)]), cfg,
                 single_factor_bundle(data, f));
    }

    result.correlations = spearman_matrix(prediction_vectors);
    return result;
}

}  // namespace credit
