#include "credit/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace credit {

std::size_t StructuredFrame::n_rows() const {
    if (!numeric.empty()) return numeric.front().values.size();
    if (!categorical.empty()) return categorical.front().values.size();
    return 0;
}

void StructuredFrame::validate() const {
    const std::size_t n = n_rows();
    for (const auto& c : numeric)
        if (c.values.size() != n) throw std::invalid_argument("ragged numeric column " + c.name);
    for (const auto& c : categorical)
        if (c.values.size() != n)
            throw std::invalid_argument("ragged categorical column " + c.name);
}

ImputeStats fit_impute(const StructuredFrame& frame, std::span<const int> train_rows) {
    ImputeStats stats;
    for (const auto& col : frame.numeric) {
        double sum = 0.0;
        int n = 0;
        for (int r : train_rows) {
            const double v = col.values[static_cast<std::size_t>(r)];
            if (!std::isnan(v)) {
                sum += v;
                ++n;
            }
        }
        stats.numeric_means[col.name] = n > 0 ? sum / n : 0.0;
    }
    return stats;
}

void apply_impute(StructuredFrame& frame, const ImputeStats& stats) {
    for (auto& col : frame.numeric) {
        const auto it = stats.numeric_means.find(col.name);
        const double mean = it == stats.numeric_means.end() ? 0.0 : it->second;
        for (double& v : col.values)
            if (std::isnan(v)) v = mean;
    }
    for (auto& col : frame.categorical)
        for (auto& v : col.values)
            if (v.empty()) v = kMissingCategory;
}

namespace {
void check_labels(std::span<const int> labels, std::span<const int> train_rows) {
    bool has0 = false, has1 = false;
    for (int r : train_rows) {
        const int y = labels[static_cast<std::size_t>(r)];
        if (y != 0 && y != 1) throw std::invalid_argument("labels must be 0/1");
        (y == 1 ? has1 : has0) = true;
    }
    if (!has0 || !has1) throw SingleClassLabels("training labels contain a single class");
}

void finalize_woe(BinSpec& spec, const std::vector<double>& good, const std::vector<double>& bad) {
    const std::size_t n_bins = good.size();
    double total_good = 0.0, total_bad = 0.0;
    for (std::size_t b = 0; b < n_bins; ++b) {
        total_good += good[b] + 0.5;
        total_bad += bad[b] + 0.5;
    }
    spec.woe.resize(n_bins);
    spec.good_share.resize(n_bins);
    spec.bad_share.resize(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b) {
        spec.good_share[b] = (good[b] + 0.5) / total_good;
        spec.bad_share[b] = (bad[b] + 0.5) / total_bad;
        spec.woe[b] = std::log(spec.good_share[b] / spec.bad_share[b]);
    }
}
}  // namespace

int BinSpec::bin_of_numeric(double v) const {
    const auto it = std::upper_bound(cuts.begin(), cuts.end(), v);
    return static_cast<int>(it - cuts.begin());
}

int BinSpec::bin_of_category(const std::string& v) const {
    auto it = category_to_bin.find(v);
    if (it == category_to_bin.end()) it = category_to_bin.find(kMissingCategory);
    return it->second;
}

BinSpec fit_woe_numeric(const std::string& name, std::span<const double> values,
                        std::span<const int> labels, std::span<const int> train_rows,
                        int n_bins) {
    check_labels(labels, train_rows);
    if (n_bins < 2) throw std::invalid_argument("need at least 2 bins");

    std::vector<double> train_vals;
    train_vals.reserve(train_rows.size());
    for (int r : train_rows) train_vals.push_back(values[static_cast<std::size_t>(r)]);
    std::sort(train_vals.begin(), train_vals.end());

    BinSpec spec;
    spec.feature = name;
    spec.continuous = true;
    for (int b = 1; b < n_bins; ++b) {
        const double q = static_cast<double>(b) / n_bins;
        const double pos = q * (train_vals.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const double frac = pos - lo;
        const double cut = train_vals[lo] * (1.0 - frac) +
                           train_vals[std::min(lo + 1, train_vals.size() - 1)] * frac;
        if (spec.cuts.empty() || cut > spec.cuts.back()) spec.cuts.push_back(cut);
    }

    const std::size_t bins = spec.cuts.size() + 1;
    std::vector<double> good(bins, 0.0), bad(bins, 0.0);
    for (int r : train_rows) {
        const int b = spec.bin_of_numeric(values[static_cast<std::size_t>(r)]);
        (labels[static_cast<std::size_t>(r)] == 1 ? bad : good)[static_cast<std::size_t>(b)] += 1.0;
    }
    finalize_woe(spec, good, bad);
    return spec;
}

BinSpec fit_woe_categorical(const std::string& name, const std::vector<std::string>& values,
                            std::span<const int> labels, std::span<const int> train_rows) {
    check_labels(labels, train_rows);
    BinSpec spec;
    spec.feature = name;
    spec.continuous = false;

    std::set<std::string> cats;
    for (int r : train_rows) cats.insert(values[static_cast<std::size_t>(r)]);
    cats.insert(kMissingCategory);  // unseen categories land here at inference
    int next = 0;
    for (const auto& c : cats) spec.category_to_bin[c] = next++;

    std::vector<double> good(cats.size(), 0.0), bad(cats.size(), 0.0);
    for (int r : train_rows) {
        const int b = spec.bin_of_category(values[static_cast<std::size_t>(r)]);
        (labels[static_cast<std::size_t>(r)] == 1 ? bad : good)[static_cast<std::size_t>(b)] += 1.0;
    }
    finalize_woe(spec, good, bad);
    return spec;
}

double information_value(const BinSpec& spec) {
    double iv = 0.0;
    for (std::size_t b = 0; b < spec.woe.size(); ++b)
        iv += (spec.good_share[b] - spec.bad_share[b]) * spec.woe[b];
    return iv;
}

VifResult vif_filter(const std::vector<std::string>& names,
                     const std::vector<std::vector<double>>& columns, double vif_max) {
    if (names.size() != columns.size()) throw std::invalid_argument("vif inputs misaligned");
    VifResult result;
    if (names.empty()) return result;
    const std::size_t n = columns.front().size();

    std::vector<std::size_t> active(names.size());
    for (std::size_t i = 0; i < active.size(); ++i) active[i] = i;

    auto compute_vif = [&](std::size_t target, const std::vector<std::size_t>& others) {
        const auto& y_col = columns[target];
        double mean = 0.0;
        for (double v : y_col) mean += v;
        mean /= static_cast<double>(n);
        double sst = 0.0;
        for (double v : y_col) sst += (v - mean) * (v - mean);
        if (sst <= 1e-12) return std::numeric_limits<double>::infinity();  // constant column
        if (others.empty()) return 1.0;

        Eigen::MatrixXd X(n, others.size() + 1);
        Eigen::VectorXd y(n);
        for (std::size_t r = 0; r < n; ++r) {
            X(static_cast<Eigen::Index>(r), 0) = 1.0;
            for (std::size_t c = 0; c < others.size(); ++c)
                X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c + 1)) =
                    columns[others[c]][r];
            y(static_cast<Eigen::Index>(r)) = y_col[r];
        }
        const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
        const double ssr = (y - X * beta).squaredNorm();
        const double r2 = 1.0 - ssr / sst;
        if (r2 >= 1.0 - 1e-12) return std::numeric_limits<double>::infinity();
        return 1.0 / (1.0 - r2);
    };

    for (;;) {
        std::size_t worst = active.size();
        double worst_vif = -1.0;
        std::vector<double> vifs(active.size());
        for (std::size_t i = 0; i < active.size(); ++i) {
            std::vector<std::size_t> others;
            for (std::size_t j = 0; j < active.size(); ++j)
                if (j != i) others.push_back(active[j]);
            vifs[i] = compute_vif(active[i], others);
            const bool beats = vifs[i] > worst_vif ||
                               (vifs[i] == worst_vif && worst < active.size() &&
                                names[active[i]] < names[active[worst]]);
            if (beats) {
                worst = i;
                worst_vif = vifs[i];
            }
        }
        if (worst_vif > vif_max && active.size() > 1) {
            const std::size_t victim = active[worst];
            result.removed.push_back(names[victim]);
            result.vif_at_removal[names[victim]] = worst_vif;
            active.erase(active.begin() + static_cast<std::ptrdiff_t>(worst));
            continue;
        }
        for (std::size_t i = 0; i < active.size(); ++i)
            result.final_vif[names[active[i]]] = vifs[i];
        break;
    }
    return result;
}

// --- WoePipeline --------------------------------------------------------------

WoePipeline WoePipeline::fit(const StructuredFrame& raw, std::span<const int> labels,
                             std::span<const int> train_rows, const WoeConfig& cfg) {
    raw.validate();
    check_labels(labels, train_rows);

    WoePipeline p;
    p.cfg_ = cfg;
    p.impute_ = fit_impute(raw, train_rows);
    StructuredFrame frame = raw;
    apply_impute(frame, p.impute_);

    for (const auto& col : frame.numeric)
        p.specs_.push_back(fit_woe_numeric(col.name, col.values, labels, train_rows, cfg.n_bins));
    for (const auto& col : frame.categorical)
        p.specs_.push_back(fit_woe_categorical(col.name, col.values, labels, train_rows));

    std::vector<std::string> iv_survivors;
    std::map<std::string, double> ivs;
    for (const auto& spec : p.specs_) {
        const double iv = information_value(spec);
        ivs[spec.feature] = iv;
        SelectionEntry e;
        e.feature = spec.feature;
        e.iv = iv;
        if (iv <= cfg.iv_low)
            e.reason = "IV_LOW";
        else if (iv >= cfg.iv_high)
            e.reason = "IV_HIGH";
        else {
            e.reason = "KEPT";  // provisional; VIF loop may still remove it
            iv_survivors.push_back(spec.feature);
        }
        p.report_.entries.push_back(e);
    }

    std::vector<std::vector<double>> train_cols;
    for (const auto& name : iv_survivors) {
        const auto spec_it = std::find_if(p.specs_.begin(), p.specs_.end(),
                                          [&](const BinSpec& s) { return s.feature == name; });
        std::vector<double> col;
        col.reserve(train_rows.size());
        for (int r : train_rows) {
            double v = 0.0;
            if (spec_it->continuous) {
                for (const auto& c : frame.numeric)
                    if (c.name == name) v = spec_it->encode_numeric(c.values[static_cast<std::size_t>(r)]);
            } else {
                for (const auto& c : frame.categorical)
                    if (c.name == name) v = spec_it->encode_category(c.values[static_cast<std::size_t>(r)]);
            }
            col.push_back(v);
        }
        train_cols.push_back(std::move(col));
    }

    const VifResult vif = vif_filter(iv_survivors, train_cols, cfg.vif_max);
    for (auto& e : p.report_.entries) {
        if (e.reason != "KEPT") continue;
        const auto removed_it = vif.vif_at_removal.find(e.feature);
        if (removed_it != vif.vif_at_removal.end()) {
            e.reason = "VIF";
            e.vif = removed_it->second;
        } else {
            e.vif = vif.final_vif.at(e.feature);
            p.report_.retained.push_back(e.feature);
        }
    }
    return p;
}

std::vector<std::vector<double>> WoePipeline::encode(const StructuredFrame& raw) const {
    raw.validate();
    StructuredFrame frame = raw;
    apply_impute(frame, impute_);
    const std::size_t n = frame.n_rows();
    std::vector<std::vector<double>> out(n, std::vector<double>(report_.retained.size(), 0.0));
    for (std::size_t f = 0; f < report_.retained.size(); ++f) {
        const std::string& name = report_.retained[f];
        const auto spec_it = std::find_if(specs_.begin(), specs_.end(),
                                          [&](const BinSpec& s) { return s.feature == name; });
        if (spec_it->continuous) {
            for (const auto& c : frame.numeric)
                if (c.name == name)
                    for (std::size_t r = 0; r < n; ++r)
                        out[r][f] = spec_it->encode_numeric(c.values[r]);
        } else {
            for (const auto& c : frame.categorical)
                if (c.name == name)
                    for (std::size_t r = 0; r < n; ++r)
                        out[r][f] = spec_it->encode_category(c.values[r]);
        }
    }
    return out;
}

nlohmann::json WoePipeline::to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["config"] = {{"n_bins", cfg_.n_bins},
                   {"iv_low", cfg_.iv_low},
                   {"iv_high", cfg_.iv_high},
                   {"vif_max", cfg_.vif_max}};
    j["impute_means"] = impute_.numeric_means;
    j["specs"] = nlohmann::json::array();
    for (const auto& s : specs_) {
        nlohmann::json js;
        js["feature"] = s.feature;
        js["continuous"] = s.continuous;
        js["cuts"] = s.cuts;
        js["categories"] = s.category_to_bin;
        js["woe"] = s.woe;
        js["good_share"] = s.good_share;
        js["bad_share"] = s.bad_share;
        j["specs"].push_back(js);
    }
    j["report"] = nlohmann::json::array();
    for (const auto& e : report_.entries)
        j["report"].push_back({{"feature", e.feature}, {"iv", e.iv}, {"vif", e.vif},
                               {"reason", e.reason}});
    j["retained"] = report_.retained;
    return j;
}

WoePipeline WoePipeline::from_json(const nlohmann::json& j) {
    WoePipeline p;
    p.cfg_.n_bins = j.at("config").at("n_bins").get<int>();
    p.cfg_.iv_low = j.at("config").at("iv_low").get<double>();
    p.cfg_.iv_high = j.at("config").at("iv_high").get<double>();
    p.cfg_.vif_max = j.at("config").at("vif_max").get<double>();
    p.impute_.numeric_means = j.at("impute_means").get<std::map<std::string, double>>();
    for (const auto& js : j.at("specs")) {
        BinSpec s;
        s.feature = js.at("feature").get<std::string>();
        s.continuous = js.at("continuous").get<bool>();
        s.cuts = js.at("cuts").get<std::vector<double>>();
        s.category_to_bin = js.at("categories").get<std::map<std::string, int>>();
        s.woe = js.at("woe").get<std::vector<double>>();
        s.good_share = js.at("good_share").get<std::vector<double>>();
        s.bad_share = js.at("bad_share").get<std::vector<double>>();
        p.specs_.push_back(std::move(s));
    }
    for (const auto& je : j.at("report")) {
        SelectionEntry e;
        e.feature = je.at("feature").get<std::string>();
        e.iv = je.at("iv").get<double>();
        e.vif = je.at("vif").get<double>();
        e.reason = je.at("reason").get<std::string>();
        p.report_.entries.push_back(std::move(e));
    }
    p.report_.retained = j.at("retained").get<std::vector<std::string>>();
    return p;
}

}  // namespace credit
