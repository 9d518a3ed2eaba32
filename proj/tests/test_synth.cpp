#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "credit/metrics.hpp"
#include "credit/synth.hpp"

using namespace credit;

namespace {
GenSpec small_spec(std::uint64_t seed, int n_loans = 400) {
    GenSpec s;
    s.n_loans = n_loans;
    s.default_rate = 0.05;
    s.n_stations = 4;
    s.clim_year_from = 2004;  // shorter history keeps the suite fast
    s.clim_year_to = 2020;
    s.loan_year_from = 2021;
    s.loan_year_to = 2021;
    s.text_mean_len = 40;
    s.text_len_sd = 12;
    s.seed = seed;
    return s;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    return cov / std::sqrt(va * vb);
}
}  // namespace

TEST_CASE("weather generator: deterministic, physical, seasonal") {
    const GenSpec spec = small_spec(5);
    const auto a = gen_station_weather(spec);
    const auto b = gen_station_weather(spec);
    REQUIRE(a.size() == 4);
    REQUIRE(a[0].days.size() == b[0].days.size());
    for (std::size_t i = 0; i < a[0].days.size(); i += 371) {
        CHECK(a[0].days[i].t_avg == b[0].days[i].t_avg);
        CHECK(a[0].days[i].precip == b[0].days[i].precip);
    }
    int heavy = 0;
    for (const auto& st : a)
        for (const auto& d : st.days) {
            CHECK(d.precip >= 0.0);
            CHECK(d.t_min <= d.t_avg);
            CHECK(d.t_avg <= d.t_max);
            if (d.precip >= 50.0) ++heavy;
        }
    CHECK(heavy > 0);  // occasional exceedances beyond the 50 mm threshold
}

TEST_CASE("generated indices: HT mostly zero with rare spikes") {
    const GenSpec spec = small_spec(7);
    const SynthDataset data = generate_dataset(spec);
    int zero = 0, positive = 0;
    double max_ht = 0.0;
    for (const auto& row : data.index_rows) {
        if (row.ht == 0.0)
            ++zero;
        else
            ++positive;
        max_ht = std::max(max_ht, row.ht);
    }
    CHECK(positive > 0);
    CHECK(zero > positive * 3);  // sparse activations
    CHECK(max_ht < 12.0);
}

TEST_CASE("texts: saturation, envelope, determinism") {
    GenSpec spec = small_spec(9);
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        const auto t = gen_text(3.0, rng, spec);
        CHECK(text_sentiment(t) == doctest::Approx(1.0));  // only positive sentiment slots
    }

    spec.text_mean_len = 107;
    spec.text_len_sd = 38;
    Rng rng2(4);
    double total = 0.0;
    int min_len = 1 << 30, max_len = 0;
    const int draws = 4000;
    for (int i = 0; i < draws; ++i) {
        const auto t = gen_text(rng2.normal(), rng2, spec);
        total += static_cast<double>(t.size());
        min_len = std::min(min_len, static_cast<int>(t.size()));
        max_len = std::max(max_len, static_cast<int>(t.size()));
    }
    CHECK(total / draws == doctest::Approx(107.0).epsilon(10.0 / 107.0));
    CHECK(min_len >= 15);
    CHECK(max_len <= 326);

    Rng r1(5), r2(5);
    CHECK(gen_text(0.3, r1, spec) == gen_text(0.3, r2, spec));
}

TEST_CASE("dataset: determinism and schema conformance through the feature pipeline") {
    const GenSpec spec = small_spec(11);
    const SynthDataset a = generate_dataset(spec);
    const SynthDataset b = generate_dataset(spec);
    REQUIRE(a.loans.size() == 400);
    CHECK(a.intercept == b.intercept);
    for (std::size_t i = 0; i < a.loans.size(); i += 37) {
        CHECK(a.loans[i].label == b.loans[i].label);
        CHECK(a.loans[i].tokens == b.loans[i].tokens);
        CHECK(a.panels[i].values == b.panels[i].values);
    }

    // panels exist for every loan and are finite
    for (const auto& p : a.panels)
        for (const auto& row : p.values)
            for (double v : row) CHECK(std::isfinite(v));

    // structured frame feeds the WoE pipeline without errors
    const StructuredFrame frame = frame_from_attributes(a.loans, synth_structured_schema());
    CHECK(frame.numeric.size() == 8);
    CHECK(frame.categorical.size() == 14);
    std::vector<int> labels;
    for (const auto& l : a.loans) labels.push_back(l.label);
    std::vector<int> train_rows;
    for (int i = 0; i < 300; ++i) train_rows.push_back(i);
    const WoePipeline pipeline = WoePipeline::fit(frame, labels, train_rows);
    CHECK(!pipeline.selected_features().empty());
    const auto encoded = pipeline.encode(frame);
    CHECK(encoded.size() == a.loans.size());
}

TEST_CASE("dataset: realized default rate tracks the target") {
    GenSpec spec = small_spec(13, 1500);
    const SynthDataset data = generate_dataset(spec);
    int defaults = 0;
    for (const auto& l : data.loans) defaults += l.label;
    const double rate = static_cast<double>(defaults) / 1500.0;
    CHECK(rate > 0.03);
    CHECK(rate < 0.07);
}

TEST_CASE("dataset: low-rate profile lands near 64 defaulters out of 4172") {
    GenSpec spec;
    spec.n_loans = 4172;
    spec.default_rate = 64.0 / 4172.0;
    spec.n_stations = 5;
    spec.clim_year_from = 2008;
    spec.clim_year_to = 2020;
    spec.loan_year_from = 2021;
    spec.loan_year_to = 2021;
    spec.text_mean_len = 30;
    spec.text_len_sd = 8;
    spec.seed = 404;
    const SynthDataset data = generate_dataset(spec);
    int defaults = 0;
    for (const auto& l : data.loans) defaults += l.label;
    CHECK(std::abs(defaults - 64) <= 20);

    // 4,172 loans x 12 months = 50,064 loan-month observations per factor
    CHECK(data.panels.size() * kPanelMonths == 50064);
}

TEST_CASE("planted monotonicity: WLR beats the zero-coefficient factor across seeds") {
    int wins = 0;
    for (std::uint64_t seed = 60; seed < 65; ++seed) {
        GenSpec spec = small_spec(seed, 800);
        spec.beta_wlr = 1.5;
        spec.beta_ht = 0.0;  // zeroed factor for comparison
        spec.beta_cf = 0.0;
        const SynthDataset data = generate_dataset(spec);

        std::vector<double> wlr, ht, label;
        for (std::size_t i = 0; i < data.loans.size(); ++i) {
            double w = 0, h = 0;
            for (int t = 0; t < kPanelMonths; ++t) {
                w += data.panels[i].at(t, 1);
                h += data.panels[i].at(t, 2);
            }
            wlr.push_back(w);
            ht.push_back(h);
            label.push_back(data.loans[i].label);
        }
        const double c_wlr = pearson(wlr, label);
        const double c_ht = std::abs(pearson(ht, label));
        if (c_wlr > 0.0 && c_wlr > c_ht) ++wins;
    }
    CHECK(wins == 5);
}

TEST_CASE("planted lift: top-decile mean WLR defaults at least twice the bottom decile") {
    GenSpec spec = small_spec(77, 4000);
    spec.beta_wlr = 1.5;
    spec.beta_struct = 0.3;
    spec.beta_drought = 0.3;
    spec.beta_ht = 0.2;
    spec.beta_cf = 0.2;
    spec.beta_text = 0.3;
    const SynthDataset data = generate_dataset(spec);

    std::vector<std::pair<double, int>> by_wlr;
    for (std::size_t i = 0; i < data.loans.size(); ++i) {
        double w = 0;
        for (int t = 0; t < kPanelMonths; ++t) w += data.panels[i].at(t, 1);
        by_wlr.push_back({w, data.loans[i].label});
    }
    std::sort(by_wlr.begin(), by_wlr.end());
    const std::size_t decile = by_wlr.size() / 10;
    double bottom = 0, top = 0;
    for (std::size_t i = 0; i < decile; ++i) {
        bottom += by_wlr[i].second;
        top += by_wlr[by_wlr.size() - 1 - i].second;
    }
    CHECK(top >= 2.0 * std::max(bottom, 1.0));
}

TEST_CASE("null model: all-zero coefficients decouple features from labels") {
    GenSpec spec = small_spec(99, 2500);
    spec.beta_struct = spec.beta_wlr = spec.beta_drought = 0.0;
    spec.beta_ht = spec.beta_cf = spec.beta_text = 0.0;
    const SynthDataset data = generate_dataset(spec);
    int defaults = 0;
    for (const auto& l : data.loans) defaults += l.label;
    const double rate = static_cast<double>(defaults) / 2500.0;
    CHECK(rate > 0.03);
    CHECK(rate < 0.07);

    std::vector<double> wlr, label;
    for (std::size_t i = 0; i < data.loans.size(); ++i) {
        double w = 0;
        for (int t = 0; t < kPanelMonths; ++t) w += data.panels[i].at(t, 1);
        wlr.push_back(w);
        label.push_back(data.loans[i].label);
    }
    CHECK(std::abs(pearson(wlr, label)) < 0.06);  // binomial noise only
}

TEST_CASE("rate validation") {
    GenSpec spec = small_spec(1);
    spec.default_rate = 0.0;
    CHECK_THROWS_AS((void)generate_dataset(spec), RateUnreachable);
}

TEST_CASE("selection on the generated schema: noise dropped, signal retained, per seed") {
    int noise_dropped = 0, signal_kept = 0;
    const int seeds = 5;
    for (int k = 0; k < seeds; ++k) {
        GenSpec spec = small_spec(710 + static_cast<std::uint64_t>(k), 4000);
        spec.default_rate = 0.5;  // balanced labels give the IV gate statistical power
        const SynthDataset data = generate_dataset(spec);
        const StructuredFrame frame = frame_from_attributes(data.loans, synth_structured_schema());
        std::vector<int> labels;
        for (const auto& l : data.loans) labels.push_back(l.label);
        std::vector<int> train;
        for (int i = 0; i < 2800; ++i) train.push_back(i);
        const WoePipeline p = WoePipeline::fit(frame, labels, train);
        const auto& kept = p.selected_features();
        if (std::find(kept.begin(), kept.end(), "control_noise") == kept.end()) ++noise_dropped;
        int planted = 0;
        for (const char* name : {"credit_rating", "housekeeping", "annual_expense",
                                 "marital_relationship", "bedrooms"})
            if (std::find(kept.begin(), kept.end(), name) != kept.end()) ++planted;
        if (planted >= 2) ++signal_kept;
    }
    CHECK(noise_dropped == seeds);
    CHECK(signal_kept == seeds);
}
