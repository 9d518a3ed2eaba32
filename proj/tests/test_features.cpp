#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "credit/features.hpp"
#include "credit/rng.hpp"

using namespace credit;

namespace {
std::vector<int> iota_rows(int n) {
    std::vector<int> r(static_cast<std::size_t>(n));
    std::iota(r.begin(), r.end(), 0);
    return r;
}
}  // namespace

TEST_CASE("impute: training means fill numeric gaps, MISSING fills categorical") {
    StructuredFrame f;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    f.numeric.push_back({"x", {1.0, nan, 3.0, 100.0}});
    f.categorical.push_back({"c", {"A", "", "B", "A"}});
    const std::vector<int> train = {0, 1, 2};  // the 100.0 row is held out

    const ImputeStats stats = fit_impute(f, train);
    CHECK(stats.numeric_means.at("x") == doctest::Approx(2.0));

    apply_impute(f, stats);
    CHECK(f.numeric[0].values[1] == doctest::Approx(2.0));
    CHECK(f.categorical[0].values[1] == kMissingCategory);
    CHECK(f.categorical[0].values[0] == "A");  // observed values untouched
    CHECK(f.numeric[0].values[3] == doctest::Approx(100.0));
}

TEST_CASE("woe: hand-checkable bin value and sign convention") {
    // categorical with two levels: bin share 10% of goods vs 50% of bads
    std::vector<std::string> values;
    std::vector<int> labels;
    for (int i = 0; i < 1000; ++i) {  // goods
        values.push_back(i < 100 ? "RISKY" : "SAFE");
        labels.push_back(0);
    }
    for (int i = 0; i < 1000; ++i) {  // bads
        values.push_back(i < 500 ? "RISKY" : "SAFE");
        labels.push_back(1);
    }
    const auto rows = iota_rows(2000);
    const BinSpec spec = fit_woe_categorical("risk", values, labels, rows);
    const double woe_risky = spec.encode_category("RISKY");
    CHECK(woe_risky == doctest::Approx(std::log(0.1 / 0.5)).epsilon(0.01));
    CHECK(woe_risky < 0.0);  // high-default bin is negative

    const double woe_safe = spec.encode_category("SAFE");
    CHECK(woe_safe > 0.0);

    // unseen category maps to the MISSING bin
    CHECK(spec.encode_category("NEVER-SEEN") ==
          doctest::Approx(spec.woe[static_cast<std::size_t>(spec.bin_of_category(kMissingCategory))]));
}

TEST_CASE("woe: identical class proportions give zero") {
    std::vector<std::string> values;
    std::vector<int> labels;
    for (int i = 0; i < 400; ++i) {
        values.push_back(i % 2 ? "A" : "B");
        labels.push_back(i < 200 ? 0 : 1);
    }
    const BinSpec spec = fit_woe_categorical("flat", values, labels, iota_rows(400));
    CHECK(spec.encode_category("A") == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(information_value(spec) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("woe: single-class labels rejected") {
    std::vector<double> values = {1.0, 2.0, 3.0};
    std::vector<int> labels = {0, 0, 0};
    CHECK_THROWS_AS((void)fit_woe_numeric("x", values, labels, iota_rows(3)), SingleClassLabels);
}

TEST_CASE("iv: two-bin hand example") {
    // (p_good, p_bad) = (0.8, 0.2) and (0.2, 0.8): IV = 0.6 ln4 + 0.6 ln4
    std::vector<std::string> values;
    std::vector<int> labels;
    for (int i = 0; i < 4000; ++i) {
        values.push_back(i < 3200 ? "L" : "R");
        labels.push_back(0);
    }
    for (int i = 0; i < 4000; ++i) {
        values.push_back(i < 800 ? "L" : "R");
        labels.push_back(1);
    }
    const BinSpec spec = fit_woe_categorical("split", values, labels, iota_rows(8000));
    CHECK(information_value(spec) == doctest::Approx(1.2 * std::log(4.0)).epsilon(0.01));
}

TEST_CASE("iv: pure noise stays under the 0.01 gate on balanced labels") {
    int pass = 0;
    const int trials = 60;
    for (int t = 0; t < trials; ++t) {
        Rng rng(9000 + static_cast<std::uint64_t>(t));
        const int n = 4000;
        std::vector<double> noise(n);
        std::vector<int> labels(n);
        for (int i = 0; i < n; ++i) {
            noise[static_cast<std::size_t>(i)] = rng.normal();
            labels[static_cast<std::size_t>(i)] = rng.uniform() < 0.5 ? 1 : 0;
        }
        const BinSpec spec = fit_woe_numeric("noise", noise, labels, iota_rows(n));
        if (information_value(spec) < 0.01) ++pass;
    }
    CHECK(pass >= trials * 9 / 10);
}

TEST_CASE("woe: quantile bins are invariant to monotone transforms") {
    Rng rng(77);
    const int n = 2000;
    std::vector<double> x(n);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) {
        x[static_cast<std::size_t>(i)] = rng.normal();
        labels[static_cast<std::size_t>(i)] =
            rng.uniform() < 1.0 / (1.0 + std::exp(-x[static_cast<std::size_t>(i)])) ? 1 : 0;
    }
    std::vector<double> mapped(n);
    for (int i = 0; i < n; ++i)
        mapped[static_cast<std::size_t>(i)] = std::exp(2.0 * x[static_cast<std::size_t>(i)]);

    const auto rows = iota_rows(n);
    const BinSpec a = fit_woe_numeric("x", x, labels, rows);
    const BinSpec b = fit_woe_numeric("m", mapped, labels, rows);
    REQUIRE(a.woe.size() == b.woe.size());
    for (std::size_t i = 0; i < a.woe.size(); ++i)
        CHECK(a.woe[i] == doctest::Approx(b.woe[i]).epsilon(1e-9));

    for (int i = 0; i < 50; ++i) {
        const auto k = static_cast<std::size_t>(i);
        CHECK(a.encode_numeric(x[k]) == doctest::Approx(b.encode_numeric(mapped[k])).epsilon(1e-9));
    }
}

TEST_CASE("iv is invariant to bin relabeling") {
    std::vector<std::string> values;
    std::vector<int> labels;
    Rng rng(5);
    for (int i = 0; i < 3000; ++i) {
        const int cat = static_cast<int>(rng.uniform_int(4));
        values.push_back(std::string(1, static_cast<char>('A' + cat)));
        labels.push_back(rng.uniform() < 0.1 + 0.1 * cat ? 1 : 0);
    }
    std::vector<std::string> renamed = values;
    for (auto& v : renamed) v = "Z" + v;  // reverses lexicographic bin order
    const auto rows = iota_rows(3000);
    const BinSpec a = fit_woe_categorical("orig", values, labels, rows);
    const BinSpec b = fit_woe_categorical("relab", renamed, labels, rows);
    CHECK(information_value(a) == doctest::Approx(information_value(b)).epsilon(1e-12));
}

TEST_CASE("vif: orthogonal features kept, duplicates removed") {
    Rng rng(11);
    const int n = 500;
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
        a[static_cast<std::size_t>(i)] = rng.normal();
        b[static_cast<std::size_t>(i)] = rng.normal();
    }
    const VifResult ortho = vif_filter({"a", "b"}, {a, b});
    CHECK(ortho.removed.empty());
    CHECK(ortho.final_vif.at("a") == doctest::Approx(1.0).epsilon(0.05));
    CHECK(ortho.final_vif.at("b") == doctest::Approx(1.0).epsilon(0.05));

    const VifResult dup = vif_filter({"a", "a_copy", "b"}, {a, a, b});
    CHECK(dup.removed.size() == 1);
    CHECK(std::isinf(dup.vif_at_removal.at(dup.removed.front())));
    CHECK(dup.removed.front() == "a");  // lexicographic tie-break
}

TEST_CASE("vif: equicorrelated trio loses at least one member") {
    Rng rng(13);
    const int n = 800;
    std::vector<double> base(n), f1(n), f2(n), f3(n);
    for (int i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        base[k] = rng.normal();
        f1[k] = base[k] + 0.22 * rng.normal();
        f2[k] = base[k] + 0.22 * rng.normal();
        f3[k] = base[k] + 0.22 * rng.normal();
    }
    const VifResult r = vif_filter({"f1", "f2", "f3"}, {f1, f2, f3});
    CHECK(r.removed.size() >= 1);
    for (const auto& [_, v] : r.final_vif) CHECK(v <= 10.0);
}

TEST_CASE("pipeline: selection report, retained set, and held-out label independence") {
    Rng rng(21);
    const int n = 3000;
    StructuredFrame f;
    NumericColumn signal{"signal", {}};
    NumericColumn noise{"noise", {}};
    NumericColumn dup{"signal_dup", {}};
    CategoricalColumn cat{"grade", {}};
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
        const double q = rng.normal();
        signal.values.push_back(q + 0.4 * rng.normal());
        noise.values.push_back(rng.normal());
        cat.values.push_back(q > 0.8 ? "good" : q < -0.8 ? "bad" : "mid");
        labels.push_back(rng.uniform() < 1.0 / (1.0 + std::exp(0.6 * q + 0.8)) ? 1 : 0);
    }
    dup.values = signal.values;
    f.numeric = {signal, noise, dup};
    f.categorical = {cat};

    std::vector<int> train;
    for (int i = 0; i < 2400; ++i) train.push_back(i);

    const WoePipeline p = WoePipeline::fit(f, labels, train);
    const auto& retained = p.selected_features();
    CHECK(std::find(retained.begin(), retained.end(), "noise") == retained.end());
    CHECK(std::count_if(retained.begin(), retained.end(), [](const std::string& s) {
              return s == "signal" || s == "signal_dup";
          }) == 1);  // duplicate eliminated by the VIF loop
    CHECK(std::find(retained.begin(), retained.end(), "grade") != retained.end());

    bool saw_vif_removal = false;
    for (const auto& e : p.report().entries) {
        if (e.reason == "VIF") saw_vif_removal = true;
        if (e.reason == "KEPT") {
            CHECK(e.iv > 0.01);
            CHECK(e.iv < 0.50);
            CHECK(e.vif <= 10.0);
        }
    }
    CHECK(saw_vif_removal);

    // poisoning held-out labels must not change the fit
    std::vector<int> poisoned = labels;
    for (int i = 2400; i < n; ++i) poisoned[static_cast<std::size_t>(i)] = 1 - poisoned[static_cast<std::size_t>(i)];
    const WoePipeline p2 = WoePipeline::fit(f, poisoned, train);
    const auto enc1 = p.encode(f);
    const auto enc2 = p2.encode(f);
    REQUIRE(enc1.size() == enc2.size());
    for (std::size_t r = 0; r < enc1.size(); r += 97)
        for (std::size_t c = 0; c < enc1[r].size(); ++c) CHECK(enc1[r][c] == enc2[r][c]);
}

TEST_CASE("pipeline: json round trip reproduces encodings") {
    Rng rng(31);
    StructuredFrame f;
    NumericColumn x{"x", {}};
    CategoricalColumn c{"c", {}};
    std::vector<int> labels;
    for (int i = 0; i < 600; ++i) {
        const double q = rng.normal();
        x.values.push_back(q);
        c.values.push_back(q > 0 ? "P" : "N");
        labels.push_back(rng.uniform() < 1.0 / (1.0 + std::exp(1.5 * q)) ? 1 : 0);
    }
    f.numeric = {x};
    f.categorical = {c};
    const WoePipeline p = WoePipeline::fit(f, labels, iota_rows(600));
    const WoePipeline q = WoePipeline::from_json(p.to_json());
    const auto e1 = p.encode(f);
    const auto e2 = q.encode(f);
    for (std::size_t r = 0; r < e1.size(); ++r)
        for (std::size_t cidx = 0; cidx < e1[r].size(); ++cidx) CHECK(e1[r][cidx] == e2[r][cidx]);
}
