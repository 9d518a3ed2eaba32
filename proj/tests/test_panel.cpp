#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "credit/panel.hpp"
#include "credit/rng.hpp"

using namespace credit;

namespace {
StationMeta station(const std::string& id, double lat, double lon) {
    return {id, lat, lon, 1.0, 1.0};
}

LoanRecord loan_at(double lat, double lon, Date start = {2020, 6, 15}) {
    LoanRecord l;
    l.loan_id = "L1";
    l.latitude = lat;
    l.longitude = lon;
    l.start_date = start;
    return l;
}
}  // namespace

TEST_CASE("haversine: reference distance and symmetry") {
    CHECK(haversine_km(30, 100, 30, 100) == doctest::Approx(0.0));
    CHECK(haversine_km(30, 100, 30, 101) == doctest::Approx(96.3).epsilon(0.01));
    CHECK(haversine_km(30, 100, 35, 100) == doctest::Approx(555.9).epsilon(0.01));
    CHECK(haversine_km(12, 40, -31, 170) == doctest::Approx(haversine_km(-31, 170, 12, 40)));
}

TEST_CASE("nearest station: identity, distance, ties, empty set") {
    const std::vector<StationMeta> stations = {station("S2", 35, 100), station("S1", 30, 101)};
    CHECK(nearest_station(loan_at(30, 101), stations) == "S1");
    CHECK(nearest_station(loan_at(30, 100), stations) == "S1");  // ~96 km vs ~556 km

    const std::vector<StationMeta> tied = {station("S9", 31, 100), station("S3", 29, 100)};
    CHECK(nearest_station(loan_at(30, 100), tied) == "S3");  // equidistant -> smaller id

    CHECK_THROWS_AS((void)nearest_station(loan_at(0, 0), std::vector<StationMeta>{}),
                    EmptyStationSet);
}

TEST_CASE("nearest station: invariant to list order and longitude shifts") {
    Rng rng(8);
    std::vector<StationMeta> stations;
    for (int i = 0; i < 12; ++i)
        stations.push_back(station("S" + std::to_string(i), rng.uniform(20, 45),
                                   rng.uniform(80, 120)));
    std::vector<StationMeta> shuffled = stations;
    rng.shuffle(shuffled);
    std::vector<StationMeta> shifted = stations;
    for (auto& s : shifted) s.longitude += 17.0;

    for (int t = 0; t < 40; ++t) {
        const LoanRecord l = loan_at(rng.uniform(20, 45), rng.uniform(80, 120));
        LoanRecord moved = l;
        moved.longitude += 17.0;
        const auto base = nearest_station(l, stations);
        CHECK(nearest_station(l, shuffled) == base);
        CHECK(nearest_station(moved, shifted) == base);
    }
}

namespace {
MonthlyIndexStore store_covering(const std::string& id, YearMonth from, int months) {
    MonthlyIndexStore store;
    for (int i = 0; i < months; ++i) {
        MonthlyIndexRow row;
        row.station_id = id;
        row.ym = add_months(from, i);
        row.di = i;
        row.wlr = i * 0.5;
        row.ht = 0.0;
        row.cf = 1.0;
        store.insert(row);
    }
    return store;
}
}  // namespace

TEST_CASE("panel: twelve months strictly before the start month, oldest first") {
    const auto store = store_covering("S1", {2019, 1}, 30);
    const ClimatePanel p = build_panel(loan_at(0, 0, {2020, 6, 15}), "S1", store);
    // months 2019-06 .. 2020-05 -> di runs 5..16
    CHECK(p.at(0, 0) == doctest::Approx(5.0));
    CHECK(p.at(11, 0) == doctest::Approx(16.0));
    CHECK(p.at(3, 1) == doctest::Approx((5 + 3) * 0.5));
    CHECK(p.values.size() == 12);
    CHECK(p.values[0].size() == 4);
}

TEST_CASE("panel: start-of-year boundary") {
    const auto store = store_covering("S1", {2019, 1}, 13);
    const ClimatePanel p = build_panel(loan_at(0, 0, {2020, 1, 3}), "S1", store);
    CHECK(p.at(0, 0) == doctest::Approx(0.0));   // 2019-01
    CHECK(p.at(11, 0) == doctest::Approx(11.0)); // 2019-12
}

TEST_CASE("panel: missing months are reported") {
    const auto store = store_covering("S1", {2019, 8}, 24);  // starts 2019-08
    try {
        (void)build_panel(loan_at(0, 0, {2020, 6, 15}), "S1", store);
        FAIL("expected MissingMonth");
    } catch (const MissingMonth& e) {
        REQUIRE(e.gaps.size() == 2);
        CHECK(to_string(e.gaps[0]) == "2019-06");
        CHECK(to_string(e.gaps[1]) == "2019-07");
        CHECK(std::string(e.what()).find("2019-06") != std::string::npos);
    }
}

#include "credit/io.hpp"

TEST_CASE("panel and index CSV round trips are bit-exact") {
    Rng rng(99);
    std::vector<ClimatePanel> panels;
    for (int i = 0; i < 5; ++i) {
        ClimatePanel p;
        p.loan_id = "L" + std::to_string(i);
        for (auto& row : p.values)
            for (double& v : row) v = rng.normal() * std::pow(10.0, rng.uniform(-6, 4));
        panels.push_back(std::move(p));
    }
    const std::string path = "/tmp/test_panels_roundtrip.csv";
    write_panels_csv(path, panels);
    const auto loaded = read_panels_csv(path);
    REQUIRE(loaded.size() == panels.size());
    for (std::size_t i = 0; i < panels.size(); ++i) {
        CHECK(loaded[i].loan_id == panels[i].loan_id);
        CHECK(loaded[i].values == panels[i].values);  // exact doubles
    }

    std::vector<MonthlyIndexRow> rows;
    for (int i = 0; i < 7; ++i) {
        MonthlyIndexRow r;
        r.station_id = "S" + std::to_string(i);
        r.ym = {2020, 1 + i};
        r.di = rng.uniform() * 13.0;
        r.wlr = rng.uniform();
        r.ht = rng.uniform() * 0.01;
        r.cf = rng.uniform() * 9.0;
        rows.push_back(std::move(r));
    }
    const std::string ipath = "/tmp/test_indices_roundtrip.csv";
    write_indices_csv(ipath, rows);
    const auto irows = read_indices_csv(ipath);
    REQUIRE(irows.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(irows[i].station_id == rows[i].station_id);
        CHECK(irows[i].ym == rows[i].ym);
        CHECK(irows[i].di == rows[i].di);
        CHECK(irows[i].wlr == rows[i].wlr);
        CHECK(irows[i].ht == rows[i].ht);
        CHECK(irows[i].cf == rows[i].cf);
    }
}
