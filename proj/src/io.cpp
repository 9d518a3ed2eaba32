#include "credit/io.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "credit/csv.hpp"

namespace credit {

void write_stations_csv(const std::string& path, const std::vector<StationMeta>& stations) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& s : stations)
        rows.push_back({s.station_id, format_double(s.latitude), format_double(s.longitude),
                        format_double(s.drought_region_weight),
                        format_double(s.freeze_region_weight)});
    write_csv(path, {"station_id", "lat", "lon", "drought_region_weight", "freeze_region_weight"},
              rows);
}

std::vector<StationMeta> read_stations_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    const int id = t.require_column("station_id");
    const int lat = t.require_column("lat");
    const int lon = t.require_column("lon");
    const int dw = t.require_column("drought_region_weight");
    const int fw = t.require_column("freeze_region_weight");
    std::vector<StationMeta> out;
    for (const auto& r : t.rows) {
        StationMeta s;
        s.station_id = r[static_cast<std::size_t>(id)];
        s.latitude = std::stod(r[static_cast<std::size_t>(lat)]);
        s.longitude = std::stod(r[static_cast<std::size_t>(lon)]);
        s.drought_region_weight = std::stod(r[static_cast<std::size_t>(dw)]);
        s.freeze_region_weight = std::stod(r[static_cast<std::size_t>(fw)]);
        out.push_back(std::move(s));
    }
    return out;
}

void write_weather_csv(const std::string& path, const std::vector<StationSeries>& stations) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "station_id,date,precip_mm,tmax_c,tmin_c,tavg_c,snow\n";
    for (const auto& st : stations)
        for (const auto& d : st.days)
            out << st.meta.station_id << ',' << to_string(d.date) << ','
                << format_double(d.precip) << ',' << format_double(d.t_max) << ','
                << format_double(d.t_min) << ',' << format_double(d.t_avg) << ','
                << (d.snow_day ? 1 : 0) << '\n';
}

std::vector<StationSeries> read_weather_csv(const std::string& path,
                                            const std::vector<StationMeta>& metas) {
    const CsvTable t = read_csv(path);
    const int id = t.require_column("station_id");
    const int date = t.require_column("date");
    const int precip = t.require_column("precip_mm");
    const int tmax = t.require_column("tmax_c");
    const int tmin = t.require_column("tmin_c");
    const int tavg = t.require_column("tavg_c");
    const int snow = t.require_column("snow");

    std::map<std::string, StationSeries> by_id;
    for (const auto& m : metas) by_id[m.station_id].meta = m;
    for (const auto& r : t.rows) {
        const auto it = by_id.find(r[static_cast<std::size_t>(id)]);
        if (it == by_id.end())
            throw std::runtime_error("weather row for unknown station " + r[static_cast<std::size_t>(id)]);
        DailyWeather d;
        d.date = parse_date(r[static_cast<std::size_t>(date)]);
        d.precip = std::stod(r[static_cast<std::size_t>(precip)]);
        d.t_max = std::stod(r[static_cast<std::size_t>(tmax)]);
        d.t_min = std::stod(r[static_cast<std::size_t>(tmin)]);
        d.t_avg = std::stod(r[static_cast<std::size_t>(tavg)]);
        d.snow_day = r[static_cast<std::size_t>(snow)] == "1";
        it->second.days.push_back(d);
    }
    std::vector<StationSeries> out;
    for (auto& [_, st] : by_id) {
        std::sort(st.days.begin(), st.days.end(),
                  [](const DailyWeather& a, const DailyWeather& b) { return a.date < b.date; });
        out.push_back(std::move(st));
    }
    return out;
}

void write_indices_csv(const std::string& path, const std::vector<MonthlyIndexRow>& rows) {
    std::vector<std::vector<std::string>> out;
    for (const auto& r : rows)
        out.push_back({r.station_id, to_string(r.ym), format_double(r.di), format_double(r.wlr),
                       format_double(r.ht), format_double(r.cf)});
    write_csv(path, {"station_id", "year_month", "di", "wlr", "ht", "cf"}, out);
}

std::vector<MonthlyIndexRow> read_indices_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    const int id = t.require_column("station_id");
    const int ym = t.require_column("year_month");
    const int di = t.require_column("di");
    const int wlr = t.require_column("wlr");
    const int ht = t.require_column("ht");
    const int cf = t.require_column("cf");
    std::vector<MonthlyIndexRow> out;
    for (const auto& r : t.rows) {
        MonthlyIndexRow row;
        row.station_id = r[static_cast<std::size_t>(id)];
        row.ym = parse_year_month(r[static_cast<std::size_t>(ym)]);
        row.di = std::stod(r[static_cast<std::size_t>(di)]);
        row.wlr = std::stod(r[static_cast<std::size_t>(wlr)]);
        row.ht = std::stod(r[static_cast<std::size_t>(ht)]);
        row.cf = std::stod(r[static_cast<std::size_t>(cf)]);
        out.push_back(std::move(row));
    }
    return out;
}

void write_loans_csv(const std::string& path, const std::vector<LoanRecord>& loans,
                     const StructuredSchema& schema) {
    std::vector<std::string> header = {"loan_id", "lat",         "lon",
                                       "start_date", "term_months", "label"};
    for (const auto& n : schema.numeric) header.push_back(n);
    for (const auto& n : schema.categorical) header.push_back(n);

    std::vector<std::vector<std::string>> rows;
    for (const auto& l : loans) {
        std::vector<std::string> row = {l.loan_id,
                                        format_double(l.latitude),
                                        format_double(l.longitude),
                                        to_string(l.start_date),
                                        std::to_string(l.term_months),
                                        std::to_string(l.label)};
        auto emit = [&](const std::string& name) {
            const auto it = l.attributes.find(name);
            row.push_back(it == l.attributes.end() ? "" : it->second);
        };
        for (const auto& n : schema.numeric) emit(n);
        for (const auto& n : schema.categorical) emit(n);
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
}

std::vector<LoanRecord> read_loans_csv(const std::string& path, const StructuredSchema& schema) {
    const CsvTable t = read_csv(path);
    const int id = t.require_column("loan_id");
    const int lat = t.require_column("lat");
    const int lon = t.require_column("lon");
    const int start = t.require_column("start_date");
    const int term = t.require_column("term_months");
    const int label = t.require_column("label");

    std::vector<std::pair<std::string, int>> attr_cols;
    for (const auto& n : schema.numeric) attr_cols.push_back({n, t.require_column(n)});
    for (const auto& n : schema.categorical) attr_cols.push_back({n, t.require_column(n)});

    std::vector<LoanRecord> out;
    for (const auto& r : t.rows) {
        LoanRecord l;
        l.loan_id = r[static_cast<std::size_t>(id)];
        l.latitude = std::stod(r[static_cast<std::size_t>(lat)]);
        l.longitude = std::stod(r[static_cast<std::size_t>(lon)]);
        l.start_date = parse_date(r[static_cast<std::size_t>(start)]);
        l.term_months = std::stoi(r[static_cast<std::size_t>(term)]);
        l.label = std::stoi(r[static_cast<std::size_t>(label)]);
        for (const auto& [name, col] : attr_cols) l.attributes[name] = r[static_cast<std::size_t>(col)];
        out.push_back(std::move(l));
    }
    return out;
}

void write_texts_tsv(const std::string& path, const std::vector<LoanRecord>& loans) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& l : loans) {
        out << l.loan_id << '\t';
        for (std::size_t i = 0; i < l.tokens.size(); ++i) {
            if (i) out << ' ';
            out << l.tokens[i];
        }
        out << '\n';
    }
}

void read_texts_tsv(const std::string& path, std::vector<LoanRecord>& loans) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::map<std::string, std::vector<std::string>> by_id;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw std::runtime_error("bad text line: " + line);
        std::istringstream rest(line.substr(tab + 1));
        std::vector<std::string> tokens;
        std::string tok;
        while (rest >> tok) tokens.push_back(tok);
        by_id[line.substr(0, tab)] = std::move(tokens);
    }
    for (auto& l : loans) {
        const auto it = by_id.find(l.loan_id);
        if (it != by_id.end()) l.tokens = it->second;
    }
}

void write_panels_csv(const std::string& path, const std::vector<ClimatePanel>& panels) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "loan_id,month_offset,di,wlr,ht,cf\n";
    for (const auto& p : panels)
        for (int t = 0; t < kPanelMonths; ++t)
            out << p.loan_id << ',' << (t - kPanelMonths) << ',' << format_double(p.at(t, 0))
                << ',' << format_double(p.at(t, 1)) << ',' << format_double(p.at(t, 2)) << ','
                << format_double(p.at(t, 3)) << '\n';
}

std::vector<ClimatePanel> read_panels_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    const int id = t.require_column("loan_id");
    const int off = t.require_column("month_offset");
    const int di = t.require_column("di");
    const int wlr = t.require_column("wlr");
    const int ht = t.require_column("ht");
    const int cf = t.require_column("cf");

    std::vector<ClimatePanel> out;
    std::map<std::string, std::size_t> index;
    for (const auto& r : t.rows) {
        const std::string& loan = r[static_cast<std::size_t>(id)];
        auto [it, inserted] = index.try_emplace(loan, out.size());
        if (inserted) {
            ClimatePanel p;
            p.loan_id = loan;
            out.push_back(std::move(p));
        }
        const int offset = std::stoi(r[static_cast<std::size_t>(off)]);
        if (offset < -kPanelMonths || offset > -1)
            throw std::runtime_error("panel month offset out of range: " + std::to_string(offset));
        auto& dest = out[it->second].values[static_cast<std::size_t>(offset + kPanelMonths)];
        dest[0] = std::stod(r[static_cast<std::size_t>(di)]);
        dest[1] = std::stod(r[static_cast<std::size_t>(wlr)]);
        dest[2] = std::stod(r[static_cast<std::size_t>(ht)]);
        dest[3] = std::stod(r[static_cast<std::size_t>(cf)]);
    }
    return out;
}

void write_selection_csv(const std::string& path, const SelectionReport& report) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& e : report.entries)
        rows.push_back({e.feature, format_double(e.iv), format_double(e.vif), e.reason});
    write_csv(path, {"feature", "iv", "vif", "status"}, rows);
}

void write_predictions_csv(const std::string& path, const std::vector<PredictionRow>& rows) {
    std::vector<std::vector<std::string>> out;
    for (const auto& r : rows)
        out.push_back({r.model, std::to_string(r.seed), r.loan_id, r.split,
                       std::to_string(r.label), format_double(r.probability)});
    write_csv(path, {"model", "seed", "loan_id", "split", "label", "probability"}, out);
}

std::vector<PredictionRow> read_predictions_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    const int model = t.require_column("model");
    const int seed = t.require_column("seed");
    const int id = t.require_column("loan_id");
    const int split = t.require_column("split");
    const int label = t.require_column("label");
    const int prob = t.require_column("probability");
    std::vector<PredictionRow> out;
    for (const auto& r : t.rows) {
        PredictionRow row;
        row.model = r[static_cast<std::size_t>(model)];
        row.seed = std::stoi(r[static_cast<std::size_t>(seed)]);
        row.loan_id = r[static_cast<std::size_t>(id)];
        row.split = r[static_cast<std::size_t>(split)];
        row.label = std::stoi(r[static_cast<std::size_t>(label)]);
        row.probability = std::stod(r[static_cast<std::size_t>(prob)]);
        out.push_back(std::move(row));
    }
    return out;
}

void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows) {
    std::vector<std::vector<std::string>> out;
    for (const auto& r : rows)
        out.push_back({r.model, r.modality, r.metric, format_double(r.mean),
                       format_double(r.ci_low), format_double(r.ci_high)});
    write_csv(path, {"model", "modality", "metric", "mean", "ci_low", "ci_high"}, out);
}

void write_spearman_csv(const std::string& path, const std::vector<std::string>& names,
                        const SpearmanMatrix& matrix) {
    std::vector<std::string> header = {"modality"};
    header.insert(header.end(), names.begin(), names.end());
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < names.size(); ++i) {
        std::vector<std::string> row = {names[i]};
        for (std::size_t j = 0; j < names.size(); ++j)
            row.push_back(format_double(matrix.rho[i][j]));
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
}

void write_shap_csv(const std::string& path, const std::vector<ShapRow>& rows) {
    std::vector<std::vector<std::string>> out;
    for (const auto& r : rows)
        out.push_back({r.loan_id, std::to_string(r.seed), r.feature, r.factor,
                       std::to_string(r.month_offset), format_double(r.feature_value),
                       format_double(r.shap_value), format_double(r.base_value)});
    write_csv(path,
              {"loan_id", "seed", "feature", "factor", "month_offset", "feature_value",
               "shap_value", "base_value"},
              out);
}

std::uint64_t file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path + " for checksumming");
    std::uint64_t h = 1469598103934665603ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (!in) break;
    }
    return h;
}

std::string checksum_hex(std::uint64_t value) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

}  // namespace credit
