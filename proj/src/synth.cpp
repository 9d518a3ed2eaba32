#include "credit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace credit {

namespace {
constexpr double kPi = 3.14159265358979323846;

const std::vector<std::string>& filler_tokens() {
    static const std::vector<std::string> tokens = {
        "negotium", "ratio",    "ager",     "pecunia",  "mensis",   "socius",  "villa",
        "merces",   "labor",    "annus",    "grex",     "aqua",     "semen",   "fructus",
        "taberna",  "vicus",    "porta",    "census",   "moles",    "pactum",  "chirographum",
        "opus",     "tempus",   "tellus",   "hortus",   "pons",     "forum",   "via",
        "custos",   "arca",     "granum",   "pratum",   "fons",     "collis",  "ripa",
        "silva",    "murus",    "tectum",   "area",     "vinea"};
    return tokens;
}

const std::vector<std::string>& positive_tokens() {
    static const std::vector<std::string> tokens = {"fidelis",  "punctualis", "diligens",
                                                    "prosper",  "honestus",   "stabilis",
                                                    "sedulus",  "probus"};
    return tokens;
}

const std::vector<std::string>& negative_tokens() {
    static const std::vector<std::string> tokens = {"tardus",    "debitor",  "incertus",
                                                    "fragilis",  "neglectus", "praecarius",
                                                    "querulus",  "anxius"};
    return tokens;
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

std::string fmt(double v, int decimals = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

int clamp_round(double v, int lo, int hi) {
    return std::clamp(static_cast<int>(std::llround(v)), lo, hi);
}
}  // namespace

void GenSpec::validate() const {
    if (n_loans < 10) throw std::invalid_argument("n_loans too small");
    if (n_stations < 1) throw std::invalid_argument("need at least one station");
    if (default_rate <= 0.0 || default_rate >= 1.0)
        throw RateUnreachable("default rate must lie strictly inside (0, 1)");
    if (loan_year_from <= clim_year_to)
        throw std::invalid_argument("loan window must start after the climatology years");
    if (text_min_len < 1 || text_max_len < text_min_len)
        throw std::invalid_argument("bad text length envelope");
}

const StructuredSchema& synth_structured_schema() {
    static const StructuredSchema schema = {
        {"annual_expense", "bedrooms", "family_members", "family_workforce", "floors",
         "loan_amount", "loan_term", "control_noise"},
        {"business_type", "credit_rating", "degree", "education", "homeownership", "house_type",
         "housekeeping", "job_position", "license_type", "marital_relationship", "marital_status",
         "occupation", "repay_type", "verified_id"},
    };
    return schema;
}

StructuredFrame frame_from_attributes(const std::vector<LoanRecord>& loans,
                                      const StructuredSchema& schema) {
    StructuredFrame frame;
    for (const auto& name : schema.numeric) {
        NumericColumn col;
        col.name = name;
        col.values.reserve(loans.size());
        for (const auto& loan : loans) {
            const auto it = loan.attributes.find(name);
            if (it == loan.attributes.end() || it->second.empty())
                col.values.push_back(std::numeric_limits<double>::quiet_NaN());
            else
                col.values.push_back(std::stod(it->second));
        }
        frame.numeric.push_back(std::move(col));
    }
    for (const auto& name : schema.categorical) {
        CategoricalColumn col;
        col.name = name;
        col.values.reserve(loans.size());
        for (const auto& loan : loans) {
            const auto it = loan.attributes.find(name);
            col.values.push_back(it == loan.attributes.end() ? "" : it->second);
        }
        frame.categorical.push_back(std::move(col));
    }
    frame.validate();
    return frame;
}

std::vector<StationSeries> gen_station_weather(const GenSpec& spec) {
    spec.validate();
    const Rng base(spec.seed);
    std::vector<StationSeries> stations;
    stations.reserve(static_cast<std::size_t>(spec.n_stations));

    for (int s = 0; s < spec.n_stations; ++s) {
        Rng rng = base.stream("station/" + std::to_string(s));
        StationSeries st;
        char id[16];
        std::snprintf(id, sizeof(id), "S%03d", s);
        st.meta.station_id = id;
        st.meta.latitude = rng.uniform(22.0, 48.0);
        st.meta.longitude = rng.uniform(95.0, 125.0);
        const double r = rng.uniform();
        st.meta.drought_region_weight = r < 0.1 ? 0.0 : r < 0.3 ? 0.6 : 1.0;
        st.meta.freeze_region_weight = st.meta.latitude > 33.0 ? 1.0 : 0.5;

        const double base_temp = 16.0 + (30.0 - st.meta.latitude) * 0.55;
        const double amplitude = rng.uniform(11.0, 15.0);
        const double wet_base = rng.uniform(0.16, 0.26);

        const long first = days_from_civil(spec.clim_year_from, 1, 1);
        const long last = days_from_civil(spec.loan_year_to, 12, 31);
        st.days.reserve(static_cast<std::size_t>(last - first + 1));
        int year = spec.clim_year_from, month = 1, day = 1;
        for (long serial = first; serial <= last; ++serial) {
            DailyWeather w;
            w.date = {year, month, day};
            const double doy_angle =
                2.0 * kPi * (static_cast<double>(serial - days_from_civil(year, 1, 1)) - 197.0) /
                365.25;
            const double season = std::cos(doy_angle);  // ~1 mid-July
            w.t_avg = base_temp + amplitude * season + rng.normal(0.0, 2.6);
            w.t_max = w.t_avg + 3.0 + std::abs(rng.normal(0.0, 2.2));
            w.t_min = w.t_avg - 3.0 - std::abs(rng.normal(0.0, 2.2));

            const double p_wet = wet_base + 0.16 * std::max(0.0, season);
            double precip = 0.0;
            if (rng.uniform() < p_wet) {
                precip = rng.gamma(0.9, 5.0 + 7.0 * std::max(0.0, season));
                if (season > 0.2 && rng.uniform() < 0.012)
                    precip += 45.0 + rng.gamma(2.0, 35.0);  // heavy-rain events
            }
            w.precip = precip;
            w.snow_day = w.t_avg < 0.0 && precip > 0.0;
            st.days.push_back(w);

            if (++day > days_in_month(year, month)) {
                day = 1;
                if (++month > 12) {
                    month = 1;
                    ++year;
                }
            }
        }
        stations.push_back(std::move(st));
    }
    return stations;
}

std::vector<std::string> gen_text(double quality, Rng& rng, const GenSpec& spec) {
    const int length = std::clamp(
        static_cast<int>(std::llround(rng.normal(spec.text_mean_len, spec.text_len_sd))),
        spec.text_min_len, spec.text_max_len);
    const double p_positive = std::clamp(0.5 + quality / 4.0, 0.0, 1.0);

    std::vector<std::string> tokens;
    tokens.reserve(static_cast<std::size_t>(length));
    for (int i = 0; i < length; ++i) {
        if (i % 5 == 2) {  // sentiment slot
            const auto& pool = rng.uniform() < p_positive ? positive_tokens() : negative_tokens();
            tokens.push_back(rng.choice(pool));
        } else {
            tokens.push_back(rng.choice(filler_tokens()));
        }
    }
    return tokens;
}

double text_sentiment(const std::vector<std::string>& tokens) {
    int pos = 0, neg = 0;
    for (const auto& t : tokens) {
        if (contains(positive_tokens(), t)) ++pos;
        if (contains(negative_tokens(), t)) ++neg;
    }
    return pos + neg > 0 ? static_cast<double>(pos - neg) / (pos + neg) : 0.0;
}

namespace {
std::vector<double> standardized(std::vector<double> v) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / n);
    for (double& x : v) x = sd > 1e-12 ? (x - mean) / sd : 0.0;
    return v;
}

std::map<std::string, std::string> gen_attributes(double q, Rng& rng) {
    std::map<std::string, std::string> a;
    a["annual_expense"] = fmt(std::exp(rng.normal(9.4 + 0.25 * q, 0.8)), 2);
    a["bedrooms"] = std::to_string(clamp_round(4.8 + 0.9 * q + 2.2 * rng.normal(), 1, 16));
    a["family_members"] = std::to_string(clamp_round(3.6 + 0.9 * rng.normal(), 1, 9));
    a["family_workforce"] = std::to_string(clamp_round(2.5 + 0.3 * q + 0.7 * rng.normal(), 1, 8));
    a["floors"] = std::to_string(clamp_round(1.7 + 0.8 * rng.normal(), 1, 5));
    a["loan_amount"] = fmt(std::clamp(39368.0 + 15665.0 * rng.normal(), 1000.0, 100000.0), 2);
    a["control_noise"] = fmt(rng.normal(), 6);

    // a slice of numeric cells arrives missing, exercising mean imputation
    if (rng.uniform() < 0.02) a["annual_expense"] = "";

    const int rating = clamp_round(3.0 - 1.1 * q + 0.8 * rng.normal(), 1, 5);
    a["credit_rating"] = rng.uniform() < 0.03 ? "Other" : std::to_string(rating);

    const double hk = q + 0.9 * rng.normal();
    a["housekeeping"] = hk > 0.6 ? "Good" : hk > -0.6 ? "Moderate" : "Bad";
    if (rng.uniform() < 0.02) a["housekeeping"] = "";  // missing categorical

    const double mr = 0.6 * q + rng.normal();
    a["marital_relationship"] =
        mr > 1.0 ? "Very good" : mr > 0.0 ? "Good" : mr > -1.0 ? "Moderate" : "Bad";

    a["business_type"] = std::to_string(1 + static_cast<int>(rng.uniform_int(3)));
    const std::vector<std::string> degrees = {"0", "4", "5", "9"};
    a["degree"] = rng.choice(degrees);
    const std::vector<std::string> education = {"10", "20", "30", "40", "50",
                                                "60", "70", "80", "90", "99"};
    a["education"] = rng.choice(education);
    const std::vector<std::string> homeown = {"1", "2", "3", "4", "5", "Other"};
    a["homeownership"] = rng.choice(homeown);
    a["house_type"] = rng.uniform() < 0.6 ? "House" : "Flat";
    const std::vector<std::string> jobpos = {"1", "2", "3", "4", "5", "Other"};
    a["job_position"] = rng.choice(jobpos);
    const std::vector<std::string> license = {"A", "C", "E", "F", "H", "O",
                                              "P", "Q", "S", "Z", "Other"};
    a["license_type"] = rng.choice(license);
    const std::vector<std::string> marital = {"10", "21", "22", "23", "30", "40", "90"};
    a["marital_status"] = rng.choice(marital);
    const std::vector<std::string> occupation = {"0", "1", "3", "4", "5", "8", "9", "X", "Y", "Z"};
    a["occupation"] = rng.choice(occupation);
    const std::vector<std::string> repay = {"A", "B", "C"};
    a["repay_type"] = rng.choice(repay);
    const std::vector<std::string> verified = {"1", "2", "3", "4", "5", "6", "Other"};
    a["verified_id"] = rng.choice(verified);
    return a;
}
}  // namespace

std::vector<StationMeta> SynthDataset::station_meta() const {
    std::vector<StationMeta> metas;
    metas.reserve(weather.size());
    for (const auto& st : weather) metas.push_back(st.meta);
    return metas;
}

SynthDataset generate_dataset(const GenSpec& spec) {
    spec.validate();
    SynthDataset out;
    out.weather = gen_station_weather(spec);

    // monthly indices per station over the widest window panels can need
    MonthlyIndexStore store;
    const YearMonth index_from{spec.loan_year_from - 2, 1};
    const YearMonth index_to{spec.loan_year_to, 12};
    for (const auto& st : out.weather) {
        const PentadClimatology clim =
            build_pentad_climatology(st, spec.clim_year_from, spec.clim_year_to);
        const GammaFit fit =
            fit_precip_cdf(monthly_precip_totals(st, spec.clim_year_from, spec.clim_year_to));
        auto rows = compute_station_indices(st, clim, fit, index_from, index_to);
        for (const auto& r : rows) {
            store.insert(r);
            out.index_rows.push_back(r);
        }
    }
    const std::vector<StationMeta> metas = out.station_meta();

    const Rng base(spec.seed);
    Rng loan_rng = base.stream("loans");
    Rng text_rng = base.stream("texts");
    Rng label_rng = base.stream("labels");

    std::vector<double> wlr_mean, di_mean, ht_mean, cf_mean;
    for (int i = 0; i < spec.n_loans; ++i) {
        LoanRecord loan;
        char id[16];
        std::snprintf(id, sizeof(id), "L%05d", i);
        loan.loan_id = id;
        const auto& anchor = metas[static_cast<std::size_t>(loan_rng.uniform_int(metas.size()))];
        loan.latitude = std::clamp(anchor.latitude + loan_rng.normal(0.0, 0.8), -89.0, 89.0);
        loan.longitude = anchor.longitude + loan_rng.normal(0.0, 0.8);
        const int month_span = (spec.loan_year_to - spec.loan_year_from) * 12 + 12;
        const int pick = static_cast<int>(loan_rng.uniform_int(static_cast<std::uint64_t>(month_span)));
        const YearMonth start_ym = add_months({spec.loan_year_from, 1}, pick);
        loan.start_date = {start_ym.year, start_ym.month,
                           1 + static_cast<int>(loan_rng.uniform_int(28))};
        loan.term_months = clamp_round(3.85 + 0.69 * loan_rng.normal(), 1, 9);

        const double q = loan_rng.normal();
        out.quality.push_back(q);
        loan.attributes = gen_attributes(q, loan_rng);
        loan.attributes["loan_term"] = std::to_string(loan.term_months);
        loan.tokens = gen_text(q, text_rng, spec);
        out.sentiment.push_back(text_sentiment(loan.tokens));

        const std::string station = nearest_station(loan, metas);
        ClimatePanel panel = build_panel(loan, station, store);
        double w = 0, d = 0, h = 0, c = 0;
        for (int t = 0; t < kPanelMonths; ++t) {
            d += panel.at(t, 0);
            w += panel.at(t, 1);
            h += panel.at(t, 2);
            c += panel.at(t, 3);
        }
        di_mean.push_back(d / kPanelMonths);
        wlr_mean.push_back(w / kPanelMonths);
        ht_mean.push_back(h / kPanelMonths);
        cf_mean.push_back(c / kPanelMonths);

        out.loans.push_back(std::move(loan));
        out.panels.push_back(std::move(panel));
    }

    // planted logit over standardized drivers; intercept bisected to the rate
    const auto zq = standardized(out.quality);
    const auto zw = standardized(wlr_mean);
    const auto zd = standardized(di_mean);
    const auto zh = standardized(ht_mean);
    const auto zc = standardized(cf_mean);
    const auto zs = standardized(out.sentiment);

    std::vector<double> raw(out.loans.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        raw[i] = -spec.beta_struct * zq[i] + spec.beta_wlr * zw[i] + spec.beta_drought * zd[i] +
                 spec.beta_ht * zh[i] + spec.beta_cf * zc[i] - spec.beta_text * zs[i];
    }
    auto mean_prob = [&](double alpha) {
        double sum = 0.0;
        for (double r : raw) sum += 1.0 / (1.0 + std::exp(-(alpha + r)));
        return sum / static_cast<double>(raw.size());
    };
    double lo = -30.0, hi = 10.0;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = (lo + hi) / 2.0;
        (mean_prob(mid) < spec.default_rate ? lo : hi) = mid;
    }
    out.intercept = (lo + hi) / 2.0;
    const double achieved = mean_prob(out.intercept);
    if (std::abs(achieved - spec.default_rate) > 0.1 * spec.default_rate)
        throw RateUnreachable("intercept search missed the target rate");

    for (std::size_t i = 0; i < out.loans.size(); ++i) {
        const double p = 1.0 / (1.0 + std::exp(-(out.intercept + raw[i])));
        out.loans[i].label = label_rng.uniform() < p ? 1 : 0;
    }
    return out;
}

}  // namespace credit
