#include "credit/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "credit/csv.hpp"
#include "credit/io.hpp"
#include "credit/shap.hpp"

namespace credit {

namespace {
namespace fs = std::filesystem;
using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}
}  // namespace

RunConfig RunConfig::from_json(const json& j) {
    RunConfig cfg;
    check_keys(j, {"seed", "n_seeds", "generator", "model", "modalities", "grid_search",
                   "factor_ablation", "hybrid_freeze", "features", "metrics", "shap", "schema"},
               "run config");
    maybe(j, "seed", cfg.master_seed);
    maybe(j, "n_seeds", cfg.n_seeds);
    if (cfg.n_seeds < 1) throw ConfigError("n_seeds must be >= 1");

    if (j.contains("generator")) {
        const json& g = j.at("generator");
        check_keys(g,
                   {"n_loans", "default_rate", "n_stations", "clim_year_from", "clim_year_to",
                    "loan_year_from", "loan_year_to", "beta_struct", "beta_wlr", "beta_drought",
                    "beta_ht", "beta_cf", "beta_text", "text_min_len", "text_mean_len",
                    "text_len_sd", "text_max_len"},
                   "generator");
        maybe(g, "n_loans", cfg.generator.n_loans);
        maybe(g, "default_rate", cfg.generator.default_rate);
        maybe(g, "n_stations", cfg.generator.n_stations);
        maybe(g, "clim_year_from", cfg.generator.clim_year_from);
        maybe(g, "clim_year_to", cfg.generator.clim_year_to);
        maybe(g, "loan_year_from", cfg.generator.loan_year_from);
        maybe(g, "loan_year_to", cfg.generator.loan_year_to);
        maybe(g, "beta_struct", cfg.generator.beta_struct);
        maybe(g, "beta_wlr", cfg.generator.beta_wlr);
        maybe(g, "beta_drought", cfg.generator.beta_drought);
        maybe(g, "beta_ht", cfg.generator.beta_ht);
        maybe(g, "beta_cf", cfg.generator.beta_cf);
        maybe(g, "beta_text", cfg.generator.beta_text);
        maybe(g, "text_min_len", cfg.generator.text_min_len);
        maybe(g, "text_mean_len", cfg.generator.text_mean_len);
        maybe(g, "text_len_sd", cfg.generator.text_len_sd);
        maybe(g, "text_max_len", cfg.generator.text_max_len);
    }
    cfg.generator.seed = cfg.master_seed;

    if (j.contains("model")) {
        const json& m = j.at("model");
        check_keys(m,
                   {"encoder", "hidden_size", "num_layers", "heads", "ff_dim", "lr", "batch_size",
                    "max_epochs", "patience", "mlp_hidden", "text_embed_dim", "max_text_len",
                    "pos_weight", "external_embeddings"},
                   "model");
        if (m.contains("encoder"))
            cfg.model.encoder_kind = encoder_kind_from_string(m.at("encoder").get<std::string>());
        maybe(m, "hidden_size", cfg.model.hidden_size);
        maybe(m, "num_layers", cfg.model.num_layers);
        maybe(m, "heads", cfg.model.heads);
        maybe(m, "ff_dim", cfg.model.ff_dim);
        maybe(m, "lr", cfg.model.lr);
        maybe(m, "batch_size", cfg.model.batch_size);
        maybe(m, "max_epochs", cfg.model.max_epochs);
        maybe(m, "patience", cfg.model.patience);
        maybe(m, "mlp_hidden", cfg.model.mlp_hidden);
        maybe(m, "text_embed_dim", cfg.model.text_embed_dim);
        maybe(m, "max_text_len", cfg.model.max_text_len);
        maybe(m, "pos_weight", cfg.model.pos_weight);
        maybe(m, "external_embeddings", cfg.model.external_embeddings);
        if (cfg.model.encoder_kind == EncoderKind::Transformer) cfg.model.num_layers = 3;
    }

    maybe(j, "modalities", cfg.modalities);
    for (const auto& label : cfg.modalities) (void)ModalityMask::parse(label);
    maybe(j, "grid_search", cfg.grid_search);
    maybe(j, "factor_ablation", cfg.factor_ablation);
    maybe(j, "hybrid_freeze", cfg.hybrid_freeze);

    if (j.contains("features")) {
        const json& f = j.at("features");
        check_keys(f, {"n_bins", "iv_low", "iv_high", "vif_max"}, "features");
        maybe(f, "n_bins", cfg.features.n_bins);
        maybe(f, "iv_low", cfg.features.iv_low);
        maybe(f, "iv_high", cfg.features.iv_high);
        maybe(f, "vif_max", cfg.features.vif_max);
    }
    if (j.contains("metrics")) {
        check_keys(j.at("metrics"), {"resamples"}, "metrics");
        maybe(j.at("metrics"), "resamples", cfg.metrics.resamples);
    }
    if (j.contains("shap")) {
        const json& s = j.at("shap");
        check_keys(s,
                   {"budget", "background", "instances", "window_low", "window_high", "top_k",
                    "include_text_flag"},
                   "shap");
        maybe(s, "budget", cfg.shap.budget);
        maybe(s, "background", cfg.shap.background);
        maybe(s, "instances", cfg.shap.instances);
        maybe(s, "window_low", cfg.shap.window_low);
        maybe(s, "window_high", cfg.shap.window_high);
        maybe(s, "top_k", cfg.shap.top_k);
        maybe(s, "include_text_flag", cfg.shap.include_text_flag);
    }
    if (j.contains("schema")) {
        const json& s = j.at("schema");
        check_keys(s, {"numeric", "categorical"}, "schema");
        cfg.schema.numeric = s.at("numeric").get<std::vector<std::string>>();
        cfg.schema.categorical = s.at("categorical").get<std::vector<std::string>>();
    }
    return cfg;
}

json RunConfig::to_json() const {
    json j;
    j["seed"] = master_seed;
    j["n_seeds"] = n_seeds;
    j["generator"] = {{"n_loans", generator.n_loans},
                      {"default_rate", generator.default_rate},
                      {"n_stations", generator.n_stations},
                      {"clim_year_from", generator.clim_year_from},
                      {"clim_year_to", generator.clim_year_to},
                      {"loan_year_from", generator.loan_year_from},
                      {"loan_year_to", generator.loan_year_to},
                      {"beta_struct", generator.beta_struct},
                      {"beta_wlr", generator.beta_wlr},
                      {"beta_drought", generator.beta_drought},
                      {"beta_ht", generator.beta_ht},
                      {"beta_cf", generator.beta_cf},
                      {"beta_text", generator.beta_text},
                      {"text_min_len", generator.text_min_len},
                      {"text_mean_len", generator.text_mean_len},
                      {"text_len_sd", generator.text_len_sd},
                      {"text_max_len", generator.text_max_len}};
    json m = model.to_json();
    m.erase("modality");
    m.erase("seed");
    m.erase("encoder");
    m["encoder"] = to_string(model.encoder_kind);
    j["model"] = m;
    j["modalities"] = modalities;
    j["grid_search"] = grid_search;
    j["factor_ablation"] = factor_ablation;
    j["hybrid_freeze"] = hybrid_freeze;
    j["features"] = {{"n_bins", features.n_bins},
                     {"iv_low", features.iv_low},
                     {"iv_high", features.iv_high},
                     {"vif_max", features.vif_max}};
    j["metrics"] = {{"resamples", metrics.resamples}};
    j["shap"] = {{"budget", shap.budget},
                 {"background", shap.background},
                 {"instances", shap.instances},
                 {"window_low", shap.window_low},
                 {"window_high", shap.window_high},
                 {"top_k", shap.top_k},
                 {"include_text_flag", shap.include_text_flag}};
    j["schema"] = {{"numeric", schema.numeric}, {"categorical", schema.categorical}};
    return j;
}

std::string RunConfig::config_hash() const { return checksum_hex(fnv1a64(to_json().dump())); }

std::uint64_t RunConfig::seed_for(int seed_index) const {
    return Rng(master_seed, "run/seed" + std::to_string(seed_index)).next_u64();
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("config parse failure: " + std::string(e.what()));
    }
    return RunConfig::from_json(j);
}

// --- stage plumbing -----------------------------------------------------------

namespace stages {

namespace {

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

// which stage produces which artifact, for staleness checks
const std::map<std::string, std::string>& producer_table() {
    static const std::map<std::string, std::string> table = {
        {"stations.csv", "gen-data"},   {"weather.csv", "gen-data"},
        {"loans.csv", "gen-data"},      {"texts.tsv", "gen-data"},
        {"indices.csv", "compute-indices"},
        {"panels.csv", "build-panels"}, {"predictions.csv", "train"},
    };
    return table;
}

json read_manifest(const std::string& dir, const std::string& stage) {
    const std::string path = join(dir, "manifest_" + stage + ".json");
    std::ifstream in(path);
    if (!in) return json();
    json j;
    in >> j;
    return j;
}

// Inputs must exist; when the producing stage left a manifest, the recorded
// checksum must still match the file on disk.
void verify_inputs(const std::string& dir, const std::vector<std::string>& inputs) {
    for (const auto& name : inputs) {
        const std::string path = join(dir, name);
        if (!fs::exists(path)) throw ArtifactError("missing input artifact: " + path);
        const auto it = producer_table().find(name);
        if (it == producer_table().end()) continue;
        const json manifest = read_manifest(dir, it->second);
        if (manifest.is_null() || !manifest.contains("outputs")) continue;
        const auto& outputs = manifest.at("outputs");
        if (!outputs.contains(name)) continue;
        const std::string expected = outputs.at(name).get<std::string>();
        const std::string actual = checksum_hex(file_checksum(path));
        if (expected != actual)
            throw ArtifactError("stale artifact " + name + ": manifest checksum " + expected +
                                ", file checksum " + actual);
    }
}

void write_manifest(const RunConfig& cfg, const std::string& dir, const std::string& stage,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, const json* runs = nullptr) {
    json j;
    j["stage"] = stage;
    j["config_hash"] = cfg.config_hash();
    j["config"] = cfg.to_json();
    j["master_seed"] = cfg.master_seed;
    if (runs) j["runs"] = *runs;
    json in = json::object(), out = json::object();
    for (const auto& name : inputs) in[name] = checksum_hex(file_checksum(join(dir, name)));
    for (const auto& name : outputs) out[name] = checksum_hex(file_checksum(join(dir, name)));
    j["inputs"] = in;
    j["outputs"] = out;
    std::ofstream f(join(dir, "manifest_" + stage + ".json"), std::ios::trunc);
    f << j.dump(2) << '\n';
}

struct LoadedData {
    std::vector<LoanRecord> loans;   // restricted to loans with panels
    std::vector<ClimatePanel> panels;
    StructuredFrame frame;
    std::vector<int> labels;
};

LoadedData load_training_inputs(const RunConfig& cfg, const std::string& dir) {
    LoadedData d;
    auto loans = read_loans_csv(join(dir, "loans.csv"), cfg.schema);
    read_texts_tsv(join(dir, "texts.tsv"), loans);
    const auto panels = read_panels_csv(join(dir, "panels.csv"));
    std::map<std::string, const ClimatePanel*> by_id;
    for (const auto& p : panels) by_id[p.loan_id] = &p;
    for (auto& loan : loans) {
        const auto it = by_id.find(loan.loan_id);
        if (it == by_id.end()) continue;  // dropped for missing climate months
        d.panels.push_back(*it->second);
        d.loans.push_back(std::move(loan));
    }
    if (d.loans.empty()) throw ArtifactError("no loans with complete panels");
    d.frame = frame_from_attributes(d.loans, cfg.schema);
    for (const auto& l : d.loans) d.labels.push_back(l.label);
    return d;
}

DataBundle make_bundle(const LoadedData& d, const std::vector<std::vector<double>>& encoded) {
    DataBundle b;
    const int n = static_cast<int>(d.loans.size());
    b.structured = encoded;
    b.climate = Tensor(std::vector<int>{n, kPanelMonths, kPanelFactors});
    for (int i = 0; i < n; ++i) {
        b.loan_ids.push_back(d.loans[static_cast<std::size_t>(i)].loan_id);
        b.labels.push_back(d.loans[static_cast<std::size_t>(i)].label);
        b.texts.push_back(d.loans[static_cast<std::size_t>(i)].tokens);
        for (int t = 0; t < kPanelMonths; ++t)
            for (int f = 0; f < kPanelFactors; ++f)
                b.climate[static_cast<std::size_t>(
                    (static_cast<std::int64_t>(i) * kPanelMonths + t) * kPanelFactors + f)] =
                    d.panels[static_cast<std::size_t>(i)].at(t, f);
    }
    return b;
}

std::string ckpt_name(const std::string& label, int seed_index) {
    return "ckpt_" + label + "_seed" + std::to_string(seed_index) + ".json";
}

// Bounded worker pool over independent jobs; job outputs must be isolated.
void run_jobs(std::vector<std::function<void()>> jobs, unsigned max_workers) {
    const unsigned workers = std::max(1u, std::min({max_workers,
                                                    std::thread::hardware_concurrency(),
                                                    static_cast<unsigned>(jobs.size())}));
    if (workers <= 1) {
        for (auto& job : jobs) job();
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= jobs.size()) return;
                try {
                    jobs[i]();
                } catch (...) {
                    const std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

std::uint64_t split_checksum(const SplitPlan& split) {
    std::uint64_t h = 1469598103934665603ull;
    for (const Split s : split.assignment) {
        h ^= static_cast<unsigned char>(s);
        h *= 1099511628211ull;
    }
    return h;
}

void append_predictions(std::vector<PredictionRow>& rows, const std::string& label,
                        int seed_index, const DataBundle& bundle, const SplitPlan& split,
                        const FusionModel& model) {
    for (const Split s : {Split::Val, Split::Test}) {
        const std::vector<int> idx = split.rows(s);
        const std::vector<double> probs = model.predict(bundle, idx);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            PredictionRow r;
            r.model = label;
            r.seed = seed_index;
            r.loan_id = bundle.loan_ids[static_cast<std::size_t>(idx[i])];
            r.split = s == Split::Val ? "val" : "test";
            r.label = bundle.labels[static_cast<std::size_t>(idx[i])];
            r.probability = probs[i];
            rows.push_back(std::move(r));
        }
    }
}

}  // namespace

void gen_data(const RunConfig& cfg, const std::string& dir) {
    fs::create_directories(dir);
    const SynthDataset data = generate_dataset(cfg.generator);
    write_stations_csv(join(dir, "stations.csv"), data.station_meta());
    write_weather_csv(join(dir, "weather.csv"), data.weather);
    write_loans_csv(join(dir, "loans.csv"), data.loans, cfg.schema);
    write_texts_tsv(join(dir, "texts.tsv"), data.loans);
    write_manifest(cfg, dir, "gen-data", {},
                   {"stations.csv", "weather.csv", "loans.csv", "texts.tsv"});
}

void compute_indices(const RunConfig& cfg, const std::string& dir) {
    verify_inputs(dir, {"stations.csv", "weather.csv"});
    const auto metas = read_stations_csv(join(dir, "stations.csv"));
    const auto stations = read_weather_csv(join(dir, "weather.csv"), metas);

    std::vector<MonthlyIndexRow> all;
    for (const auto& st : stations) {
        if (st.days.empty()) continue;
        const PentadClimatology clim =
            build_pentad_climatology(st, cfg.generator.clim_year_from, cfg.generator.clim_year_to);
        const GammaFit fit = fit_precip_cdf(
            monthly_precip_totals(st, cfg.generator.clim_year_from, cfg.generator.clim_year_to));
        // first month is SPI warm-up; last partial month is dropped
        const YearMonth from = add_months(year_month_of(st.days.front().date), 1);
        YearMonth to = year_month_of(st.days.back().date);
        if (st.days.back().date.day < days_in_month(to.year, to.month)) to = add_months(to, -1);
        const auto rows = compute_station_indices(st, clim, fit, from, to);
        all.insert(all.end(), rows.begin(), rows.end());
    }
    write_indices_csv(join(dir, "indices.csv"), all);
    write_manifest(cfg, dir, "compute-indices", {"stations.csv", "weather.csv"}, {"indices.csv"});
}

void build_panels(const RunConfig& cfg, const std::string& dir) {
    verify_inputs(dir, {"stations.csv", "indices.csv", "loans.csv"});
    const auto metas = read_stations_csv(join(dir, "stations.csv"));
    const auto loans = read_loans_csv(join(dir, "loans.csv"), cfg.schema);
    MonthlyIndexStore store;
    for (const auto& row : read_indices_csv(join(dir, "indices.csv"))) store.insert(row);

    std::vector<ClimatePanel> panels;
    int dropped = 0;
    for (const auto& loan : loans) {
        const std::string station = nearest_station(loan, metas);
        try {
            panels.push_back(build_panel(loan, station, store));
        } catch (const MissingMonth& e) {
            ++dropped;
            std::cerr << "dropping " << loan.loan_id << ": " << e.what() << '\n';
        }
    }
    if (dropped > 0)
        std::cerr << "dropped " << dropped << " loans lacking complete climate panels\n";
    write_panels_csv(join(dir, "panels.csv"), panels);
    write_manifest(cfg, dir, "build-panels", {"stations.csv", "indices.csv", "loans.csv"},
                   {"panels.csv"});
}

void prep_features(const RunConfig& cfg, const std::string& dir) {
    verify_inputs(dir, {"loans.csv", "panels.csv", "texts.tsv"});
    const LoadedData d = load_training_inputs(cfg, dir);
    const SplitPlan split = make_split(d.labels, cfg.seed_for(0));
    WoeConfig wc{cfg.features.n_bins, cfg.features.iv_low, cfg.features.iv_high,
                 cfg.features.vif_max};
    const WoePipeline pipeline =
        WoePipeline::fit(d.frame, d.labels, split.rows(Split::Train), wc);
    write_selection_csv(join(dir, "selection_report.csv"), pipeline.report());
    std::ofstream bins(join(dir, "woe_bins.json"), std::ios::trunc);
    bins << pipeline.to_json().dump(2) << '\n';
    write_manifest(cfg, dir, "prep-features", {"loans.csv", "panels.csv", "texts.tsv"},
                   {"selection_report.csv", "woe_bins.json"});
}

namespace {
struct SeedOutputs {
    std::vector<PredictionRow> predictions;
    std::vector<std::string> files;
    json runs = json::array();  // one record per trained model
};

SeedOutputs train_one_seed(const RunConfig& cfg, const std::string& dir, const LoadedData& d,
                           int seed_index) {
    const WoeConfig wc{cfg.features.n_bins, cfg.features.iv_low, cfg.features.iv_high,
                       cfg.features.vif_max};
    const std::uint64_t seed = cfg.seed_for(seed_index);
    const SplitPlan split = make_split(d.labels, seed);
    SeedOutputs out;

    const WoePipeline pipeline = WoePipeline::fit(d.frame, d.labels, split.rows(Split::Train), wc);
    const std::string woe_name = "woe_seed" + std::to_string(seed_index) + ".json";
    {
        std::ofstream f(join(dir, woe_name), std::ios::trunc);
        f << pipeline.to_json().dump(2) << '\n';
    }
    out.files.push_back(woe_name);
    const DataBundle bundle = make_bundle(d, pipeline.encode(d.frame));

    // unimodal transformer branches for the freeze strategy, owned per seed
    json climate_ckpt, text_ckpt;

    auto run_one = [&](const std::string& label, const DataBundle& data_view) {
        ModelConfig mc = cfg.model;
        mc.mask = ModalityMask::parse(label);
        mc.seed = seed;
        TrainResult result;
        const bool multimodal = (mc.mask.structured + mc.mask.climate + mc.mask.text) > 1;
        const bool freeze = cfg.hybrid_freeze &&
                            cfg.model.encoder_kind == EncoderKind::Transformer && multimodal &&
                            (mc.mask.climate || mc.mask.text);
        if (freeze) {
            result = hybrid_freeze_train(mc, data_view, split,
                                         mc.mask.climate ? &climate_ckpt : nullptr,
                                         mc.mask.text ? &text_ckpt : nullptr);
        } else if (cfg.grid_search) {
            GridResult grid = grid_search(hyperparameter_grid(mc), data_view, split);
            result = std::move(grid.best);
        } else {
            result = train_model(mc, data_view, split);
        }
        if (label == "C" && cfg.hybrid_freeze) climate_ckpt = result.model->to_json();
        if (label == "T" && cfg.hybrid_freeze) text_ckpt = result.model->to_json();

        append_predictions(out.predictions, label, seed_index, data_view, split, *result.model);
        const std::string name = ckpt_name(label, seed_index);
        std::ofstream f(join(dir, name), std::ios::trunc);
        f << result.model->to_json().dump() << '\n';
        out.files.push_back(name);
        out.runs.push_back({{"model", label},
                            {"seed_index", seed_index},
                            {"seed", seed},
                            {"split_checksum", checksum_hex(split_checksum(split))},
                            {"val_bce", result.best_val},
                            {"best_epoch", result.best_epoch},
                            {"checkpoint", name}});
        std::cerr << "trained " << label << " seed " << seed_index << " val_bce "
                  << result.best_val << " best_epoch " << result.best_epoch << '\n';
    };

    // unimodal transformer checkpoints must exist before fused models
    std::vector<std::string> order = cfg.modalities;
    if (cfg.hybrid_freeze) {
        std::stable_sort(order.begin(), order.end(),
                         [](const std::string& a, const std::string& b) {
                             return a.size() < b.size();
                         });
        for (const char* needed : {"C", "T"}) {
            const bool any_fused = std::any_of(
                cfg.modalities.begin(), cfg.modalities.end(), [&](const std::string& m) {
                    const ModalityMask mask = ModalityMask::parse(m);
                    const bool multi = (mask.structured + mask.climate + mask.text) > 1;
                    return multi && (std::string(needed) == "C" ? mask.climate : mask.text);
                });
            if (any_fused && std::find(order.begin(), order.end(), needed) == order.end())
                order.insert(order.begin(), needed);
        }
    }
    for (const auto& label : order) run_one(label, bundle);

    if (cfg.factor_ablation) {
        for (int f = 0; f < kPanelFactors; ++f) {
            const DataBundle fb = single_factor_bundle(bundle, f);
            ModelConfig mc = cfg.model;
            mc.mask = ModalityMask::parse("S+C");
            mc.seed = seed;
            const TrainResult result = train_model(mc, fb, split);
            const std::string label =
                std::string("S+") + kFactorNames[static_cast<std::size_t>(f)];
            append_predictions(out.predictions, label, seed_index, fb, split, *result.model);
            const std::string name = ckpt_name(label, seed_index);
            std::ofstream f2(join(dir, name), std::ios::trunc);
            f2 << result.model->to_json().dump() << '\n';
            out.files.push_back(name);
            out.runs.push_back({{"model", label},
                                {"seed_index", seed_index},
                                {"seed", seed},
                                {"split_checksum", checksum_hex(split_checksum(split))},
                                {"val_bce", result.best_val},
                                {"best_epoch", result.best_epoch},
                                {"checkpoint", name}});
        }
    }
    return out;
}
}  // namespace

void train(const RunConfig& cfg, const std::string& dir) {
    verify_inputs(dir, {"loans.csv", "panels.csv", "texts.tsv"});
    const LoadedData d = load_training_inputs(cfg, dir);

    // seeds are independent jobs; the worker pool is bounded by the machine
    std::vector<SeedOutputs> per_seed(static_cast<std::size_t>(cfg.n_seeds));
    std::vector<std::function<void()>> jobs;
    for (int k = 0; k < cfg.n_seeds; ++k)
        jobs.push_back([&, k] { per_seed[static_cast<std::size_t>(k)] = train_one_seed(cfg, dir, d, k); });
    run_jobs(std::move(jobs), 8);

    std::vector<PredictionRow> predictions;
    std::vector<std::string> outputs;
    json runs = json::array();
    for (const auto& s : per_seed) {
        predictions.insert(predictions.end(), s.predictions.begin(), s.predictions.end());
        outputs.insert(outputs.end(), s.files.begin(), s.files.end());
        for (const auto& r : s.runs) runs.push_back(r);
    }
    write_predictions_csv(join(dir, "predictions.csv"), predictions);
    outputs.push_back("predictions.csv");
    write_manifest(cfg, dir, "train", {"loans.csv", "panels.csv", "texts.tsv"}, outputs, &runs);
}

namespace {
std::vector<std::string> factor_model_names() {
    std::vector<std::string> names;
    for (int f = 0; f < kPanelFactors; ++f)
        names.push_back(std::string("S+") + kFactorNames[static_cast<std::size_t>(f)]);
    return names;
}

// test-split scores per (model, seed), rows ordered as written
std::map<std::string, std::map<int, ScoreSet>> test_scores(
    const std::vector<PredictionRow>& rows) {
    std::map<std::string, std::map<int, ScoreSet>> out;
    for (const auto& r : rows) {
        if (r.split != "test") continue;
        ScoreSet& s = out[r.model][r.seed];
        s.scores.push_back(r.probability);
        s.labels.push_back(r.label);
    }
    return out;
}
}  // namespace

void evaluate(const RunConfig& cfg, const std::string& dir) {
    verify_inputs(dir, {"predictions.csv"});
    const auto rows = read_predictions_csv(join(dir, "predictions.csv"));
    const auto scores = test_scores(rows);

    std::vector<std::string> order = cfg.modalities;
    if (cfg.factor_ablation)
        for (const auto& n : factor_model_names()) order.push_back(n);

    std::vector<ReportRow> report;
    for (const auto& label : order) {
        const auto it = scores.find(label);
        if (it == scores.end()) continue;
        std::vector<ScoreSet> per_seed;
        for (const auto& [_, s] : it->second) per_seed.push_back(s);
        const auto summaries =
            bootstrap_summary(per_seed, cfg.metrics.resamples, cfg.master_seed);
        for (const auto& s : summaries) {
            ReportRow r;
            r.model = to_string(cfg.model.encoder_kind);
            r.modality = label;
            r.metric = s.metric;
            r.mean = s.mean;
            r.ci_low = s.ci_low;
            r.ci_high = s.ci_high;
            report.push_back(std::move(r));
        }
    }
    write_report_csv(join(dir, "report.csv"), report);
    write_manifest(cfg, dir, "evaluate", {"predictions.csv"}, {"report.csv"});
}

void correlate(const RunConfig& cfg, const std::string& dir) {
    verify_inputs(dir, {"predictions.csv"});
    const auto rows = read_predictions_csv(join(dir, "predictions.csv"));

    // pool test predictions across seeds, aligned by (seed, loan_id)
    auto pooled = [&](const std::vector<std::string>& names) {
        std::map<std::string, std::map<std::pair<int, std::string>, double>> per_model;
        for (const auto& r : rows) {
            if (r.split != "test") continue;
            per_model[r.model][{r.seed, r.loan_id}] = r.probability;
        }
        std::vector<std::vector<double>> vectors;
        std::vector<std::string> present;
        for (const auto& name : names) {
            const auto it = per_model.find(name);
            if (it == per_model.end()) continue;
            std::vector<double> v;
            v.reserve(it->second.size());
            for (const auto& [_, p] : it->second) v.push_back(p);
            vectors.push_back(std::move(v));
            present.push_back(name);
        }
        return std::make_pair(vectors, present);
    };

    const auto [mod_vectors, mod_names] = pooled(cfg.modalities);
    std::vector<std::string> outputs;
    if (mod_vectors.size() >= 2) {
        write_spearman_csv(join(dir, "spearman_modalities.csv"), mod_names,
                           spearman_matrix(mod_vectors));
        outputs.push_back("spearman_modalities.csv");
    }
    if (cfg.factor_ablation) {
        std::vector<std::string> names = {"S"};
        for (const auto& n : factor_model_names()) names.push_back(n);
        const auto [vectors, present] = pooled(names);
        if (vectors.size() >= 2) {
            write_spearman_csv(join(dir, "spearman_factors.csv"), present,
                               spearman_matrix(vectors));
            outputs.push_back("spearman_factors.csv");
        }
    }
    write_manifest(cfg, dir, "correlate", {"predictions.csv"}, outputs);
}

void explain(const RunConfig& cfg, const std::string& dir) {
    verify_inputs(dir, {"loans.csv", "panels.csv", "texts.tsv", "predictions.csv"});
    const LoadedData d = load_training_inputs(cfg, dir);
    const auto rows = read_predictions_csv(join(dir, "predictions.csv"));

    std::vector<ShapRow> shap_rows;
    std::vector<std::vector<std::string>> summary_rows;
    std::vector<std::vector<std::string>> period_rows;
    std::vector<std::vector<std::string>> case_rows;

    for (int seed_index = 0; seed_index < cfg.n_seeds; ++seed_index) {
        const std::uint64_t seed = cfg.seed_for(seed_index);
        const SplitPlan split = make_split(d.labels, seed);
        const std::vector<int> test_rows_idx = split.rows(Split::Test);
        const std::vector<int> train_rows_idx = split.rows(Split::Train);

        // structured-only vs combined probabilities on the test split
        std::map<std::string, double> p_struct, p_comb;
        for (const auto& r : rows) {
            if (r.seed != seed_index || r.split != "test") continue;
            if (r.model == "S") p_struct[r.loan_id] = r.probability;
            if (r.model == "S+C") p_comb[r.loan_id] = r.probability;
        }
        if (p_struct.empty() || p_comb.empty())
            throw ArtifactError("explain needs S and S+C predictions for seed " +
                                std::to_string(seed_index));

        std::vector<double> ps, pc;
        std::vector<int> labels, row_of;
        for (int idx : test_rows_idx) {
            const std::string& id = d.loans[static_cast<std::size_t>(idx)].loan_id;
            const auto its = p_struct.find(id);
            const auto itc = p_comb.find(id);
            if (its == p_struct.end() || itc == p_comb.end())
                throw ArtifactError("missing prediction for loan " + id);
            ps.push_back(its->second);
            pc.push_back(itc->second);
            labels.push_back(d.labels[static_cast<std::size_t>(idx)]);
            row_of.push_back(idx);
        }

        const UncertainCaseSet cases = select_uncertain_cases(
            ps, pc, labels, cfg.shap.window_low, cfg.shap.window_high, cfg.shap.top_k);
        for (std::size_t i = 0; i < cases.rows.size(); ++i) {
            const int idx = row_of[static_cast<std::size_t>(cases.rows[i])];
            case_rows.push_back({d.loans[static_cast<std::size_t>(idx)].loan_id,
                                 std::to_string(seed_index), format_double(cases.improvement[i])});
        }

        // rebuild the seed's bundle and combined model
        std::ifstream winf(join(dir, "woe_seed" + std::to_string(seed_index) + ".json"));
        if (!winf) throw ArtifactError("missing woe_seed" + std::to_string(seed_index) + ".json");
        json wjson;
        winf >> wjson;
        const WoePipeline pipeline = WoePipeline::from_json(wjson);
        const DataBundle bundle = make_bundle(d, pipeline.encode(d.frame));

        std::ifstream cinf(join(dir, ckpt_name("S+C", seed_index)));
        if (!cinf) throw ArtifactError("missing checkpoint " + ckpt_name("S+C", seed_index));
        json cjson;
        cinf >> cjson;
        const auto model = FusionModel::from_json(cjson);

        Rng bg_rng(cfg.master_seed, "shap/background/seed" + std::to_string(seed_index));
        std::vector<int> background = train_rows_idx;
        bg_rng.shuffle(background);
        background.resize(std::min<std::size_t>(background.size(),
                                                static_cast<std::size_t>(cfg.shap.background)));

        const FusionShapExplainer explainer(*model, bundle, background,
                                            cfg.shap.include_text_flag);
        ShapConfig sc;
        sc.budget = cfg.shap.budget;
        sc.seed = seed;

        std::vector<int> explain_rows;
        for (std::size_t i = 0;
             i < cases.rows.size() && i < static_cast<std::size_t>(cfg.shap.instances); ++i)
            explain_rows.push_back(row_of[static_cast<std::size_t>(cases.rows[i])]);

        std::vector<ShapResult> results;
        for (int idx : explain_rows) {
            const ShapResult res = explainer.explain(idx, sc);
            results.push_back(res);
            for (int j = 0; j < explainer.n_features(); ++j) {
                ShapRow r;
                r.loan_id = d.loans[static_cast<std::size_t>(idx)].loan_id;
                r.seed = seed_index;
                r.feature = explainer.feature_name(j);
                const bool is_climate =
                    j >= explainer.n_structured() &&
                    j < explainer.n_structured() + explainer.n_climate();
                if (is_climate) {
                    r.factor = kFactorNames[static_cast<std::size_t>(explainer.climate_factor(j))];
                    r.month_offset = explainer.climate_month_offset(j);
                }
                r.feature_value = explainer.feature_value(idx, j);
                r.shap_value = res.values[static_cast<std::size_t>(j)];
                r.base_value = res.base_value;
                shap_rows.push_back(std::move(r));
            }
        }

        if (!explain_rows.empty()) {
            const FactorAttribution fa = factor_attribution(explainer, explain_rows, results);
            std::vector<std::size_t> rank_order(fa.mean_abs_shap.size());
            std::iota(rank_order.begin(), rank_order.end(), 0);
            std::sort(rank_order.begin(), rank_order.end(), [&](std::size_t a, std::size_t b) {
                return fa.mean_abs_shap[a] > fa.mean_abs_shap[b];
            });
            std::vector<int> rank(fa.mean_abs_shap.size());
            for (std::size_t pos = 0; pos < rank_order.size(); ++pos)
                rank[rank_order[pos]] = static_cast<int>(pos) + 1;
            for (std::size_t f = 0; f < fa.mean_abs_shap.size(); ++f) {
                summary_rows.push_back({std::to_string(seed_index), kFactorNames[f],
                                        format_double(fa.mean_abs_shap[f]),
                                        format_double(fa.mean_signed_shap[f]),
                                        std::to_string(rank[f])});
                for (int month = 0; month < 12; ++month) {
                    const auto& dist = fa.distributions[f][static_cast<std::size_t>(month)];
                    double mean_shap = 0.0, mean_abs = 0.0, mean_value = 0.0;
                    for (const auto& [value, shap] : dist) {
                        mean_shap += shap;
                        mean_abs += std::abs(shap);
                        mean_value += value;
                    }
                    const double n = std::max<std::size_t>(dist.size(), 1);
                    period_rows.push_back({std::to_string(seed_index), kFactorNames[f],
                                           std::to_string(month - 12),
                                           format_double(mean_shap / n),
                                           format_double(mean_abs / n),
                                           format_double(mean_value / n)});
                }
            }
        }
    }

    write_shap_csv(join(dir, "shap.csv"), shap_rows);
    write_csv(join(dir, "factor_summary.csv"),
              {"seed", "factor", "mean_abs_shap", "mean_signed_shap", "rank"}, summary_rows);
    write_csv(join(dir, "factor_period_summary.csv"),
              {"seed", "factor", "month_offset", "mean_shap", "mean_abs_shap",
               "mean_feature_value"},
              period_rows);
    write_csv(join(dir, "uncertain_cases.csv"), {"loan_id", "seed", "improvement"}, case_rows);
    write_manifest(cfg, dir, "explain",
                   {"loans.csv", "panels.csv", "texts.tsv", "predictions.csv"},
                   {"shap.csv", "factor_summary.csv", "factor_period_summary.csv",
                    "uncertain_cases.csv"});
}

}  // namespace stages

}  // namespace credit
