// Command-line front end chaining the pipeline stages:
// gen-data -> compute-indices -> build-panels -> prep-features -> train ->
// evaluate / correlate / explain. Every stage is re-runnable from the files
// the previous stages left in the output directory.
#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "credit/pipeline.hpp"

namespace {

std::string canonical_modality(const std::string& arg) {
    credit::ModalityMask mask;
    std::size_t at = 0;
    while (at <= arg.size()) {
        std::size_t comma = arg.find(',', at);
        if (comma == std::string::npos) comma = arg.size();
        const std::string part = arg.substr(at, comma - at);
        if (part == "structured" || part == "S")
            mask.structured = true;
        else if (part == "climate" || part == "C")
            mask.climate = true;
        else if (part == "text" || part == "T")
            mask.text = true;
        else
            throw credit::ConfigError("unknown modality component: " + part);
        at = comma + 1;
    }
    return mask.label();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multimodal climate-credit default prediction pipeline"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string out_dir = "out";
    app.add_option("--config", config_path, "run configuration JSON")->check(CLI::ExistingFile);
    app.add_option("--out-dir", out_dir, "artifact directory");

    // high-traffic overrides; everything else comes from the config file
    std::uint64_t seed_override = 0;
    bool seed_set = false;
    int n_seeds_override = 0;
    int n_loans_override = 0;
    double rate_override = -1.0;
    std::string encoder_override;
    std::vector<std::string> modality_flags;
    int epochs_override = 0;
    int resamples_override = 0;
    int shap_instances_override = -1;
    bool grid_flag = false, hybrid_flag = false, no_ablation_flag = false;

    app.add_option("--seed", seed_override, "master seed")->each([&](const std::string&) {
        seed_set = true;
    });
    app.add_option("--n-seeds", n_seeds_override, "number of training seeds");
    app.add_option("--n-loans", n_loans_override, "generator loan count");
    app.add_option("--default-rate", rate_override, "generator default rate");
    app.add_option("--encoder", encoder_override, "lstm|gru|transformer");
    app.add_option("--modality", modality_flags,
                   "model spec like structured,climate (repeatable)");
    app.add_option("--epochs", epochs_override, "max training epochs");
    app.add_option("--resamples", resamples_override, "bootstrap resamples per seed");
    app.add_option("--shap-instances", shap_instances_override, "explained cases per seed");
    app.add_flag("--grid", grid_flag, "hyperparameter grid search per model");
    app.add_flag("--hybrid-freeze", hybrid_flag, "freeze pretrained transformer branches");
    app.add_flag("--no-factor-ablation", no_ablation_flag, "skip per-factor models");

    const std::vector<std::pair<std::string, void (*)(const credit::RunConfig&,
                                                      const std::string&)>>
        stage_table = {
            {"gen-data", credit::stages::gen_data},
            {"compute-indices", credit::stages::compute_indices},
            {"build-panels", credit::stages::build_panels},
            {"prep-features", credit::stages::prep_features},
            {"train", credit::stages::train},
            {"evaluate", credit::stages::evaluate},
            {"correlate", credit::stages::correlate},
            {"explain", credit::stages::explain},
        };
    for (const auto& [name, _] : stage_table) app.add_subcommand(name);

    CLI11_PARSE(app, argc, argv);

    try {
        credit::RunConfig cfg =
            config_path.empty() ? credit::RunConfig{} : credit::load_run_config(config_path);
        if (seed_set) {
            cfg.master_seed = seed_override;
            cfg.generator.seed = seed_override;
        }
        if (n_seeds_override > 0) cfg.n_seeds = n_seeds_override;
        if (n_loans_override > 0) cfg.generator.n_loans = n_loans_override;
        if (rate_override > 0.0) cfg.generator.default_rate = rate_override;
        if (!encoder_override.empty())
            cfg.model.encoder_kind = credit::encoder_kind_from_string(encoder_override);
        if (cfg.model.encoder_kind == credit::EncoderKind::Transformer) cfg.model.num_layers = 3;
        if (!modality_flags.empty()) {
            cfg.modalities.clear();
            for (const auto& flag : modality_flags)
                cfg.modalities.push_back(canonical_modality(flag));
        }
        if (epochs_override > 0) cfg.model.max_epochs = epochs_override;
        if (resamples_override > 0) cfg.metrics.resamples = resamples_override;
        if (shap_instances_override >= 0) cfg.shap.instances = shap_instances_override;
        if (grid_flag) cfg.grid_search = true;
        if (hybrid_flag) cfg.hybrid_freeze = true;
        if (no_ablation_flag) cfg.factor_ablation = false;

        for (const auto& [name, fn] : stage_table) {
            if (app.get_subcommand(name)->parsed()) {
                fn(cfg, out_dir);
                return 0;
            }
        }
        std::cerr << "no stage selected\n";
        return 1;
    } catch (const credit::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const credit::ArtifactError& e) {
        std::cerr << "artifact error: " << e.what() << '\n';
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return 2;
    }
}
