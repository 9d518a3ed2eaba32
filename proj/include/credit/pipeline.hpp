#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "credit/model.hpp"
#include "credit/synth.hpp"

namespace credit {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ArtifactError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FeatureOptions {
    int n_bins = 5;
    double iv_low = 0.01;
    double iv_high = 0.50;
    double vif_max = 10.0;
};

struct MetricOptions {
    int resamples = 1000;
};

struct ShapOptions {
    int budget = 2048;
    int background = 100;
    int instances = 50;
    double window_low = 0.30;
    double window_high = 0.70;
    int top_k = 500;
    bool include_text_flag = false;
};

// Whole-run configuration; JSON round-trip rejects unknown keys.
struct RunConfig {
    std::uint64_t master_seed = 1;
    int n_seeds = 5;
    GenSpec generator;
    ModelConfig model;  // mask ignored; modalities below drive the masks
    std::vector<std::string> modalities = {"S", "C", "T", "S+C", "S+T", "C+T", "S+C+T"};
    bool grid_search = false;
    bool factor_ablation = true;
    bool hybrid_freeze = false;
    FeatureOptions features;
    MetricOptions metrics;
    ShapOptions shap;
    StructuredSchema schema = synth_structured_schema();

    static RunConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    std::string config_hash() const;
    std::uint64_t seed_for(int seed_index) const;
};

RunConfig load_run_config(const std::string& path);

namespace stages {

// Each stage reads its inputs from `dir`, verifies them against the producing
// stage's manifest checksums, writes its outputs and a manifest of its own.
void gen_data(const RunConfig& cfg, const std::string& dir);
void compute_indices(const RunConfig& cfg, const std::string& dir);
void build_panels(const RunConfig& cfg, const std::string& dir);
void prep_features(const RunConfig& cfg, const std::string& dir);
void train(const RunConfig& cfg, const std::string& dir);
void evaluate(const RunConfig& cfg, const std::string& dir);
void correlate(const RunConfig& cfg, const std::string& dir);
void explain(const RunConfig& cfg, const std::string& dir);

}  // namespace stages

}  // namespace credit
