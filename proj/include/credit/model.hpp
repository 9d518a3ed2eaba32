#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "credit/autodiff.hpp"
#include "credit/encoders.hpp"
#include "credit/features.hpp"

namespace credit {

struct MissingModality : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MissingCheckpoint : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct Divergence : std::runtime_error {
    Divergence(std::string msg, int epoch_, int batch_)
        : std::runtime_error(std::move(msg)), epoch(epoch_), batch(batch_) {}
    int epoch = -1;
    int batch = -1;
};

struct ModalityMask {
    bool structured = false;
    bool climate = false;
    bool text = false;

    void validate() const;  // at least one branch active
    std::string label() const;  // "S", "C+T", "S+C+T", ...
    static ModalityMask parse(const std::string& label);
    bool operator==(const ModalityMask&) const = default;
};

struct ModelConfig {
    ModalityMask mask{true, false, false};
    EncoderKind encoder_kind = EncoderKind::GRU;
    int hidden_size = 128;
    int num_layers = 2;  // transformer forces 3
    int heads = 8;
    int ff_dim = 256;
    double lr = 1e-3;
    int batch_size = 32;
    int max_epochs = 100;
    int patience = 10;
    std::uint64_t seed = 0;
    int mlp_hidden = 64;       // structured-only benchmark head
    int text_embed_dim = 32;
    int max_text_len = 326;
    double pos_weight = 1.0;   // optional positive-class reweighting
    std::string external_embeddings;  // optional path; frozen when set

    void validate() const;
    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

// Footnote-style hyperparameter grid: recurrent kinds search layers
// {2,3} x lr x batch (16 cells); the transformer fixes 3 layers (8 cells).
std::vector<ModelConfig> hyperparameter_grid(const ModelConfig& base);

enum class Split : std::int8_t { Train = 0, Val = 1, Test = 2 };

struct SplitPlan {
    std::vector<Split> assignment;  // per loan index
    std::uint64_t seed = 0;

    std::vector<int> rows(Split s) const;
};

// Stratified 70/30 train-pool/test split with 20% of the pool as validation;
// per-class counts round to nearest with the remainder in TRAIN.
SplitPlan make_split(const std::vector<int>& labels, std::uint64_t seed);

// Everything a model can consume, aligned per loan.
struct DataBundle {
    std::vector<std::string> loan_ids;
    std::vector<int> labels;
    std::vector<std::vector<double>> structured;       // N x k (possibly k = 0)
    Tensor climate;                                    // (N, 12, F) or empty
    std::vector<std::vector<std::string>> texts;       // token lists

    int n_rows() const { return static_cast<int>(labels.size()); }
    int n_structured() const {
        return structured.empty() ? 0 : static_cast<int>(structured.front().size());
    }
    int climate_factors() const { return climate.numel() > 0 ? climate.dim(2) : 0; }
    void validate(const ModalityMask& mask) const;
};

struct NormStats {
    std::vector<double> mean;  // per climate factor
    std::vector<double> std;

    static NormStats fit(const Tensor& climate, const std::vector<int>& rows);
};

// Fig.-2-style fusion model: active branch latents concatenated with the raw
// WoE vector into a single dense sigmoid unit; the structured-only
// configuration is a one-hidden-layer tanh MLP benchmark instead.
class FusionModel {
public:
    FusionModel(const ModelConfig& cfg, int n_structured, int climate_factors,
                TokenVocab vocab, NormStats norm, std::uint64_t init_seed);

    // Batched forward for the given bundle rows.
    ValueRef forward(Tape& tape, const DataBundle& data, const std::vector<int>& rows) const;
    std::vector<double> predict(const DataBundle& data, const std::vector<int>& rows,
                                int batch_size = 256) const;
    double mean_bce(const DataBundle& data, const std::vector<int>& rows) const;

    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }
    const ModelConfig& config() const { return cfg_; }
    const TokenVocab& vocab() const { return vocab_; }
    const NormStats& norm() const { return norm_; }
    int fusion_input_dim() const;

    nlohmann::json to_json() const;
    static std::unique_ptr<FusionModel> from_json(const nlohmann::json& j);

    static constexpr const char* kClimatePrefix = "enc/climate";
    static constexpr const char* kTextPrefix = "enc/text";
    static constexpr const char* kTextEmbedPrefix = "emb/text";
    static constexpr const char* kHeadPrefix = "head";

private:
    FusionModel() = default;
    void build_encoders();
    Tensor climate_batch(const DataBundle& data, const std::vector<int>& rows) const;

    ModelConfig cfg_;
    int n_structured_ = 0;
    int climate_factors_ = 0;
    TokenVocab vocab_;
    NormStats norm_;
    mutable ParamStore store_;  // gradient buffers are scratch state
    std::optional<SequenceEncoder> climate_enc_;
    std::optional<SequenceEncoder> text_enc_;
    std::optional<TextEmbedder> text_emb_;
};

struct TrainResult {
    std::unique_ptr<FusionModel> model;
    std::vector<double> train_curve;
    std::vector<double> val_curve;
    int best_epoch = -1;   // 0-based
    double best_val = 0.0;
};

TrainResult train_model(const ModelConfig& cfg, const DataBundle& data, const SplitPlan& split);

struct GridCell {
    ModelConfig config;
    double val_bce = 0.0;
    int best_epoch = -1;
    bool failed = false;
    std::string error;
};

struct GridResult {
    std::vector<GridCell> leaderboard;  // ascending by validation BCE
    TrainResult best;
};

GridResult grid_search(const std::vector<ModelConfig>& grid, const DataBundle& data,
                       const SplitPlan& split);

// Pretrained unimodal transformer branches are copied in and frozen; only the
// fusion head trains. Checkpoints must contain the branch the mask activates.
TrainResult hybrid_freeze_train(const ModelConfig& cfg, const DataBundle& data,
                                const SplitPlan& split,
                                const nlohmann::json* climate_checkpoint,
                                const nlohmann::json* text_checkpoint);

}  // namespace credit
