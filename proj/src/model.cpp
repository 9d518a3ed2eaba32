#include "credit/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

namespace credit {

void ModalityMask::validate() const {
    if (!structured && !climate && !text)
        throw std::invalid_argument("modality mask must activate at least one branch");
}

std::string ModalityMask::label() const {
    validate();
    std::string s;
    auto append = [&s](const char* part) {
        if (!s.empty()) s += "+";
        s += part;
    };
    if (structured) append("S");
    if (climate) append("C");
    if (text) append("T");
    return s;
}

ModalityMask ModalityMask::parse(const std::string& label) {
    ModalityMask m;
    std::size_t i = 0;
    while (i < label.size()) {
        std::size_t j = label.find('+', i);
        if (j == std::string::npos) j = label.size();
        const std::string part = label.substr(i, j - i);
        if (part == "S")
            m.structured = true;
        else if (part == "C")
            m.climate = true;
        else if (part == "T")
            m.text = true;
        else
            throw std::invalid_argument("bad modality label: " + label);
        i = j + 1;
    }
    m.validate();
    return m;
}

void ModelConfig::validate() const {
    mask.validate();
    if (hidden_size < 1 || batch_size < 1 || max_epochs < 1 || patience < 0)
        throw std::invalid_argument("bad model config sizes");
    if (lr <= 0.0) throw std::invalid_argument("learning rate must be positive");
    if (encoder_kind == EncoderKind::Transformer && num_layers != 3)
        throw std::invalid_argument("transformer configuration fixes 3 layers");
}

nlohmann::json ModelConfig::to_json() const {
    return nlohmann::json{
        {"modality", mask.label()},
        {"encoder", to_string(encoder_kind)},
        {"hidden_size", hidden_size},
        {"num_layers", num_layers},
        {"heads", heads},
        {"ff_dim", ff_dim},
        {"lr", lr},
        {"batch_size", batch_size},
        {"max_epochs", max_epochs},
        {"patience", patience},
        {"seed", seed},
        {"mlp_hidden", mlp_hidden},
        {"text_embed_dim", text_embed_dim},
        {"max_text_len", max_text_len},
        {"pos_weight", pos_weight},
        {"external_embeddings", external_embeddings},
    };
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.mask = ModalityMask::parse(j.at("modality").get<std::string>());
    c.encoder_kind = encoder_kind_from_string(j.at("encoder").get<std::string>());
    c.hidden_size = j.at("hidden_size").get<int>();
    c.num_layers = j.at("num_layers").get<int>();
    c.heads = j.at("heads").get<int>();
    c.ff_dim = j.at("ff_dim").get<int>();
    c.lr = j.at("lr").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.max_epochs = j.at("max_epochs").get<int>();
    c.patience = j.at("patience").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.mlp_hidden = j.at("mlp_hidden").get<int>();
    c.text_embed_dim = j.at("text_embed_dim").get<int>();
    c.max_text_len = j.at("max_text_len").get<int>();
    c.pos_weight = j.at("pos_weight").get<double>();
    c.external_embeddings = j.at("external_embeddings").get<std::string>();
    return c;
}

std::vector<ModelConfig> hyperparameter_grid(const ModelConfig& base) {
    const std::vector<double> lrs = {2e-5, 1e-5, 1e-4, 1e-3};
    const std::vector<int> batches = {16, 32};
    const std::vector<int> layer_choices =
        base.encoder_kind == EncoderKind::Transformer ? std::vector<int>{3}
                                                      : std::vector<int>{2, 3};
    std::vector<ModelConfig> grid;
    for (int layers : layer_choices)
        for (double lr : lrs)
            for (int batch : batches) {
                ModelConfig c = base;
                c.num_layers = layers;
                c.lr = lr;
                c.batch_size = batch;
                grid.push_back(c);
            }
    return grid;
}

std::vector<int> SplitPlan::rows(Split s) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] == s) out.push_back(static_cast<int>(i));
    return out;
}

SplitPlan make_split(const std::vector<int>& labels, std::uint64_t seed) {
    SplitPlan plan;
    plan.seed = seed;
    plan.assignment.assign(labels.size(), Split::Train);

    bool has0 = false, has1 = false;
    for (int y : labels) (y == 1 ? has1 : has0) = true;
    if (!has0 || !has1) throw SingleClassLabels("split requires both classes");

    const Rng base(seed);
    for (int cls = 0; cls <= 1; ++cls) {
        std::vector<int> idx;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == cls) idx.push_back(static_cast<int>(i));
        Rng rng = base.stream("split/class" + std::to_string(cls));
        rng.shuffle(idx);

        const auto n = static_cast<double>(idx.size());
        const int n_test = static_cast<int>(std::llround(n * 0.30));
        const int n_pool = static_cast<int>(idx.size()) - n_test;
        const int n_val = static_cast<int>(std::llround(n_pool * 0.20));
        for (int i = 0; i < n_test; ++i) plan.assignment[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = Split::Test;
        for (int i = n_test; i < n_test + n_val; ++i)
            plan.assignment[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = Split::Val;
        // remaining n_pool - n_val rows stay TRAIN
    }
    return plan;
}

void DataBundle::validate(const ModalityMask& mask) const {
    const auto n = static_cast<std::size_t>(n_rows());
    if (loan_ids.size() != n) throw std::invalid_argument("loan ids misaligned");
    if (mask.structured && (structured.size() != n || n_structured() == 0))
        throw MissingModality("structured features required by the modality mask");
    if (mask.climate && (climate.numel() == 0 || climate.dim(0) != n_rows()))
        throw MissingModality("climate panels required by the modality mask");
    if (mask.text && texts.size() != n)
        throw MissingModality("texts required by the modality mask");
}

NormStats NormStats::fit(const Tensor& climate, const std::vector<int>& rows) {
    const int T = climate.dim(1), F = climate.dim(2);
    NormStats s;
    s.mean.assign(static_cast<std::size_t>(F), 0.0);
    s.std.assign(static_cast<std::size_t>(F), 1.0);
    if (rows.empty()) return s;
    const double n = static_cast<double>(rows.size()) * T;
    for (int f = 0; f < F; ++f) {
        double sum = 0.0;
        for (int r : rows)
            for (int t = 0; t < T; ++t)
                sum += climate[static_cast<std::size_t>((static_cast<std::int64_t>(r) * T + t) * F + f)];
        const double mean = sum / n;
        double ss = 0.0;
        for (int r : rows)
            for (int t = 0; t < T; ++t) {
                const double d =
                    climate[static_cast<std::size_t>((static_cast<std::int64_t>(r) * T + t) * F + f)] - mean;
                ss += d * d;
            }
        s.mean[static_cast<std::size_t>(f)] = mean;
        const double sd = std::sqrt(ss / n);
        s.std[static_cast<std::size_t>(f)] = sd > 1e-12 ? sd : 1.0;
    }
    return s;
}

// --- FusionModel ---------------------------------------------------------------

FusionModel::FusionModel(const ModelConfig& cfg, int n_structured, int climate_factors,
                         TokenVocab vocab, NormStats norm, std::uint64_t init_seed)
    : cfg_(cfg),
      n_structured_(n_structured),
      climate_factors_(climate_factors),
      vocab_(std::move(vocab)),
      norm_(std::move(norm)) {
    cfg_.validate();
    const Rng rng(init_seed, "init");

    if (cfg_.mask.climate) {
        EncoderConfig ec;
        ec.kind = cfg_.encoder_kind;
        ec.hidden_size = cfg_.hidden_size;
        ec.num_layers = cfg_.encoder_kind == EncoderKind::Transformer ? 3 : cfg_.num_layers;
        ec.heads = cfg_.heads;
        ec.ff_dim = cfg_.ff_dim;
        ec.input_dim = climate_factors_;
        ec.max_seq_len = 12;
        climate_enc_.emplace(store_, kClimatePrefix, ec, rng.stream("climate"));
    }
    if (cfg_.mask.text) {
        std::optional<ExternalEmbeddingTable> external;
        if (!cfg_.external_embeddings.empty())
            external = ExternalEmbeddingTable::load(cfg_.external_embeddings);
        text_emb_.emplace(store_, kTextEmbedPrefix, vocab_, cfg_.text_embed_dim,
                          rng.stream("text_emb"), external ? &*external : nullptr);
        EncoderConfig ec;
        ec.kind = cfg_.encoder_kind;
        ec.hidden_size = cfg_.hidden_size;
        ec.num_layers = cfg_.encoder_kind == EncoderKind::Transformer ? 3 : cfg_.num_layers;
        ec.heads = cfg_.heads;
        ec.ff_dim = cfg_.ff_dim;
        ec.input_dim = text_emb_->dim();
        ec.max_seq_len = cfg_.max_text_len;
        text_enc_.emplace(store_, kTextPrefix, ec, rng.stream("text"));
    }

    const std::string head = kHeadPrefix;
    if (cfg_.mask.structured && !cfg_.mask.climate && !cfg_.mask.text) {
        store_.create_dense(head + "/w1", n_structured_, cfg_.mlp_hidden, rng.stream("head_w1"));
        store_.create(head + "/b1", {cfg_.mlp_hidden});
        store_.create_dense(head + "/w2", cfg_.mlp_hidden, 1, rng.stream("head_w2"));
        store_.create(head + "/b2", {1});
    } else {
        store_.create_dense(head + "/w", fusion_input_dim(), 1, rng.stream("head_w"));
        store_.create(head + "/b", {1});
    }
}

void FusionModel::build_encoders() {
    if (cfg_.mask.climate) {
        EncoderConfig ec;
        ec.kind = cfg_.encoder_kind;
        ec.hidden_size = cfg_.hidden_size;
        ec.num_layers = cfg_.encoder_kind == EncoderKind::Transformer ? 3 : cfg_.num_layers;
        ec.heads = cfg_.heads;
        ec.ff_dim = cfg_.ff_dim;
        ec.input_dim = climate_factors_;
        ec.max_seq_len = 12;
        climate_enc_.emplace(store_, kClimatePrefix, ec);
    }
    if (cfg_.mask.text) {
        text_emb_.emplace(store_, kTextEmbedPrefix, vocab_, cfg_.text_embed_dim);
        EncoderConfig ec;
        ec.kind = cfg_.encoder_kind;
        ec.hidden_size = cfg_.hidden_size;
        ec.num_layers = cfg_.encoder_kind == EncoderKind::Transformer ? 3 : cfg_.num_layers;
        ec.heads = cfg_.heads;
        ec.ff_dim = cfg_.ff_dim;
        ec.input_dim = store_.at(std::string(kTextEmbedPrefix) + "/table").value.dim(1);
        ec.max_seq_len = cfg_.max_text_len;
        text_enc_.emplace(store_, kTextPrefix, ec);
    }
}

int FusionModel::fusion_input_dim() const {
    int dim = 0;
    if (cfg_.mask.structured) dim += n_structured_;
    if (cfg_.mask.climate) dim += cfg_.hidden_size;
    if (cfg_.mask.text) dim += cfg_.hidden_size;
    return dim;
}

Tensor FusionModel::climate_batch(const DataBundle& data, const std::vector<int>& rows) const {
    const int T = data.climate.dim(1), F = data.climate.dim(2);
    Tensor out(std::vector<int>{static_cast<int>(rows.size()), T, F});
    for (std::size_t b = 0; b < rows.size(); ++b) {
        for (int t = 0; t < T; ++t)
            for (int f = 0; f < F; ++f) {
                const double raw = data.climate[static_cast<std::size_t>(
                    (static_cast<std::int64_t>(rows[b]) * T + t) * F + f)];
                out[static_cast<std::size_t>((static_cast<std::int64_t>(b) * T + t) * F + f)] =
                    (raw - norm_.mean[static_cast<std::size_t>(f)]) /
                    norm_.std[static_cast<std::size_t>(f)];
            }
    }
    return out;
}

ValueRef FusionModel::forward(Tape& tape, const DataBundle& data,
                              const std::vector<int>& rows) const {
    data.validate(cfg_.mask);
    if (rows.empty()) throw EmptyBatch("forward over empty batch");
    const int B = static_cast<int>(rows.size());

    ValueRef structured_in{};
    if (cfg_.mask.structured) {
        Tensor s(std::vector<int>{B, n_structured_});
        for (int b = 0; b < B; ++b)
            for (int j = 0; j < n_structured_; ++j)
                s.at(b, j) = data.structured[static_cast<std::size_t>(rows[static_cast<std::size_t>(b)])]
                                            [static_cast<std::size_t>(j)];
        structured_in = tape.constant(std::move(s));
    }

    // structured-only benchmark: one hidden tanh layer
    if (cfg_.mask.structured && !cfg_.mask.climate && !cfg_.mask.text) {
        auto h = tape.tanh(tape.add_rowvec(
            tape.matmul(structured_in, tape.param(store_.at(std::string(kHeadPrefix) + "/w1"))),
            tape.param(store_.at(std::string(kHeadPrefix) + "/b1"))));
        auto logits = tape.add_rowvec(
            tape.matmul(h, tape.param(store_.at(std::string(kHeadPrefix) + "/w2"))),
            tape.param(store_.at(std::string(kHeadPrefix) + "/b2")));
        return tape.sigmoid(logits);
    }

    std::vector<ValueRef> parts;
    if (cfg_.mask.structured) parts.push_back(structured_in);
    if (cfg_.mask.climate) {
        const Tensor batch = climate_batch(data, rows);
        const Tensor mask(std::vector<int>{B, batch.dim(1)}, 1.0);
        parts.push_back(climate_enc_->encode(tape, batch, mask));
    }
    if (cfg_.mask.text) {
        std::vector<std::vector<std::string>> batch_texts;
        batch_texts.reserve(rows.size());
        for (int r : rows) batch_texts.push_back(data.texts[static_cast<std::size_t>(r)]);
        std::vector<std::vector<int>> ids;
        Tensor mask;
        text_emb_->prepare(batch_texts, cfg_.max_text_len, ids, mask);
        auto embedded = text_emb_->embed(tape, ids);
        parts.push_back(text_enc_->encode(tape, embedded, mask));
    }

    auto fused = parts.size() == 1 ? parts.front() : tape.concat_cols(parts);
    auto logits = tape.add_rowvec(
        tape.matmul(fused, tape.param(store_.at(std::string(kHeadPrefix) + "/w"))),
        tape.param(store_.at(std::string(kHeadPrefix) + "/b")));
    return tape.sigmoid(logits);
}

std::vector<double> FusionModel::predict(const DataBundle& data, const std::vector<int>& rows,
                                         int batch_size) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t at = 0; at < rows.size(); at += static_cast<std::size_t>(batch_size)) {
        const std::vector<int> chunk(rows.begin() + static_cast<std::ptrdiff_t>(at),
                                     rows.begin() + static_cast<std::ptrdiff_t>(
                                                        std::min(rows.size(),
                                                                 at + static_cast<std::size_t>(batch_size))));
        Tape tape;
        const ValueRef probs = forward(tape, data, chunk);
        const Tensor& p = tape.val(probs);
        for (std::int64_t i = 0; i < p.numel(); ++i) out.push_back(p[static_cast<std::size_t>(i)]);
    }
    return out;
}

double FusionModel::mean_bce(const DataBundle& data, const std::vector<int>& rows) const {
    const std::vector<double> probs = predict(data, rows);
    constexpr double kEps = 1e-7;
    double loss = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double p = std::clamp(probs[i], kEps, 1.0 - kEps);
        const double y = data.labels[static_cast<std::size_t>(rows[i])];
        loss -= cfg_.pos_weight * y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    return loss / static_cast<double>(rows.size());
}

nlohmann::json FusionModel::to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["config"] = cfg_.to_json();
    j["n_structured"] = n_structured_;
    j["climate_factors"] = climate_factors_;
    j["norm"] = {{"mean", norm_.mean}, {"std", norm_.std}};
    j["vocab"] = vocab_.id_to_token;
    nlohmann::json params = nlohmann::json::object();
    store_.for_each([&](const Parameter& p) {
        std::vector<double> values(p.value.data(), p.value.data() + p.value.numel());
        params[p.name] = {{"shape", p.value.shape()}, {"values", std::move(values)}};
    });
    j["params"] = std::move(params);
    return j;
}

std::unique_ptr<FusionModel> FusionModel::from_json(const nlohmann::json& j) {
    std::unique_ptr<FusionModel> m(new FusionModel());
    m->cfg_ = ModelConfig::from_json(j.at("config"));
    m->n_structured_ = j.at("n_structured").get<int>();
    m->climate_factors_ = j.at("climate_factors").get<int>();
    m->norm_.mean = j.at("norm").at("mean").get<std::vector<double>>();
    m->norm_.std = j.at("norm").at("std").get<std::vector<double>>();
    m->vocab_.id_to_token = j.at("vocab").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < m->vocab_.id_to_token.size(); ++i)
        m->vocab_.to_id[m->vocab_.id_to_token[i]] = static_cast<int>(i);

    for (const auto& [name, pj] : j.at("params").items()) {
        Parameter& p = m->store_.create(name, pj.at("shape").get<std::vector<int>>());
        const auto values = pj.at("values").get<std::vector<double>>();
        if (static_cast<std::int64_t>(values.size()) != p.value.numel())
            throw std::runtime_error("checkpoint size mismatch for " + name);
        std::copy(values.begin(), values.end(), p.value.data());
    }
    m->build_encoders();
    return m;
}

// --- training ------------------------------------------------------------------

namespace {
struct Snapshot {
    std::map<std::string, Tensor> values;
};

Snapshot take_snapshot(const ParamStore& store) {
    Snapshot s;
    store.for_each([&](const Parameter& p) { s.values[p.name] = p.value; });
    return s;
}

void restore_snapshot(ParamStore& store, const Snapshot& s) {
    store.for_each([&](Parameter& p) { p.value = s.values.at(p.name); });
}

TrainResult train_impl(std::unique_ptr<FusionModel> model, const ModelConfig& cfg,
                       const DataBundle& data, const SplitPlan& split) {
    const std::vector<int> train_rows = split.rows(Split::Train);
    const std::vector<int> val_rows = split.rows(Split::Val);
    if (train_rows.empty() || val_rows.empty())
        throw std::invalid_argument("split leaves train or validation empty");

    const Rng base(cfg.seed);
    TrainResult result;
    Snapshot best = take_snapshot(model->params());
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = -1;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::vector<int> order = train_rows;
        Rng shuffle_rng = base.stream("shuffle/epoch" + std::to_string(epoch));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
            const std::vector<int> batch(
                order.begin() + static_cast<std::ptrdiff_t>(at),
                order.begin() + static_cast<std::ptrdiff_t>(
                                    std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size))));
            Tensor labels(std::vector<int>{static_cast<int>(batch.size())});
            for (std::size_t i = 0; i < batch.size(); ++i)
                labels[i] = data.labels[static_cast<std::size_t>(batch[i])];
            try {
                Tape tape;
                const ValueRef probs = model->forward(tape, data, batch);
                const ValueRef loss = tape.bce_loss(probs, labels, cfg.pos_weight);
                model->params().zero_grads();
                tape.backward(loss);
                model->params().adam_step(cfg.lr);
                epoch_loss += tape.val(loss)[0] * static_cast<double>(batch.size());
                seen += batch.size();
            } catch (const NonFinite& e) {
                throw Divergence("training diverged at epoch " + std::to_string(epoch) +
                                     ", batch " + std::to_string(at / cfg.batch_size) + ": " +
                                     e.what(),
                                 epoch, static_cast<int>(at / cfg.batch_size));
            }
        }
        result.train_curve.push_back(epoch_loss / static_cast<double>(seen));

        const double val = model->mean_bce(data, val_rows);
        result.val_curve.push_back(val);
        if (val < best_val) {
            best_val = val;
            best_epoch = epoch;
            best = take_snapshot(model->params());
        }
        if (epoch - best_epoch >= cfg.patience) break;
    }

    restore_snapshot(model->params(), best);
    result.best_epoch = best_epoch;
    result.best_val = best_val;
    result.model = std::move(model);
    return result;
}
}  // namespace

TrainResult train_model(const ModelConfig& cfg, const DataBundle& data, const SplitPlan& split) {
    cfg.validate();
    data.validate(cfg.mask);
    const std::vector<int> train_rows = split.rows(Split::Train);

    TokenVocab vocab;
    if (cfg.mask.text) {
        std::vector<std::vector<std::string>> train_texts;
        for (int r : train_rows) train_texts.push_back(data.texts[static_cast<std::size_t>(r)]);
        vocab = TokenVocab::fit(train_texts);
    }
    NormStats norm;
    if (cfg.mask.climate) norm = NormStats::fit(data.climate, train_rows);

    auto model = std::make_unique<FusionModel>(cfg, data.n_structured(), data.climate_factors(),
                                               std::move(vocab), std::move(norm), cfg.seed);
    return train_impl(std::move(model), cfg, data, split);
}

GridResult grid_search(const std::vector<ModelConfig>& grid, const DataBundle& data,
                       const SplitPlan& split) {
    if (grid.empty()) throw std::invalid_argument("empty hyperparameter grid");
    GridResult result;
    int best_idx = -1;
    for (const auto& cfg : grid) {
        GridCell cell;
        cell.config = cfg;
        try {
            TrainResult r = train_model(cfg, data, split);
            cell.val_bce = r.best_val;
            cell.best_epoch = r.best_epoch;
            const bool better =
                best_idx < 0 || cell.val_bce < result.best.best_val ||
                (cell.val_bce == result.best.best_val &&
                 std::make_tuple(cfg.lr, cfg.batch_size, cfg.num_layers) <
                     std::make_tuple(result.best.model->config().lr,
                                     result.best.model->config().batch_size,
                                     result.best.model->config().num_layers));
            if (better) {
                result.best = std::move(r);
                best_idx = static_cast<int>(result.leaderboard.size());
            }
        } catch (const std::exception& e) {
            cell.failed = true;
            cell.error = e.what();
        }
        result.leaderboard.push_back(std::move(cell));
    }
    if (best_idx < 0) throw std::runtime_error("every grid cell failed");
    std::stable_sort(result.leaderboard.begin(), result.leaderboard.end(),
                     [](const GridCell& a, const GridCell& b) {
                         if (a.failed != b.failed) return !a.failed;
                         if (a.val_bce != b.val_bce) return a.val_bce < b.val_bce;
                         return std::make_tuple(a.config.lr, a.config.batch_size,
                                                a.config.num_layers) <
                                std::make_tuple(b.config.lr, b.config.batch_size,
                                                b.config.num_layers);
                     });
    return result;
}

TrainResult hybrid_freeze_train(const ModelConfig& cfg, const DataBundle& data,
                                const SplitPlan& split,
                                const nlohmann::json* climate_checkpoint,
                                const nlohmann::json* text_checkpoint) {
    cfg.validate();
    data.validate(cfg.mask);
    if (cfg.mask.climate && !climate_checkpoint)
        throw MissingCheckpoint("hybrid training needs a pretrained climate checkpoint");
    if (cfg.mask.text && !text_checkpoint)
        throw MissingCheckpoint("hybrid training needs a pretrained text checkpoint");

    // Vocabulary and normalization come from the pretrained branches so the
    // frozen parameters see the inputs they were trained on.
    TokenVocab vocab;
    NormStats norm;
    ModelConfig cfg_resolved = cfg;
    if (cfg.mask.text) {
        const auto pretrained = FusionModel::from_json(*text_checkpoint);
        vocab = pretrained->vocab();
        cfg_resolved.text_embed_dim =
            pretrained->params().at(std::string(FusionModel::kTextEmbedPrefix) + "/table")
                .value.dim(1);
    }
    if (cfg.mask.climate) {
        const auto pretrained = FusionModel::from_json(*climate_checkpoint);
        norm = pretrained->norm();
    }

    auto model = std::make_unique<FusionModel>(cfg_resolved, data.n_structured(),
                                               data.climate_factors(), std::move(vocab),
                                               std::move(norm), cfg.seed);

    auto copy_branch = [&](const nlohmann::json& ckpt, const std::string& prefix) {
        const auto& params = ckpt.at("params");
        bool copied = false;
        for (const auto& [name, pj] : params.items()) {
            if (name.rfind(prefix, 0) != 0) continue;
            Parameter* dst = model->params().find(name);
            if (!dst) throw MissingCheckpoint("checkpoint parameter " + name + " has no slot");
            const auto values = pj.at("values").get<std::vector<double>>();
            if (static_cast<std::int64_t>(values.size()) != dst->value.numel())
                throw MissingCheckpoint("checkpoint shape mismatch for " + name);
            std::copy(values.begin(), values.end(), dst->value.data());
            copied = true;
        }
        if (!copied) throw MissingCheckpoint("checkpoint lacks branch " + prefix);
        model->params().set_frozen(prefix, true);
    };
    if (cfg.mask.climate) copy_branch(*climate_checkpoint, FusionModel::kClimatePrefix);
    if (cfg.mask.text) {
        copy_branch(*text_checkpoint, FusionModel::kTextPrefix);
        copy_branch(*text_checkpoint, FusionModel::kTextEmbedPrefix);
    }

    return train_impl(std::move(model), cfg_resolved, data, split);
}

}  // namespace credit
