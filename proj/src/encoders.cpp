#include "credit/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace credit {

std::string to_string(EncoderKind k) {
    switch (k) {
        case EncoderKind::LSTM: return "lstm";
        case EncoderKind::GRU: return "gru";
        case EncoderKind::Transformer: return "transformer";
    }
    return "?";
}

EncoderKind encoder_kind_from_string(const std::string& s) {
    if (s == "lstm") return EncoderKind::LSTM;
    if (s == "gru") return EncoderKind::GRU;
    if (s == "transformer") return EncoderKind::Transformer;
    throw std::invalid_argument("unknown encoder kind: " + s);
}

void EncoderConfig::validate() const {
    if (hidden_size < 1 || num_layers < 1 || input_dim < 1)
        throw std::invalid_argument("encoder sizes must be >= 1");
    if (kind == EncoderKind::Transformer) {
        if (heads < 1 || ff_dim < 1) throw std::invalid_argument("encoder sizes must be >= 1");
        if (hidden_size % heads != 0)
            throw std::invalid_argument("transformer hidden size must be divisible by heads");
    }
}

Tensor positional_encoding_table(int max_len, int dim) {
    Tensor pe(std::vector<int>{max_len, dim});
    for (int pos = 0; pos < max_len; ++pos) {
        for (int i = 0; i < dim; i += 2) {
            const double angle = pos / std::pow(10000.0, static_cast<double>(i) / dim);
            pe.at(pos, i) = std::sin(angle);
            if (i + 1 < dim) pe.at(pos, i + 1) = std::cos(angle);
        }
    }
    return pe;
}

namespace {
std::string layer_name(const std::string& prefix, const char* block, int layer,
                       const char* leaf) {
    return prefix + "/" + block + std::to_string(layer) + "/" + leaf;
}
}  // namespace

SequenceEncoder::SequenceEncoder(ParamStore& store, std::string prefix, EncoderConfig cfg,
                                 const Rng& rng)
    : store_(&store), prefix_(std::move(prefix)), cfg_(cfg) {
    cfg_.validate();
    const int H = cfg_.hidden_size;
    auto dense = [&](const std::string& name, int fi, int fo) {
        store_->create_dense(name, fi, fo, rng.stream(name));
    };
    auto zeros = [&](const std::string& name, int n) { store_->create(name, {n}); };

    if (cfg_.kind == EncoderKind::LSTM) {
        for (int l = 0; l < cfg_.num_layers; ++l) {
            const int in = l == 0 ? cfg_.input_dim : H;
            dense(layer_name(prefix_, "lstm", l, "wx"), in, 4 * H);
            dense(layer_name(prefix_, "lstm", l, "wh"), H, 4 * H);
            zeros(layer_name(prefix_, "lstm", l, "b"), 4 * H);
        }
    } else if (cfg_.kind == EncoderKind::GRU) {
        for (int l = 0; l < cfg_.num_layers; ++l) {
            const int in = l == 0 ? cfg_.input_dim : H;
            dense(layer_name(prefix_, "gru", l, "wx_zr"), in, 2 * H);
            dense(layer_name(prefix_, "gru", l, "wh_zr"), H, 2 * H);
            zeros(layer_name(prefix_, "gru", l, "b_zr"), 2 * H);
            dense(layer_name(prefix_, "gru", l, "wx_h"), in, H);
            dense(layer_name(prefix_, "gru", l, "wh_h"), H, H);
            zeros(layer_name(prefix_, "gru", l, "b_h"), H);
        }
    } else {
        dense(prefix_ + "/inproj/w", cfg_.input_dim, H);
        zeros(prefix_ + "/inproj/b", H);
        dense(prefix_ + "/cls", 1, H);
        for (int l = 0; l < cfg_.num_layers; ++l) {
            for (const char* leaf : {"wq", "wk", "wv", "wo"})
                dense(layer_name(prefix_, "layer", l, leaf), H, H);
            for (const char* leaf : {"bq", "bk", "bv", "bo"})
                zeros(layer_name(prefix_, "layer", l, leaf), H);
            dense(layer_name(prefix_, "layer", l, "ff_w1"), H, cfg_.ff_dim);
            zeros(layer_name(prefix_, "layer", l, "ff_b1"), cfg_.ff_dim);
            dense(layer_name(prefix_, "layer", l, "ff_w2"), cfg_.ff_dim, H);
            zeros(layer_name(prefix_, "layer", l, "ff_b2"), H);
            for (const char* ln : {"ln1_g", "ln2_g"}) {
                Parameter& g = store_->create(layer_name(prefix_, "layer", l, ln), {H});
                g.value.fill(1.0);
            }
            for (const char* ln : {"ln1_b", "ln2_b"})
                zeros(layer_name(prefix_, "layer", l, ln), H);
        }
        Parameter& gf = store_->create(prefix_ + "/lnf_g", {H});
        gf.value.fill(1.0);
        zeros(prefix_ + "/lnf_b", H);
    }
}

SequenceEncoder::SequenceEncoder(ParamStore& store, std::string prefix, EncoderConfig cfg)
    : store_(&store), prefix_(std::move(prefix)), cfg_(cfg) {
    cfg_.validate();
}

ValueRef SequenceEncoder::encode(Tape& tape, const Tensor& batch, const Tensor& mask) const {
    Tensor copy = batch;  // constant() below may reallocate node storage
    return encode(tape, tape.constant(std::move(copy)), mask);
}

ValueRef SequenceEncoder::encode(Tape& tape, ValueRef batch, const Tensor& mask) const {
    const Tensor& in = tape.val(batch);
    if (in.ndim() != 3) throw ShapeMismatch("encoder input must be (B,T,d)");
    if (in.dim(2) != cfg_.input_dim) throw ShapeMismatch("encoder input dim mismatch");
    if (cfg_.max_seq_len > 0 && in.dim(1) > cfg_.max_seq_len)
        throw SequenceTooLong("sequence length " + std::to_string(in.dim(1)) +
                              " exceeds max " + std::to_string(cfg_.max_seq_len));
    if (mask.rows() != in.dim(0) || mask.cols() != in.dim(1))
        throw ShapeMismatch("encoder mask shape mismatch");
    return cfg_.kind == EncoderKind::Transformer ? encode_transformer(tape, batch, mask)
                                                 : encode_recurrent(tape, batch, mask);
}

ValueRef SequenceEncoder::encode_recurrent(Tape& tape, ValueRef batch,
                                           const Tensor& mask) const {
    const int B = tape.val(batch).dim(0), T = tape.val(batch).dim(1), H = cfg_.hidden_size;
    auto P = [&](const std::string& name) { return tape.param(store_->at(name)); };

    // per-step (B,H) keep/update masks
    std::vector<ValueRef> keep(T), update(T);
    for (int t = 0; t < T; ++t) {
        Tensor m(std::vector<int>{B, H});
        Tensor inv(std::vector<int>{B, H});
        for (int b = 0; b < B; ++b) {
            const double v = mask.at(b, t);
            for (int j = 0; j < H; ++j) {
                m.at(b, j) = v;
                inv.at(b, j) = 1.0 - v;
            }
        }
        update[t] = tape.constant(std::move(m));
        keep[t] = tape.constant(std::move(inv));
    }

    std::vector<ValueRef> sequence(T);
    for (int t = 0; t < T; ++t) sequence[t] = tape.slice_time(batch, t);

    ValueRef last_hidden{};
    for (int l = 0; l < cfg_.num_layers; ++l) {
        ValueRef h = tape.constant(Tensor(std::vector<int>{B, H}));
        ValueRef c = tape.constant(Tensor(std::vector<int>{B, H}));
        std::vector<ValueRef> outputs(T);

        if (cfg_.kind == EncoderKind::LSTM) {
            const ValueRef wx = P(layer_name(prefix_, "lstm", l, "wx"));
            const ValueRef wh = P(layer_name(prefix_, "lstm", l, "wh"));
            const ValueRef b = P(layer_name(prefix_, "lstm", l, "b"));
            for (int t = 0; t < T; ++t) {
                auto z = tape.add_rowvec(
                    tape.add(tape.matmul(sequence[t], wx), tape.matmul(h, wh)), b);
                auto i_gate = tape.sigmoid(tape.slice_cols(z, 0, H));
                auto f_gate = tape.sigmoid(tape.slice_cols(z, H, 2 * H));
                auto g_cand = tape.tanh(tape.slice_cols(z, 2 * H, 3 * H));
                auto o_gate = tape.sigmoid(tape.slice_cols(z, 3 * H, 4 * H));
                auto c_new = tape.add(tape.mul(f_gate, c), tape.mul(i_gate, g_cand));
                auto h_new = tape.mul(o_gate, tape.tanh(c_new));
                c = tape.add(tape.mul(update[t], c_new), tape.mul(keep[t], c));
                h = tape.add(tape.mul(update[t], h_new), tape.mul(keep[t], h));
                outputs[t] = h;
            }
        } else {
            const ValueRef wx_zr = P(layer_name(prefix_, "gru", l, "wx_zr"));
            const ValueRef wh_zr = P(layer_name(prefix_, "gru", l, "wh_zr"));
            const ValueRef b_zr = P(layer_name(prefix_, "gru", l, "b_zr"));
            const ValueRef wx_h = P(layer_name(prefix_, "gru", l, "wx_h"));
            const ValueRef wh_h = P(layer_name(prefix_, "gru", l, "wh_h"));
            const ValueRef b_h = P(layer_name(prefix_, "gru", l, "b_h"));
            for (int t = 0; t < T; ++t) {
                auto zr = tape.add_rowvec(
                    tape.add(tape.matmul(sequence[t], wx_zr), tape.matmul(h, wh_zr)), b_zr);
                auto z_gate = tape.sigmoid(tape.slice_cols(zr, 0, H));
                auto r_gate = tape.sigmoid(tape.slice_cols(zr, H, 2 * H));
                auto cand = tape.tanh(tape.add_rowvec(
                    tape.add(tape.matmul(sequence[t], wx_h),
                             tape.matmul(tape.mul(r_gate, h), wh_h)),
                    b_h));
                // h' = (1 - z) * h + z * cand
                auto h_new = tape.add(tape.sub(h, tape.mul(z_gate, h)), tape.mul(z_gate, cand));
                h = tape.add(tape.mul(update[t], h_new), tape.mul(keep[t], h));
                outputs[t] = h;
            }
        }
        sequence = std::move(outputs);
        last_hidden = h;
    }
    return last_hidden;
}

ValueRef SequenceEncoder::encode_transformer(Tape& tape, ValueRef batch,
                                             const Tensor& mask) const {
    const int B = tape.val(batch).dim(0), T = tape.val(batch).dim(1), D = cfg_.hidden_size;
    const int S = T + 1;  // classification token prepended
    const int dk = D / cfg_.heads;
    auto P = [&](const std::string& name) { return tape.param(store_->at(name)); };

    // matmul flattens the leading (B,T) dims, so the 3-D input can be used as is
    ValueRef x = tape.matmul(batch, P(prefix_ + "/inproj/w"));
    x = tape.add_rowvec(x, P(prefix_ + "/inproj/b"));

    if (cfg_.positional_encoding) {
        const Tensor pe = positional_encoding_table(T, D);
        Tensor expanded(std::vector<int>{B, T, D});
        for (int b = 0; b < B; ++b)
            for (int t = 0; t < T; ++t)
                for (int j = 0; j < D; ++j) expanded.at(b * T + t, j) = pe.at(t, j);
        x = tape.add(x, tape.constant(std::move(expanded)));
    }

    // prepend the learned classification token to every sequence
    const ValueRef cls = P(prefix_ + "/cls");
    std::vector<ValueRef> with_cls;
    with_cls.reserve(2 * static_cast<std::size_t>(B));
    for (int b = 0; b < B; ++b) {
        with_cls.push_back(cls);
        with_cls.push_back(tape.slice_rows(x, b * T, (b + 1) * T));
    }
    x = tape.concat_rows(with_cls);  // (B*S, D)

    Tensor key_active(std::vector<int>{B, S});
    for (int b = 0; b < B; ++b) {
        key_active.at(b, 0) = 1.0;
        for (int t = 0; t < T; ++t) key_active.at(b, t + 1) = mask.at(b, t);
    }

    for (int l = 0; l < cfg_.num_layers; ++l) {
        auto u = tape.layer_norm(x, P(layer_name(prefix_, "layer", l, "ln1_g")),
                                 P(layer_name(prefix_, "layer", l, "ln1_b")));
        auto q = tape.add_rowvec(tape.matmul(u, P(layer_name(prefix_, "layer", l, "wq"))),
                                 P(layer_name(prefix_, "layer", l, "bq")));
        auto k = tape.add_rowvec(tape.matmul(u, P(layer_name(prefix_, "layer", l, "wk"))),
                                 P(layer_name(prefix_, "layer", l, "bk")));
        auto v = tape.add_rowvec(tape.matmul(u, P(layer_name(prefix_, "layer", l, "wv"))),
                                 P(layer_name(prefix_, "layer", l, "bv")));

        std::vector<ValueRef> per_batch;
        per_batch.reserve(static_cast<std::size_t>(B));
        for (int b = 0; b < B; ++b) {
            auto qb = tape.slice_rows(q, b * S, (b + 1) * S);
            auto kb = tape.slice_rows(k, b * S, (b + 1) * S);
            auto vb = tape.slice_rows(v, b * S, (b + 1) * S);
            Tensor attn_mask(std::vector<int>{S, S});
            for (int i = 0; i < S; ++i)
                for (int j = 0; j < S; ++j) attn_mask.at(i, j) = key_active.at(b, j);

            std::vector<ValueRef> heads;
            heads.reserve(static_cast<std::size_t>(cfg_.heads));
            for (int hh = 0; hh < cfg_.heads; ++hh) {
                auto qh = tape.slice_cols(qb, hh * dk, (hh + 1) * dk);
                auto kh = tape.slice_cols(kb, hh * dk, (hh + 1) * dk);
                auto vh = tape.slice_cols(vb, hh * dk, (hh + 1) * dk);
                auto scores = tape.scale(tape.matmul_nt(qh, kh), 1.0 / std::sqrt(dk));
                auto attn = tape.softmax_rows(scores, &attn_mask);
                heads.push_back(tape.matmul(attn, vh));
            }
            per_batch.push_back(tape.concat_cols(heads));
        }
        auto ctx = tape.concat_rows(per_batch);
        auto attn_out = tape.add_rowvec(tape.matmul(ctx, P(layer_name(prefix_, "layer", l, "wo"))),
                                        P(layer_name(prefix_, "layer", l, "bo")));
        x = tape.add(x, attn_out);

        auto u2 = tape.layer_norm(x, P(layer_name(prefix_, "layer", l, "ln2_g")),
                                  P(layer_name(prefix_, "layer", l, "ln2_b")));
        auto ff = tape.relu(tape.add_rowvec(
            tape.matmul(u2, P(layer_name(prefix_, "layer", l, "ff_w1"))),
            P(layer_name(prefix_, "layer", l, "ff_b1"))));
        auto ff_out = tape.add_rowvec(tape.matmul(ff, P(layer_name(prefix_, "layer", l, "ff_w2"))),
                                      P(layer_name(prefix_, "layer", l, "ff_b2")));
        x = tape.add(x, ff_out);
    }

    x = tape.layer_norm(x, P(prefix_ + "/lnf_g"), P(prefix_ + "/lnf_b"));

    std::vector<ValueRef> cls_rows;
    cls_rows.reserve(static_cast<std::size_t>(B));
    for (int b = 0; b < B; ++b) cls_rows.push_back(tape.slice_rows(x, b * S, b * S + 1));
    return tape.concat_rows(cls_rows);  // (B, D)
}

// --- vocabulary and text embedding -------------------------------------------

TokenVocab TokenVocab::fit(const std::vector<std::vector<std::string>>& texts, int min_count) {
    TokenVocab v;
    v.id_to_token = {"<pad>", "<oov>", "<cls>"};
    std::map<std::string, int> counts;  // ordered for determinism
    for (const auto& text : texts)
        for (const auto& tok : text) counts[tok]++;
    for (const auto& [tok, count] : counts) {
        if (count >= min_count) {
            v.to_id[tok] = static_cast<int>(v.id_to_token.size());
            v.id_to_token.push_back(tok);
        }
    }
    v.to_id["<pad>"] = v.pad_id;
    v.to_id["<oov>"] = v.oov_id;
    v.to_id["<cls>"] = v.cls_id;
    return v;
}

int TokenVocab::lookup(const std::string& token) const {
    const auto it = to_id.find(token);
    return it == to_id.end() ? oov_id : it->second;
}

ExternalEmbeddingTable ExternalEmbeddingTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open embedding table " + path);
    ExternalEmbeddingTable t;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw std::runtime_error("bad embedding line: " + line);
        std::istringstream rest(line.substr(tab + 1));
        std::vector<double> vec;
        double v;
        while (rest >> v) vec.push_back(v);
        if (t.dim == 0) t.dim = static_cast<int>(vec.size());
        if (static_cast<int>(vec.size()) != t.dim)
            throw std::runtime_error("inconsistent embedding dims in " + path);
        t.vectors[line.substr(0, tab)] = std::move(vec);
    }
    return t;
}

TextEmbedder::TextEmbedder(ParamStore& store, std::string prefix, TokenVocab vocab, int dim,
                           const Rng& rng, const ExternalEmbeddingTable* external)
    : store_(&store), prefix_(std::move(prefix)), vocab_(std::move(vocab)), dim_(dim) {
    const std::string name = prefix_ + "/table";
    if (external) {
        dim_ = external->dim;
        Parameter& p = store_->create(name, {vocab_.size(), dim_});
        const auto oov_it = external->vectors.find("<oov>");
        for (int id = 0; id < vocab_.size(); ++id) {
            const auto it = external->vectors.find(vocab_.id_to_token[id]);
            const std::vector<double>* row =
                it != external->vectors.end() ? &it->second
                : oov_it != external->vectors.end() ? &oov_it->second : nullptr;
            if (row)
                for (int j = 0; j < dim_; ++j) p.value.at(id, j) = (*row)[static_cast<std::size_t>(j)];
        }
        p.frozen = true;
    } else {
        store_->create_embedding(name, vocab_.size(), dim_, rng.stream(name));
    }
}

TextEmbedder::TextEmbedder(ParamStore& store, std::string prefix, TokenVocab vocab, int dim)
    : store_(&store), prefix_(std::move(prefix)), vocab_(std::move(vocab)), dim_(dim) {}

void TextEmbedder::prepare(const std::vector<std::vector<std::string>>& texts, int max_len,
                           std::vector<std::vector<int>>& ids, Tensor& mask) const {
    std::vector<std::vector<int>> token_ids(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        token_ids[i].reserve(texts[i].size());
        for (const auto& tok : texts[i]) token_ids[i].push_back(vocab_.lookup(tok));
    }
    prepare_ids(token_ids, max_len, ids, mask);
}

void TextEmbedder::prepare_ids(const std::vector<std::vector<int>>& token_ids, int max_len,
                               std::vector<std::vector<int>>& ids, Tensor& mask) const {
    const int B = static_cast<int>(token_ids.size());
    int longest = 1;
    for (const auto& t : token_ids)
        longest = std::max(longest, static_cast<int>(std::min<std::size_t>(t.size(), max_len)));
    ids.assign(static_cast<std::size_t>(B), std::vector<int>(static_cast<std::size_t>(longest), vocab_.pad_id));
    mask = Tensor(std::vector<int>{B, longest});
    for (int b = 0; b < B; ++b) {
        const int n = static_cast<int>(std::min<std::size_t>(token_ids[b].size(),
                                                             static_cast<std::size_t>(max_len)));
        for (int t = 0; t < n; ++t) {
            ids[b][t] = token_ids[b][t];
            mask.at(b, t) = 1.0;
        }
    }
}

ValueRef TextEmbedder::embed(Tape& tape, const std::vector<std::vector<int>>& ids) const {
    return tape.embedding_lookup(store_->at(prefix_ + "/table"), ids);
}

}  // namespace credit
