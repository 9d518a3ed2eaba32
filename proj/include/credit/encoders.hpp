#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "credit/autodiff.hpp"

namespace credit {

struct SequenceTooLong : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class EncoderKind { LSTM, GRU, Transformer };

std::string to_string(EncoderKind k);
EncoderKind encoder_kind_from_string(const std::string& s);

struct EncoderConfig {
    EncoderKind kind = EncoderKind::GRU;
    int hidden_size = 128;  // model size for the transformer
    int num_layers = 2;     // fixed at 3 for the transformer
    int heads = 8;
    int ff_dim = 256;
    int input_dim = 0;
    int max_seq_len = 0;
    bool positional_encoding = true;  // transformer only; off for equivariance tests

    void validate() const;
};

// One sequence encoder (LSTM, GRU or transformer encoder stack) whose
// parameters live in a ParamStore under a name prefix. Inputs are (B,T,d)
// with a (B,T) validity mask; masked steps keep the recurrent state and get
// zero attention mass. Output is (B, latent_dim).
class SequenceEncoder {
public:
    SequenceEncoder(ParamStore& store, std::string prefix, EncoderConfig cfg, const Rng& rng);
    // Attach to parameters that already exist in the store (checkpoint load).
    SequenceEncoder(ParamStore& store, std::string prefix, EncoderConfig cfg);

    ValueRef encode(Tape& tape, const Tensor& batch, const Tensor& mask) const;
    // Input already on the tape (e.g. token embeddings); gradients flow in.
    ValueRef encode(Tape& tape, ValueRef batch, const Tensor& mask) const;
    int latent_dim() const { return cfg_.hidden_size; }
    const EncoderConfig& config() const { return cfg_; }
    const std::string& prefix() const { return prefix_; }

private:
    ValueRef encode_recurrent(Tape& tape, ValueRef batch, const Tensor& mask) const;
    ValueRef encode_transformer(Tape& tape, ValueRef batch, const Tensor& mask) const;

    ParamStore* store_;
    std::string prefix_;
    EncoderConfig cfg_;
};

// Sinusoidal positional encoding table (max_len x dim).
Tensor positional_encoding_table(int max_len, int dim);

struct TokenVocab {
    std::unordered_map<std::string, int> to_id;
    std::vector<std::string> id_to_token;
    int pad_id = 0;
    int oov_id = 1;
    int cls_id = 2;

    static TokenVocab fit(const std::vector<std::vector<std::string>>& texts, int min_count = 1);
    int size() const { return static_cast<int>(id_to_token.size()); }
    int lookup(const std::string& token) const;
};

// token -> dense vector table loaded from "token<TAB>v1 v2 ..." lines.
struct ExternalEmbeddingTable {
    int dim = 0;
    std::unordered_map<std::string, std::vector<double>> vectors;

    static ExternalEmbeddingTable load(const std::string& path);
};

// Maps token strings to id sequences and embeds them, either through a
// trainable table or a frozen external table mapped onto the vocabulary.
class TextEmbedder {
public:
    TextEmbedder(ParamStore& store, std::string prefix, TokenVocab vocab, int dim, const Rng& rng,
                 const ExternalEmbeddingTable* external = nullptr);
    TextEmbedder(ParamStore& store, std::string prefix, TokenVocab vocab, int dim);

    // Pads/truncates to the longest sequence in the batch (capped at max_len);
    // empty sequences become a single PAD step. Outputs ids and the 0/1 mask.
    void prepare(const std::vector<std::vector<std::string>>& texts, int max_len,
                 std::vector<std::vector<int>>& ids, Tensor& mask) const;
    void prepare_ids(const std::vector<std::vector<int>>& token_ids, int max_len,
                     std::vector<std::vector<int>>& ids, Tensor& mask) const;

    ValueRef embed(Tape& tape, const std::vector<std::vector<int>>& ids) const;
    int dim() const { return dim_; }
    const TokenVocab& vocab() const { return vocab_; }

private:
    ParamStore* store_;
    std::string prefix_;
    TokenVocab vocab_;
    int dim_;
};

}  // namespace credit
