#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "credit/encoders.hpp"
#include "gradcheck.hpp"

using namespace credit;

namespace {
Tensor random_batch(Rng rng, int B, int T, int d, double scale = 1.0) {
    Tensor x(std::vector<int>{B, T, d});
    for (std::int64_t i = 0; i < x.numel(); ++i)
        x[static_cast<std::size_t>(i)] = rng.normal(0.0, scale);
    return x;
}

Tensor ones_mask(int B, int T) { return Tensor(std::vector<int>{B, T}, 1.0); }

EncoderConfig small_cfg(EncoderKind kind, int input_dim, int hidden = 8) {
    EncoderConfig cfg;
    cfg.kind = kind;
    cfg.hidden_size = hidden;
    cfg.num_layers = kind == EncoderKind::Transformer ? 3 : 2;
    cfg.heads = 2;
    cfg.ff_dim = 16;
    cfg.input_dim = input_dim;
    cfg.max_seq_len = 64;
    return cfg;
}
}  // namespace

TEST_CASE("lstm: zero weights and inputs give zero output") {
    ParamStore store;
    SequenceEncoder enc(store, "enc", small_cfg(EncoderKind::LSTM, 3), Rng(1));
    store.for_each([](Parameter& p) { p.value.fill(0.0); });
    Tape tape;
    auto h = enc.encode(tape, Tensor(std::vector<int>{2, 4, 3}), ones_mask(2, 4));
    for (std::int64_t i = 0; i < tape.val(h).numel(); ++i)
        CHECK(tape.val(h)[static_cast<std::size_t>(i)] == doctest::Approx(0.0));
}

TEST_CASE("lstm: T=1 equals a single hand-computed cell application") {
    ParamStore store;
    EncoderConfig cfg = small_cfg(EncoderKind::LSTM, 3, 4);
    cfg.num_layers = 1;
    SequenceEncoder enc(store, "enc", cfg, Rng(7));
    Rng rng(9);
    Tensor x = random_batch(rng, 1, 1, 3);

    Tape tape;
    auto out = enc.encode(tape, x, ones_mask(1, 1));

    const Tensor& wx = store.at("enc/lstm0/wx").value;
    const Tensor& wh = store.at("enc/lstm0/wh").value;
    const Tensor& b = store.at("enc/lstm0/b").value;
    (void)wh;  // h0 = 0
    const int H = 4;
    for (int j = 0; j < H; ++j) {
        auto gate = [&](int block) {
            double z = b[static_cast<std::size_t>(block * H + j)];
            for (int i = 0; i < 3; ++i) z += x.at(0, i) * wx.at(i, block * H + j);
            return z;
        };
        const double ig = 1.0 / (1.0 + std::exp(-gate(0)));
        const double og = 1.0 / (1.0 + std::exp(-gate(3)));
        const double cand = std::tanh(gate(2));
        const double expected = og * std::tanh(ig * cand);
        CHECK(tape.val(out).at(0, j) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("lstm/gru: hidden coordinates stay inside (-1, 1)") {
    for (auto kind : {EncoderKind::LSTM, EncoderKind::GRU}) {
        ParamStore store;
        SequenceEncoder enc(store, "enc", small_cfg(kind, 5), Rng(3));
        store.for_each([](Parameter& p) {
            for (std::int64_t i = 0; i < p.value.numel(); ++i)
                p.value[static_cast<std::size_t>(i)] *= 8.0;  // push toward saturation
        });
        Rng rng(4);
        Tensor x = random_batch(rng, 3, 12, 5, 3.0);
        Tape tape;
        auto h = enc.encode(tape, x, ones_mask(3, 12));
        for (std::int64_t i = 0; i < tape.val(h).numel(); ++i) {
            CHECK(tape.val(h)[static_cast<std::size_t>(i)] > -1.0);
            CHECK(tape.val(h)[static_cast<std::size_t>(i)] < 1.0);
        }
    }
}

TEST_CASE("gru: zero weights give zero output") {
    ParamStore store;
    SequenceEncoder enc(store, "enc", small_cfg(EncoderKind::GRU, 3), Rng(1));
    store.for_each([](Parameter& p) { p.value.fill(0.0); });
    Tape tape;
    auto h = enc.encode(tape, random_batch(Rng(2), 2, 5, 3), ones_mask(2, 5));
    for (std::int64_t i = 0; i < tape.val(h).numel(); ++i)
        CHECK(tape.val(h)[static_cast<std::size_t>(i)] == doctest::Approx(0.0));
}

TEST_CASE("gru: saturated update gate with zero recurrent path ignores history") {
    ParamStore store;
    EncoderConfig cfg = small_cfg(EncoderKind::GRU, 3, 4);
    cfg.num_layers = 1;
    SequenceEncoder enc(store, "enc", cfg, Rng(5));
    Parameter& b_zr = store.at("enc/gru0/b_zr");
    for (int j = 0; j < 4; ++j) b_zr.value[static_cast<std::size_t>(j)] = 50.0;  // z ~ 1
    store.at("enc/gru0/wh_h").value.fill(0.0);

    Rng rng(6);
    Tensor a = random_batch(rng, 1, 3, 3);
    Tensor b = a;
    for (int j = 0; j < 3; ++j) b.data()[j] += 5.0;  // different first step only

    Tape ta, tb;
    auto ha = enc.encode(ta, a, ones_mask(1, 3));
    auto hb = enc.encode(tb, b, ones_mask(1, 3));
    for (int j = 0; j < 4; ++j)
        CHECK(ta.val(ha).at(0, j) == doctest::Approx(tb.val(hb).at(0, j)).epsilon(1e-9));
}

TEST_CASE("attention with zero query/key projections averages the values") {
    // assembled from the same primitives the encoder uses
    Rng rng(8);
    Tensor v(std::vector<int>{4, 3});
    for (std::int64_t i = 0; i < v.numel(); ++i) v[static_cast<std::size_t>(i)] = rng.normal(0, 1);
    Tape tape;
    auto scores = tape.constant(Tensor(std::vector<int>{4, 4}));  // zero q.k
    auto attn = tape.softmax_rows(scores);
    auto ctx = tape.matmul(attn, tape.constant(v));
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 3; ++j) {
            double mean = 0.0;
            for (int t = 0; t < 4; ++t) mean += v.at(t, j);
            mean /= 4.0;
            CHECK(tape.val(ctx).at(i, j) == doctest::Approx(mean).epsilon(1e-12));
        }
}

TEST_CASE("positional encoding at position 0: sine channels 0, cosine channels 1") {
    const Tensor pe = positional_encoding_table(3, 8);
    for (int j = 0; j < 8; j += 2) CHECK(pe.at(0, j) == doctest::Approx(0.0));
    for (int j = 1; j < 8; j += 2) CHECK(pe.at(0, j) == doctest::Approx(1.0));
    CHECK(pe.at(1, 0) == doctest::Approx(std::sin(1.0)));
    CHECK(pe.at(1, 1) == doctest::Approx(std::cos(1.0)));
}

TEST_CASE("transformer: permuting positions without positional encoding is a no-op for CLS") {
    ParamStore store;
    EncoderConfig cfg = small_cfg(EncoderKind::Transformer, 4);
    cfg.positional_encoding = false;
    SequenceEncoder enc(store, "enc", cfg, Rng(11));
    Rng rng(12);
    Tensor x = random_batch(rng, 1, 6, 4);
    Tensor perm(std::vector<int>{1, 6, 4});
    const int order[6] = {3, 0, 5, 1, 4, 2};
    for (int t = 0; t < 6; ++t)
        for (int j = 0; j < 4; ++j) perm.data()[t * 4 + j] = x.data()[order[t] * 4 + j];

    Tape ta, tb;
    auto ha = enc.encode(ta, x, ones_mask(1, 6));
    auto hb = enc.encode(tb, perm, ones_mask(1, 6));
    for (int j = 0; j < cfg.hidden_size; ++j)
        CHECK(std::abs(ta.val(ha).at(0, j) - tb.val(hb).at(0, j)) <= 1e-9);
}

TEST_CASE("transformer: with positional encoding, permutation changes the output") {
    ParamStore store;
    SequenceEncoder enc(store, "enc", small_cfg(EncoderKind::Transformer, 4), Rng(11));
    Rng rng(12);
    Tensor x = random_batch(rng, 1, 6, 4);
    Tensor perm = x;
    for (int j = 0; j < 4; ++j) std::swap(perm.data()[j], perm.data()[5 * 4 + j]);
    Tape ta, tb;
    auto ha = enc.encode(ta, x, ones_mask(1, 6));
    auto hb = enc.encode(tb, perm, ones_mask(1, 6));
    double diff = 0.0;
    for (int j = 0; j < 8; ++j) diff += std::abs(ta.val(ha).at(0, j) - tb.val(hb).at(0, j));
    CHECK(diff > 1e-6);
}

TEST_CASE("sequence too long raises") {
    ParamStore store;
    EncoderConfig cfg = small_cfg(EncoderKind::Transformer, 4);
    cfg.max_seq_len = 5;
    SequenceEncoder enc(store, "enc", cfg, Rng(1));
    Tape tape;
    CHECK_THROWS_AS((void)enc.encode(tape, Tensor(std::vector<int>{1, 6, 4}), ones_mask(1, 6)),
                    SequenceTooLong);
}

TEST_CASE("padding does not change encoder outputs") {
    for (auto kind : {EncoderKind::LSTM, EncoderKind::GRU, EncoderKind::Transformer}) {
        ParamStore store;
        SequenceEncoder enc(store, "enc", small_cfg(kind, 3), Rng(21));
        Rng rng(22);
        Tensor x = random_batch(rng, 1, 4, 3);
        Tensor padded(std::vector<int>{1, 7, 3});
        for (int t = 0; t < 4; ++t)
            for (int j = 0; j < 3; ++j) padded.data()[t * 3 + j] = x.data()[t * 3 + j];
        Tensor mask = ones_mask(1, 4);
        Tensor padded_mask(std::vector<int>{1, 7});
        for (int t = 0; t < 4; ++t) padded_mask.at(0, t) = 1.0;

        Tape ta, tb;
        auto ha = enc.encode(ta, x, mask);
        auto hb = enc.encode(tb, padded, padded_mask);
        for (int j = 0; j < 8; ++j)
            CHECK(std::abs(ta.val(ha).at(0, j) - tb.val(hb).at(0, j)) <= 1e-14);
    }
}

TEST_CASE("vocab and embedding behavior") {
    const std::vector<std::vector<std::string>> texts = {{"good", "repay", "good"}, {"bad"}};
    const TokenVocab vocab = TokenVocab::fit(texts);
    CHECK(vocab.lookup("good") >= 3);
    CHECK(vocab.lookup("unseen-token") == vocab.oov_id);

    ParamStore store;
    TextEmbedder embedder(store, "text", vocab, 6, Rng(31));
    std::vector<std::vector<int>> ids;
    Tensor mask;
    embedder.prepare({{"good", "unseen-token"}, {}}, 326, ids, mask);
    CHECK(ids.size() == 2);
    CHECK(ids[0].size() == 2);
    CHECK(ids[0][1] == vocab.oov_id);
    CHECK(ids[1][0] == vocab.pad_id);  // empty text -> single PAD step
    CHECK(mask.at(0, 0) == 1.0);
    CHECK(mask.at(1, 0) == 0.0);

    // all-PAD rows still encode to finite vectors
    for (auto kind : {EncoderKind::LSTM, EncoderKind::GRU, EncoderKind::Transformer}) {
        ParamStore st;
        EncoderConfig cfg = small_cfg(kind, 6);
        SequenceEncoder enc(st, "enc", cfg, Rng(32));
        TextEmbedder emb(st, "text", vocab, 6, Rng(33));
        Tape tape;
        auto h = enc.encode(tape, tape.val(emb.embed(tape, ids)), mask);
        CHECK(tape.val(h).all_finite());
    }

    // truncation honors the configured envelope
    std::vector<std::vector<std::string>> long_text(1);
    for (int i = 0; i < 400; ++i) long_text[0].push_back("tok");
    embedder.prepare(long_text, 326, ids, mask);
    CHECK(ids[0].size() == 326);
}

TEST_CASE("gradient check: all three encoders through a fusion head and BCE") {
    const Tensor labels = Tensor::row({1.0, 0.0});
    for (auto kind : {EncoderKind::LSTM, EncoderKind::GRU, EncoderKind::Transformer}) {
        ParamStore store;
        EncoderConfig cfg = small_cfg(kind, 3);
        SequenceEncoder enc(store, "enc", cfg, Rng(41));
        store.create_dense("head/w", cfg.hidden_size, 1, Rng(42));
        store.create("head/b", {1});
        Rng rng(43);
        const Tensor x = random_batch(rng, 2, 5, 3);
        Tensor mask = ones_mask(2, 5);
        mask.at(1, 4) = 0.0;  // one padded step

        auto build = [&](Tape& t) {
            auto latent = enc.encode(t, x, mask);
            auto logits = t.add_rowvec(t.matmul(latent, t.param(store.at("head/w"))),
                                       t.param(store.at("head/b")));
            return t.bce_loss(t.sigmoid(logits), labels);
        };
        CHECK(gradcheck::max_rel_error(store, build, 20, 77) <= 1e-4);
    }
}

TEST_CASE("encoders are deterministic given parameters and input") {
    ParamStore store;
    SequenceEncoder enc(store, "enc", small_cfg(EncoderKind::Transformer, 4), Rng(51));
    Rng rng(52);
    const Tensor x = random_batch(rng, 2, 6, 4);
    Tape ta, tb;
    auto a = enc.encode(ta, x, ones_mask(2, 6));
    auto b = enc.encode(tb, x, ones_mask(2, 6));
    for (std::int64_t i = 0; i < ta.val(a).numel(); ++i)
        CHECK(ta.val(a)[static_cast<std::size_t>(i)] == tb.val(b)[static_cast<std::size_t>(i)]);
}

TEST_CASE("external embedding table: frozen rows, dimension from file, OOV fallback") {
    const std::string path = "/tmp/test_ext_embed.tsv";
    {
        std::ofstream f(path, std::ios::trunc);
        f << "good\t0.5 -0.25 1.0\n";
        f << "repay\t0.1 0.2 0.3\n";
        f << "<oov>\t9 9 9\n";
    }
    const ExternalEmbeddingTable table = ExternalEmbeddingTable::load(path);
    CHECK(table.dim == 3);

    const TokenVocab vocab = TokenVocab::fit({{"good", "repay", "newword"}});
    ParamStore store;
    TextEmbedder embedder(store, "text", vocab, 32 /*overridden by the table*/, Rng(1), &table);
    CHECK(embedder.dim() == 3);
    const Parameter& p = store.at("text/table");
    CHECK(p.frozen);
    CHECK(p.value.at(vocab.lookup("good"), 0) == doctest::Approx(0.5));
    CHECK(p.value.at(vocab.lookup("good"), 1) == doctest::Approx(-0.25));
    // token missing from the external table falls back to its <oov> row
    CHECK(p.value.at(vocab.lookup("newword"), 0) == doctest::Approx(9.0));

    // frozen table receives no optimizer updates through training
    Tape tape;
    std::vector<std::vector<int>> ids = {{vocab.lookup("good"), vocab.lookup("repay")}};
    auto emb = embedder.embed(tape, ids);
    Tensor mask(std::vector<int>{1, 2}, 1.0);
    store.create_dense("w", 4, 1, Rng(2));
    EncoderConfig cfg;
    cfg.kind = EncoderKind::GRU;
    cfg.hidden_size = 4;
    cfg.num_layers = 1;
    cfg.input_dim = 3;
    cfg.max_seq_len = 4;
    SequenceEncoder enc(store, "enc", cfg, Rng(3));
    const std::uint64_t before = store.value_hash("text/");
    auto h = enc.encode(tape, emb, mask);
    auto loss = tape.bce_loss(tape.sigmoid(tape.matmul(h, tape.param(store.at("w")))),
                              Tensor::row({1.0}));
    store.zero_grads();
    tape.backward(loss);
    store.adam_step(1e-2);
    CHECK(store.value_hash("text/") == before);
    CHECK(store.value_hash("enc/") != 0);  // trainable parts did move
}
