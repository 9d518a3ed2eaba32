#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "credit/autodiff.hpp"
#include "gradcheck.hpp"

using namespace credit;

TEST_CASE("sigmoid value and derivative at zero") {
    Tape tape;
    ParamStore store;
    Parameter& x = store.create("x", {1});
    x.value[0] = 0.0;
    auto y = tape.sigmoid(tape.param(x));
    CHECK(tape.val(y)[0] == doctest::Approx(0.5));
    tape.backward(y);
    CHECK(x.grad[0] == doctest::Approx(0.25));
}

TEST_CASE("softmax of zeros is uniform and rows sum to one") {
    Tape tape;
    auto x = tape.constant(Tensor(std::vector<int>{1, 4}));
    auto y = tape.softmax_rows(x);
    for (int j = 0; j < 4; ++j) CHECK(tape.val(y).at(0, j) == doctest::Approx(0.25));

    Rng rng(5);
    Tensor z(std::vector<int>{6, 9});
    for (std::int64_t i = 0; i < z.numel(); ++i) z[static_cast<std::size_t>(i)] = rng.normal(0, 3);
    Tape t2;
    auto s = t2.softmax_rows(t2.constant(z));
    for (int i = 0; i < 6; ++i) {
        double sum = 0.0;
        for (int j = 0; j < 9; ++j) sum += t2.val(s).at(i, j);
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("masked softmax assigns exactly zero mass to masked entries") {
    Tensor mask(std::vector<int>{1, 4}, 1.0);
    mask.at(0, 2) = 0.0;
    Tape tape;
    Tensor x(std::vector<int>{1, 4});
    x.at(0, 2) = 100.0;  // masked despite dominating logit
    auto y = tape.softmax_rows(tape.constant(x), &mask);
    CHECK(tape.val(y).at(0, 2) == 0.0);
    double sum = 0.0;
    for (int j = 0; j < 4; ++j) sum += tape.val(y).at(0, j);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("matmul matches hand product") {
    Tape tape;
    auto a = tape.constant(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
    auto b = tape.constant(Tensor::matrix(3, 2, {7, 8, 9, 10, 11, 12}));
    auto c = tape.matmul(a, b);
    CHECK(tape.val(c).at(0, 0) == doctest::Approx(58.0));
    CHECK(tape.val(c).at(0, 1) == doctest::Approx(64.0));
    CHECK(tape.val(c).at(1, 0) == doctest::Approx(139.0));
    CHECK(tape.val(c).at(1, 1) == doctest::Approx(154.0));
}

TEST_CASE("bce examples") {
    Tape tape;
    auto perfect = tape.bce_loss(tape.constant(Tensor::row({1.0, 0.0, 1.0})),
                                 Tensor::row({1.0, 0.0, 1.0}));
    CHECK(tape.val(perfect)[0] <= 1.2e-7);

    auto mixed = tape.bce_loss(tape.constant(Tensor::row({0.8, 0.4})), Tensor::row({1.0, 0.0}));
    CHECK(tape.val(mixed)[0] ==
          doctest::Approx((-std::log(0.8) - std::log(0.6)) / 2.0).epsilon(1e-12));

    auto coin = tape.bce_loss(tape.constant(Tensor::row({0.5, 0.5, 0.5, 0.5})),
                              Tensor::row({1.0, 0.0, 1.0, 0.0}));
    CHECK(tape.val(coin)[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    CHECK_THROWS_AS((void)tape.bce_loss(tape.constant(Tensor(std::vector<int>{0})), Tensor(std::vector<int>{0})),
                    EmptyBatch);
}

TEST_CASE("layer_norm output statistics") {
    Rng rng(17);
    Tensor x(std::vector<int>{5, 16});
    for (std::int64_t i = 0; i < x.numel(); ++i) x[static_cast<std::size_t>(i)] = rng.normal(2.0, 3.0);
    ParamStore store;
    Parameter& g = store.create("g", {16});
    Parameter& b = store.create("b", {16});
    g.value.fill(1.0);
    Tape tape;
    auto y = tape.layer_norm(tape.constant(x), tape.param(g), tape.param(b), 1e-10);
    for (int i = 0; i < 5; ++i) {
        double mean = 0.0, var = 0.0;
        for (int j = 0; j < 16; ++j) mean += tape.val(y).at(i, j);
        mean /= 16.0;
        for (int j = 0; j < 16; ++j) {
            const double d = tape.val(y).at(i, j) - mean;
            var += d * d;
        }
        var /= 16.0;
        CHECK(std::abs(mean) <= 1e-10);
        CHECK(std::abs(var - 1.0) <= 1e-8);
    }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    ParamStore store;
    Rng rng(3);
    store.create_dense("w", 4, 4, rng);
    const std::uint64_t before = store.value_hash();
    store.zero_grads();
    store.adam_step(1e-3);
    CHECK(store.value_hash() == before);
}

TEST_CASE("adam: first step moves by about lr against the gradient sign") {
    ParamStore store;
    Parameter& w = store.create("w", {2});
    w.value[0] = 1.0;
    w.value[1] = -2.0;
    w.grad[0] = 0.37;
    w.grad[1] = -4.1;
    store.adam_step(1e-2);
    CHECK(w.value[0] == doctest::Approx(1.0 - 1e-2).epsilon(1e-4));
    CHECK(w.value[1] == doctest::Approx(-2.0 + 1e-2).epsilon(1e-4));
}

TEST_CASE("adam: constant gradient drives update magnitude to lr") {
    ParamStore store;
    Parameter& w = store.create("w", {1});
    double prev = w.value[0];
    double last_step = 0.0;
    for (int i = 0; i < 200; ++i) {
        w.grad[0] = 0.8;
        store.adam_step(1e-3);
        last_step = prev - w.value[0];
        prev = w.value[0];
    }
    CHECK(last_step == doctest::Approx(1e-3).epsilon(1e-3));
}

TEST_CASE("adam: non-finite gradient aborts before mutating") {
    ParamStore store;
    Parameter& w = store.create("w", {2});
    w.value[0] = 5.0;
    const std::uint64_t before = store.value_hash();
    w.grad[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(store.adam_step(1e-3), NonFinite);
    CHECK(store.value_hash() == before);
    CHECK(store.step_count() == 0);
}

TEST_CASE("frozen parameters are skipped by adam") {
    ParamStore store;
    Parameter& w = store.create("enc/w", {2});
    Parameter& h = store.create("head/w", {2});
    store.set_frozen("enc/", true);
    w.grad.fill(1.0);
    h.grad.fill(1.0);
    const std::uint64_t frozen_before = store.value_hash("enc/");
    store.adam_step(1e-2);
    CHECK(store.value_hash("enc/") == frozen_before);
    CHECK(h.value[0] != 0.0);
}

TEST_CASE("non-finite forward values are a hard error") {
    Tape tape;
    auto big = tape.constant(Tensor::row({1e308}));
    CHECK_THROWS_AS((void)tape.add(big, big), NonFinite);
}

TEST_CASE("gradient check: every primitive") {
    Rng rng(11);
    ParamStore store;
    Parameter& a = store.create_dense("a", 4, 6, rng.stream("a"));
    Parameter& b = store.create_dense("b", 6, 3, rng.stream("b"));
    Parameter& c = store.create_dense("c", 4, 3, rng.stream("c"));
    Parameter& v = store.create_dense("v", 1, 3, rng.stream("v"));
    Parameter& g = store.create("g", {3});
    Parameter& bias = store.create("bias", {3});
    for (int i = 0; i < 3; ++i) {
        g.value[i] = 1.0 + 0.1 * i;
        bias.value[i] = 0.05 * i;
    }
    Tensor labels = Tensor::row({1.0, 0.0, 1.0, 0.0});
    Tensor mask = Tensor(std::vector<int>{4, 3}, 1.0);
    mask.at(1, 2) = 0.0;

    auto simple = [&](Tape& t) {
        auto av = t.param(a);
        auto bv = t.param(b);
        auto cv = t.param(c);
        auto vv = t.param(v);
        auto mm = t.matmul(av, bv);  // 4x3
        auto nt = t.matmul_nt(cv, bv);  // (4x3)x(6x3)^T -> 4x6
        auto mm2 = t.matmul(nt, bv);    // 4x3
        auto summed = t.add(mm, mm2);
        auto rowed = t.add_rowvec(summed, t.slice_rows(vv, 0, 1));
        auto act = t.tanh(rowed);
        auto sg = t.sigmoid(t.mul(act, cv));
        auto rl = t.relu(t.sub(sg, t.scale(cv, 0.25)));
        auto sm = t.softmax_rows(rl, &mask);
        auto ln = t.layer_norm(sm, t.param(g), t.param(bias), 1e-6);
        std::vector<ValueRef> parts = {ln, sm};
        auto cat = t.concat_cols(parts);  // 4x6
        auto sl = t.slice_cols(cat, 1, 4);
        auto stacked = t.concat_rows(std::vector<ValueRef>{sl, sl});  // 8x3
        auto probs = t.sigmoid(t.slice_cols(t.slice_rows(stacked, 0, 4), 0, 1));
        return t.bce_loss(probs, labels);
    };
    CHECK(gradcheck::max_rel_error(store, simple, 24) <= 1e-4);
}

TEST_CASE("gradient check: mean_pool and embedding lookup") {
    Rng rng(13);
    ParamStore store;
    Parameter& table = store.create_embedding("emb", 7, 5, rng.stream("emb"));
    Parameter& w = store.create_dense("w", 5, 1, rng.stream("w"));
    std::vector<std::vector<int>> ids = {{1, 2, 3, 0}, {4, 5, 0, 0}};
    Tensor mask(std::vector<int>{2, 4}, 1.0);
    mask.at(0, 3) = 0.0;
    mask.at(1, 2) = 0.0;
    mask.at(1, 3) = 0.0;
    Tensor labels = Tensor::row({1.0, 0.0});

    auto build = [&](Tape& t) {
        auto emb = t.embedding_lookup(table, ids);        // 2x4x5
        auto pooled = t.mean_pool(emb, mask);             // 2x5
        auto logits = t.matmul(pooled, t.param(w));       // 2x1
        return t.bce_loss(t.sigmoid(logits), labels);
    };
    CHECK(gradcheck::max_rel_error(store, build, 35) <= 1e-4);
}

TEST_CASE("slice_time reads one step of a (B,T,d) tensor") {
    Tensor x(std::vector<int>{2, 3, 2});
    for (std::int64_t i = 0; i < x.numel(); ++i) x[static_cast<std::size_t>(i)] = static_cast<double>(i);
    Tape tape;
    auto v = tape.slice_time(tape.constant(x), 1);
    CHECK(tape.val(v).at(0, 0) == doctest::Approx(2.0));
    CHECK(tape.val(v).at(0, 1) == doctest::Approx(3.0));
    CHECK(tape.val(v).at(1, 0) == doctest::Approx(8.0));
    CHECK(tape.val(v).at(1, 1) == doctest::Approx(9.0));
}

TEST_CASE("rng: named substreams are deterministic and distinct") {
    Rng a(42);
    Rng b(42);
    CHECK(a.stream("x").next_u64() == b.stream("x").next_u64());
    CHECK(a.stream("x").next_u64() != a.stream("y").next_u64());
    Rng c(43);
    CHECK(a.stream("x").next_u64() != c.stream("x").next_u64());

    Rng s = a.stream("draws");
    std::vector<double> first;
    for (int i = 0; i < 5; ++i) first.push_back(s.uniform());
    Rng s2 = b.stream("draws");
    for (int i = 0; i < 5; ++i) CHECK(s2.uniform() == first[static_cast<std::size_t>(i)]);
}
