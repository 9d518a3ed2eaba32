#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "credit/rng.hpp"
#include "credit/tensor.hpp"

namespace credit {

struct EmptyBatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor moment1;
    Tensor moment2;
    bool frozen = false;
};

// Named parameters with Adam state. Map iteration order (lexicographic by
// name) makes every whole-store operation deterministic.
class ParamStore {
public:
    Parameter& create(const std::string& name, std::vector<int> shape);
    // Glorot-style uniform in +-sqrt(6 / (fan_in + fan_out)).
    Parameter& create_dense(const std::string& name, int fan_in, int fan_out, Rng rng);
    // Uniform in +-0.1.
    Parameter& create_embedding(const std::string& name, int vocab, int dim, Rng rng);

    Parameter* find(const std::string& name);
    const Parameter* find(const std::string& name) const;
    Parameter& at(const std::string& name);

    void zero_grads();
    // Bias-corrected adaptive-moment update; beta1=0.9, beta2=0.999, eps=1e-8.
    // Throws NonFinite (before mutating anything) if any gradient is bad.
    void adam_step(double lr);

    long step_count() const { return step_; }
    void set_frozen(const std::string& prefix, bool frozen);  // by name prefix
    std::vector<std::string> names() const;
    std::size_t size() const { return params_.size(); }
    std::int64_t value_count() const;
    std::uint64_t value_hash() const;
    std::uint64_t value_hash(const std::string& prefix) const;

    template <typename Fn>
    void for_each(Fn&& fn) {
        for (auto& [_, p] : params_) fn(*p);
    }
    template <typename Fn>
    void for_each(Fn&& fn) const {
        for (const auto& [_, p] : params_) fn(*p);
    }

private:
    std::map<std::string, std::unique_ptr<Parameter>> params_;
    long step_ = 0;
};

// Reverse-mode autodiff over a per-batch tape. Nodes are created in
// topological order; backward replays them in reverse.
class Tape {
public:
    struct ValueRef {
        int id = -1;
        bool valid() const { return id >= 0; }
    };

    ValueRef constant(Tensor t);
    ValueRef param(Parameter& p);

    const Tensor& val(ValueRef v) const { return nodes_[v.id].value; }
    Tensor& grad(ValueRef v) { return nodes_[v.id].grad; }

    // (m,k) x (k,n) -> (m,n)
    ValueRef matmul(ValueRef a, ValueRef b);
    // (m,k) x (n,k)^T -> (m,n)
    ValueRef matmul_nt(ValueRef a, ValueRef b);
    ValueRef add(ValueRef a, ValueRef b);          // same shape
    ValueRef add_rowvec(ValueRef a, ValueRef b);   // (m,n) + (n)
    ValueRef sub(ValueRef a, ValueRef b);
    ValueRef mul(ValueRef a, ValueRef b);          // elementwise
    ValueRef scale(ValueRef a, double s);
    ValueRef sigmoid(ValueRef a);
    ValueRef tanh(ValueRef a);
    ValueRef relu(ValueRef a);
    // Row-wise softmax; entries where mask == 0 get exactly zero probability.
    ValueRef softmax_rows(ValueRef a, const Tensor* mask = nullptr);
    ValueRef layer_norm(ValueRef x, ValueRef gain, ValueRef bias, double eps = 1e-5);
    ValueRef concat_cols(std::span<const ValueRef> parts);
    ValueRef concat_rows(std::span<const ValueRef> parts);
    ValueRef slice_cols(ValueRef a, int from, int to);
    ValueRef slice_rows(ValueRef a, int from, int to);
    // (B,T,d) -> (B,d) at time step t.
    ValueRef slice_time(ValueRef a, int t);
    // (B,T,d) with (B,T) mask -> (B,d) masked mean over time.
    ValueRef mean_pool(ValueRef a, const Tensor& mask);
    // table (V,d), ids (B,T) -> (B,T,d)
    ValueRef embedding_lookup(Parameter& table, const std::vector<std::vector<int>>& ids);
    // Binary cross entropy over probabilities clamped to [1e-7, 1 - 1e-7].
    ValueRef bce_loss(ValueRef pred, const Tensor& labels, double pos_weight = 1.0);

    void backward(ValueRef root);
    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Tape&)> back;  // empty for leaves/constants
        Parameter* source = nullptr;
    };

    // deque: references returned by val()/grad() survive later pushes
    std::deque<Node> nodes_;

    ValueRef push(Tensor value, std::function<void(Tape&)> back, const char* context);
    static void require_2d(const Tensor& t, const char* context);
};

using ValueRef = Tape::ValueRef;

}  // namespace credit
