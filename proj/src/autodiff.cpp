#include "credit/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace credit {

// --- ParamStore --------------------------------------------------------------

Parameter& ParamStore::create(const std::string& name, std::vector<int> shape) {
    if (params_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
    auto p = std::make_unique<Parameter>();
    p->name = name;
    p->value = Tensor(shape);
    p->grad = Tensor(shape);
    p->moment1 = Tensor(shape);
    p->moment2 = Tensor(std::move(shape));
    Parameter& ref = *p;
    params_[name] = std::move(p);
    return ref;
}

Parameter& ParamStore::create_dense(const std::string& name, int fan_in, int fan_out, Rng rng) {
    Parameter& p = create(name, {fan_in, fan_out});
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (std::int64_t i = 0; i < p.value.numel(); ++i)
        p.value[static_cast<std::size_t>(i)] = rng.uniform(-limit, limit);
    return p;
}

Parameter& ParamStore::create_embedding(const std::string& name, int vocab, int dim, Rng rng) {
    Parameter& p = create(name, {vocab, dim});
    for (std::int64_t i = 0; i < p.value.numel(); ++i)
        p.value[static_cast<std::size_t>(i)] = rng.uniform(-0.1, 0.1);
    return p;
}

Parameter* ParamStore::find(const std::string& name) {
    const auto it = params_.find(name);
    return it == params_.end() ? nullptr : it->second.get();
}

const Parameter* ParamStore::find(const std::string& name) const {
    const auto it = params_.find(name);
    return it == params_.end() ? nullptr : it->second.get();
}

Parameter& ParamStore::at(const std::string& name) {
    Parameter* p = find(name);
    if (!p) throw std::invalid_argument("unknown parameter: " + name);
    return *p;
}

void ParamStore::zero_grads() {
    for (auto& [_, p] : params_) p->grad.fill(0.0);
}

void ParamStore::adam_step(double lr) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    for (const auto& [_, p] : params_) {
        if (!p->frozen && !p->grad.all_finite())
            throw NonFinite("non-finite gradient for " + p->name);
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
    for (auto& [_, p] : params_) {
        if (p->frozen) continue;
        for (std::int64_t i = 0; i < p->value.numel(); ++i) {
            const auto k = static_cast<std::size_t>(i);
            const double g = p->grad[k];
            p->moment1[k] = beta1 * p->moment1[k] + (1.0 - beta1) * g;
            p->moment2[k] = beta2 * p->moment2[k] + (1.0 - beta2) * g * g;
            const double mhat = p->moment1[k] / bc1;
            const double vhat = p->moment2[k] / bc2;
            p->value[k] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

void ParamStore::set_frozen(const std::string& prefix, bool frozen) {
    for (auto& [name, p] : params_)
        if (name.rfind(prefix, 0) == 0) p->frozen = frozen;
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [name, _] : params_) out.push_back(name);
    return out;
}

std::int64_t ParamStore::value_count() const {
    std::int64_t n = 0;
    for (const auto& [_, p] : params_) n += p->value.numel();
    return n;
}

std::uint64_t ParamStore::value_hash() const { return value_hash(""); }

std::uint64_t ParamStore::value_hash(const std::string& prefix) const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* bytes, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(bytes);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    for (const auto& [name, p] : params_) {
        if (name.rfind(prefix, 0) != 0) continue;
        mix(name.data(), name.size());
        mix(p->value.data(), static_cast<std::size_t>(p->value.numel()) * sizeof(double));
    }
    return h;
}

// --- Tape --------------------------------------------------------------------

Tape::ValueRef Tape::push(Tensor value, std::function<void(Tape&)> back, const char* context) {
    check_finite(value, context);
    Node n;
    n.grad = Tensor(value.shape());
    n.value = std::move(value);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return {static_cast<int>(nodes_.size()) - 1};
}

void Tape::require_2d(const Tensor& t, const char* context) {
    if (t.ndim() < 1) throw ShapeMismatch(std::string(context) + ": tensor has no dimensions");
}

ValueRef Tape::constant(Tensor t) { return push(std::move(t), nullptr, "constant"); }

ValueRef Tape::param(Parameter& p) {
    ValueRef self{static_cast<int>(nodes_.size())};
    Parameter* ptr = &p;
    auto back = [self, ptr](Tape& tape) {
        const Tensor& g = tape.nodes_[self.id].grad;
        for (std::int64_t i = 0; i < g.numel(); ++i)
            ptr->grad[static_cast<std::size_t>(i)] += g[static_cast<std::size_t>(i)];
    };
    ValueRef v = push(p.value, std::move(back), "param");
    nodes_[v.id].source = ptr;
    return v;
}

ValueRef Tape::matmul(ValueRef a, ValueRef b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    require_2d(A, "matmul lhs");
    if (B.ndim() != 2) throw ShapeMismatch("matmul rhs must be 2-D");
    const int m = A.rows(), k = A.cols(), n = B.cols();
    if (B.rows() != k)
        throw ShapeMismatch("matmul inner dims " + A.shape_string() + " x " + B.shape_string());

    std::vector<int> out_shape = A.shape();
    out_shape.back() = n;
    Tensor C(out_shape);
    const double* pa = A.data();
    const double* pb = B.data();
    double* pc = C.data();
    for (int i = 0; i < m; ++i) {
        for (int t = 0; t < k; ++t) {
            const double av = pa[static_cast<std::size_t>(i) * k + t];
            if (av == 0.0) continue;
            const double* brow = pb + static_cast<std::size_t>(t) * n;
            double* crow = pc + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }

    ValueRef self{static_cast<int>(nodes_.size())};
    auto back = [self, a, b, m, k, n](Tape& tape) {
        const Tensor& G = tape.nodes_[self.id].grad;
        const Tensor& Av = tape.val(a);
        const Tensor& Bv = tape.val(b);
        Tensor& dA = tape.grad(a);
        Tensor& dB = tape.grad(b);
        const double* pg = G.data();
        const double* pav = Av.data();
        const double* pbv = Bv.data();
        for (int i = 0; i < m; ++i) {
            const double* grow = pg + static_cast<std::size_t>(i) * n;
            for (int t = 0; t < k; ++t) {
                const double* brow = pbv + static_cast<std::size_t>(t) * n;
                double s = 0.0;
                for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
                dA[static_cast<std::size_t>(i) * k + t] += s;
            }
            for (int t = 0; t < k; ++t) {
                const double av = pav[static_cast<std::size_t>(i) * k + t];
                if (av == 0.0) continue;
                double* dbrow = dB.data() + static_cast<std::size_t>(t) * n;
                for (int j = 0; j < n; ++j) dbrow[j] += av * grow[j];
            }
        }
    };
    return push(std::move(C), std::move(back), "matmul");
}

ValueRef Tape::matmul_nt(ValueRef a, ValueRef b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    const int m = A.rows(), k = A.cols(), n = B.rows();
    if (B.cols() != k)
        throw ShapeMismatch("matmul_nt inner dims " + A.shape_string() + " x " + B.shape_string());

    std::vector<int> out_shape = A.shape();
    out_shape.back() = n;
    Tensor C(out_shape);
    for (int i = 0; i < m; ++i) {
        const double* arow = A.data() + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < n; ++j) {
            const double* brow = B.data() + static_cast<std::size_t>(j) * k;
            double s = 0.0;
            for (int t = 0; t < k; ++t) s += arow[t] * brow[t];
            C[static_cast<std::size_t>(i) * n + j] = s;
        }
    }

    ValueRef self{static_cast<int>(nodes_.size())};
    auto back = [self, a, b, m, k, n](Tape& tape) {
        const Tensor& G = tape.nodes_[self.id].grad;
        const Tensor& Av = tape.val(a);
        const Tensor& Bv = tape.val(b);
        Tensor& dA = tape.grad(a);
        Tensor& dB = tape.grad(b);
        for (int i = 0; i < m; ++i) {
            const double* grow = G.data() + static_cast<std::size_t>(i) * n;
            double* darow = dA.data() + static_cast<std::size_t>(i) * k;
            const double* arow = Av.data() + static_cast<std::size_t>(i) * k;
            for (int j = 0; j < n; ++j) {
                const double g = grow[j];
                if (g == 0.0) continue;
                const double* brow = Bv.data() + static_cast<std::size_t>(j) * k;
                double* dbrow = dB.data() + static_cast<std::size_t>(j) * k;
                for (int t = 0; t < k; ++t) {
                    darow[t] += g * brow[t];
                    dbrow[t] += g * arow[t];
                }
            }
        }
    };
    return push(std::move(C), std::move(back), "matmul_nt");
}

ValueRef Tape::add(ValueRef a, ValueRef b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B)) throw ShapeMismatch("add shapes " + A.shape_string() + " vs " + B.shape_string());
    Tensor C = A;
    for (std::int64_t i = 0; i < C.numel(); ++i) C[static_cast<std::size_t>(i)] += B[static_cast<std::size_t>(i)];
    ValueRef self{static_cast<int>(nodes_.size())};
    auto back = [self, a, b](Tape& tape) {
        const Tensor& G = tape.nodes_[self.id].grad;
        Tensor& dA = tape.grad(a);
        Tensor& dB = tape.grad(b);
        for (std::int64_t i = 0; i < G.numel(); ++i) {
            dA[static_cast<std::size_t>(i)] += G[static_cast<std::size_t>(i)];
            dB[static_cast<std::size_t>(i)] += G[static_cast<std::size_t>(i)];
        }
    };
    return push(std::move(C), std::move(back), "add");
}

ValueRef Tape::add_rowvec(ValueRef a, ValueRef b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    const int m = A.rows(), n = A.cols();
    if (B.numel() != n) throw ShapeMismatch("add_rowvec width mismatch");
    Tensor C = A;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) C[static_cast<std::size_t>(i) * n + j] += B[static_cast<std::size_t>(j)];
    ValueRef self{static_cast<int>(nodes_.size())};
    auto back = [self, a, b, m, n](Tape& tape) {
        const Tensor& G = tape.nodes_[self.id].grad;
        Tensor& dA = tape.grad(a);
        Tensor& dB = tape.grad(b);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                const double g = G[static_cast<std::size_t>(i) * n + j];
                dA[static_cast<std::size_t>(i) * n + j] += g;
                dB[static_cast<std::size_t>(j)] += g;
            }
    };
    return push(std::move(C), std::move(back), "add_rowvec");
}

ValueRef Tape::sub(ValueRef a, ValueRef b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B)) throw ShapeMismatch("sub shape mismatch");
    Tensor C = A;
    for (std::int64_t i = 0; i < C.numel(); ++i) C[static_cast<std::size_t>(i)] -= B[static_cast<std::size_t>(i)];
    ValueRef self{static_cast<int>(nodes_.size())};
    auto back = [self, a, b](Tape& tape) {
        const Tensor& G = tape.nodes_[self.id].grad;
        Tensor& dA = tape.grad(a);
        Tensor& dB = tape.grad(b);
        for (std::int64_t i = 0; i < G.numel(); ++i) {
            dA[static_cast<std::size_t>(i)] += G[static_cast<std::size_t>(i)];
            dB[static_cast<std::size_t>(i)] -= G[static_cast<std::size_t>(i)];
        }
    };
    return push(std::move(C), std::move(back), "sub");
}

ValueRef Tape::mul(ValueRef a, ValueRef b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B)) throw ShapeMismatch("mul shape mismatch");
    Tensor C = A;
    for (std::int64_t i = 0; i < C.numel(); ++i) C[static_cast<std::size_t>(i)] *= B[static_cast<std::size_t>(i)];
    ValueRef self{static_cast<int>(nodes_.size())};
    auto back = [self, a, b](Tape& tape) {
        const Tensor& G = tape.nodes_[self.id].grad;
        const Tensor& Av = tape.val(a);
        const Tensor& Bv = tape.val(b);
        Tensor& dA = tape.grad(a);
        Tensor& dB = tape.grad(b);
        for (std::int64_t i = 0; i < G.numel(); ++i) {
            const auto k = static_cast<std::size_t>(i);
            dA[k] += G[k] * Bv[k];
            dB[k] += G[k] * Av[k];
        }
    };
    return push(std::move(C), std::move(back), "mul");
}

ValueRef Tape::scale(ValueRef a, double s) {
    Tensor C = val(a);
    for (std::int64_t i = 0; i < C.numel(); ++i) C[static_cast<std::size_t>(i)] *= s;
    ValueRef self{static_cast<int>(nodes_.size())};
    auto back = [self, a, s](Tape& tape) {
        const Tensor& G = tape.nodes_[self.id].grad;
        Tensor& dA = tape.grad(a);
        for (std::int64_t i = 0; i < G.numel(); ++i)
            dA[static_cast<std::size_t>(i)] += s * G[static_cast<std::size_t>(i)];
    };
    return push(std::move(C), std::move(back), "scale");
}

namespace {
double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

ValueRef Tape::sigmoid(ValueRef a) {
    Tensor C = val(a);
    for (std::int64_t i = 0; i < C.numel(); ++i)
        C[static_cast<std::size_t>(i)] = sigmoid_scalar(C[static_cast<std::size_t>(i)]);
    ValueRef self{static_cast<int>(nodes_.size())};
    auto back = [self, a](Tape& tape) {
        const Tensor& G = tape.nodes_[self.id].grad;
        const Tensor& Y = tape.nodes_[self.id].value;
        Tensor& dA = tape.grad(a);
        for (std::int64_t i = 0; i < G.numel(); ++i) {
            const auto k = static_cast<std::size_t>(i);
            dA[k] += G[k] * Y[k] * (1.0 - Y[k]);
        }
    };
    return push(std::move(C), std::move(back), "sigmoid");
}

ValueRef Tape::tanh(ValueRef a) {
    Tensor C = val(a);
    for (std::int64_t i = 0; i < C.numel(); ++i)
        C[static_cast<std::size_t>(i)] = std::tanh(C[static_cast<std::size_t>(i)]);
    ValueRef self{static_cast<int>(nodes_.size())};
    auto back = [self, a](Tape& tape) {
        const Tensor& G = tape.nodes_[self.id].grad;
        const Tensor& Y = tape.nodes_[self.id].value;
        Tensor& dA = tape.grad(a);
        for (std::int64_t i = 0; i < G.numel(); ++i) {
            const auto k = static_cast<std::size_t>(i);
            dA[k] += G[k] * (1.0 - Y[k] * Y[k]);
        }
    };
    return push(std::move(C), std::move(back), "tanh");
}

ValueRef Tape::relu(ValueRef a) {
    Tensor C = val(a);
    for (std::int64_t i = 0; i < C.numel(); ++i)
        C[static_cast<std::size_t>(i)] = std::max(0.0, C[static_cast<std::size_t>(i)]);
    ValueRef self{static_cast<int>(nodes_.size())};
    auto back = [self, a](Tape& tape) {
        const Tensor& G = tape.nodes_[self.id].grad;
        const Tensor& X = tape.val(a);
        Tensor& dA = tape.grad(a);
        for (std::int64_t i = 0; i < G.numel(); ++i) {
            const auto k = static_cast<std::size_t>(i);
            if (X[k] > 0.0) dA[k] += G[k];
        }
    };
    return push(std::move(C), std::move(back), "relu");
}

ValueRef Tape::softmax_rows(ValueRef a, const Tensor* mask) {
    const Tensor& A = val(a);
    const int m = A.rows(), n = A.cols();
    if (mask && (mask->rows() != m || mask->cols() != n))
        throw ShapeMismatch("softmax mask shape mismatch");
    Tensor C(A.shape());
    for (int i = 0; i < m; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j)
            if (!mask || mask->at(i, j) != 0.0) mx = std::max(mx, A.at(i, j));
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            if (mask && mask->at(i, j) == 0.0) continue;
            const double e = std::exp(A.at(i, j) - mx);
            C.at(i, j) = e;
            sum += e;
        }
        if (sum > 0.0)
            for (int j = 0; j < n; ++j) C.at(i, j) /= sum;
    }
    ValueRef self{static_cast<int>(nodes_.size())};
    auto back = [self, a, m, n](Tape& tape) {
        const Tensor& G = tape.nodes_[self.id].grad;
        const Tensor& Y = tape.nodes_[self.id].value;
        Tensor& dA = tape.grad(a);
        for (int i = 0; i < m; ++i) {
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += G.at(i, j) * Y.at(i, j);
            for (int j = 0; j < n; ++j) dA.at(i, j) += Y.at(i, j) * (G.at(i, j) - dot);
        }
    };
    return push(std::move(C), std::move(back), "softmax");
}

ValueRef Tape::layer_norm(ValueRef x, ValueRef gain, ValueRef bias, double eps) {
    const Tensor& X = val(x);
    const Tensor& Gp = val(gain);
    const Tensor& Bp = val(bias);
    const int m = X.rows(), n = X.cols();
    if (Gp.numel() != n || Bp.numel() != n) throw ShapeMismatch("layer_norm affine width mismatch");

    Tensor C(X.shape());
    Tensor xhat(X.shape());
    Tensor inv_std(std::vector<int>{m});
    for (int i = 0; i < m; ++i) {
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += X.at(i, j);
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            const double d = X.at(i, j) - mean;
            var += d * d;
        }
        var /= n;
        const double inv = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<std::size_t>(i)] = inv;
        for (int j = 0; j < n; ++j) {
            const double xh = (X.at(i, j) - mean) * inv;
            xhat.at(i, j) = xh;
            C.at(i, j) = xh * Gp[static_cast<std::size_t>(j)] + Bp[static_cast<std::size_t>(j)];
        }
    }

    ValueRef self{static_cast<int>(nodes_.size())};
    auto back = [self, x, gain, bias, m, n, xhat = std::move(xhat),
                 inv_std = std::move(inv_std)](Tape& tape) {
        const Tensor& G = tape.nodes_[self.id].grad;
        const Tensor& Gv = tape.val(gain);
        Tensor& dX = tape.grad(x);
        Tensor& dGain = tape.grad(gain);
        Tensor& dBias = tape.grad(bias);
        for (int i = 0; i < m; ++i) {
            const double inv = inv_std[static_cast<std::size_t>(i)];
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (int j = 0; j < n; ++j) {
                const double dy = G.at(i, j);
                const double dxh = dy * Gv[static_cast<std::size_t>(j)];
                sum_dxhat += dxh;
                sum_dxhat_xhat += dxh * xhat.at(i, j);
                dGain[static_cast<std::size_t>(j)] += dy * xhat.at(i, j);
                dBias[static_cast<std::size_t>(j)] += dy;
            }
            for (int j = 0; j < n; ++j) {
                const double dxh = G.at(i, j) * Gv[static_cast<std::size_t>(j)];
                dX.at(i, j) += inv * (dxh - sum_dxhat / n - xhat.at(i, j) * sum_dxhat_xhat / n);
            }
        }
    };
    return push(std::move(C), std::move(back), "layer_norm");
}

ValueRef Tape::concat_cols(std::span<const ValueRef> parts) {
    if (parts.empty()) throw ShapeMismatch("concat of nothing");
    const int m = val(parts[0]).rows();
    int total = 0;
    for (const auto& p : parts) {
        if (val(p).rows() != m) throw ShapeMismatch("concat_cols row mismatch");
        total += val(p).cols();
    }
    Tensor C(std::vector<int>{m, total});
    int off = 0;
    for (const auto& p : parts) {
        const Tensor& P = val(p);
        const int n = P.cols();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) C.at(i, off + j) = P.at(i, j);
        off += n;
    }
    ValueRef self{static_cast<int>(nodes_.size())};
    std::vector<ValueRef> owned(parts.begin(), parts.end());
    auto back = [self, owned, m](Tape& tape) {
        const Tensor& G = tape.nodes_[self.id].grad;
        int off = 0;
        for (const auto& p : owned) {
            Tensor& dP = tape.grad(p);
            const int n = dP.cols();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) dP.at(i, j) += G.at(i, off + j);
            off += n;
        }
    };
    return push(std::move(C), std::move(back), "concat_cols");
}

ValueRef Tape::concat_rows(std::span<const ValueRef> parts) {
    if (parts.empty()) throw ShapeMismatch("concat of nothing");
    const int n = val(parts[0]).cols();
    int total = 0;
    for (const auto& p : parts) {
        if (val(p).cols() != n) throw ShapeMismatch("concat_rows col mismatch");
        total += val(p).rows();
    }
    Tensor C(std::vector<int>{total, n});
    int off = 0;
    for (const auto& p : parts) {
        const Tensor& P = val(p);
        for (int i = 0; i < P.rows(); ++i)
            for (int j = 0; j < n; ++j) C.at(off + i, j) = P.at(i, j);
        off += P.rows();
    }
    ValueRef self{static_cast<int>(nodes_.size())};
    std::vector<ValueRef> owned(parts.begin(), parts.end());
    auto back = [self, owned, n](Tape& tape) {
        const Tensor& G = tape.nodes_[self.id].grad;
        int off = 0;
        for (const auto& p : owned) {
            Tensor& dP = tape.grad(p);
            for (int i = 0; i < dP.rows(); ++i)
                for (int j = 0; j < n; ++j) dP.at(i, j) += G.at(off + i, j);
            off += dP.rows();
        }
    };
    return push(std::move(C), std::move(back), "concat_rows");
}

ValueRef Tape::slice_cols(ValueRef a, int from, int to) {
    const Tensor& A = val(a);
    const int m = A.rows(), n = A.cols();
    if (from < 0 || to > n || from >= to) throw ShapeMismatch("slice_cols range");
    Tensor C(std::vector<int>{m, to - from});
    for (int i = 0; i < m; ++i)
        for (int j = from; j < to; ++j) C.at(i, j - from) = A.at(i, j);
    ValueRef self{static_cast<int>(nodes_.size())};
    auto back = [self, a, from, to, m](Tape& tape) {
        const Tensor& G = tape.nodes_[self.id].grad;
        Tensor& dA = tape.grad(a);
        for (int i = 0; i < m; ++i)
            for (int j = from; j < to; ++j) dA.at(i, j) += G.at(i, j - from);
    };
    return push(std::move(C), std::move(back), "slice_cols");
}

ValueRef Tape::slice_rows(ValueRef a, int from, int to) {
    const Tensor& A = val(a);
    const int m = A.rows(), n = A.cols();
    if (from < 0 || to > m || from >= to) throw ShapeMismatch("slice_rows range");
    Tensor C(std::vector<int>{to - from, n});
    for (int i = from; i < to; ++i)
        for (int j = 0; j < n; ++j) C.at(i - from, j) = A.at(i, j);
    ValueRef self{static_cast<int>(nodes_.size())};
    auto back = [self, a, from, to, n](Tape& tape) {
        const Tensor& G = tape.nodes_[self.id].grad;
        Tensor& dA = tape.grad(a);
        for (int i = from; i < to; ++i)
            for (int j = 0; j < n; ++j) dA.at(i, j) += G.at(i - from, j);
    };
    return push(std::move(C), std::move(back), "slice_rows");
}

ValueRef Tape::slice_time(ValueRef a, int t) {
    const Tensor& A = val(a);
    if (A.ndim() != 3) throw ShapeMismatch("slice_time expects (B,T,d)");
    const int B = A.dim(0), T = A.dim(1), d = A.dim(2);
    if (t < 0 || t >= T) throw ShapeMismatch("slice_time step out of range");
    Tensor C(std::vector<int>{B, d});
    for (int b = 0; b < B; ++b) {
        const double* src = A.data() + (static_cast<std::size_t>(b) * T + t) * d;
        double* dst = C.data() + static_cast<std::size_t>(b) * d;
        std::copy(src, src + d, dst);
    }
    ValueRef self{static_cast<int>(nodes_.size())};
    auto back = [self, a, t, B, T, d](Tape& tape) {
        const Tensor& G = tape.nodes_[self.id].grad;
        Tensor& dA = tape.grad(a);
        for (int b = 0; b < B; ++b) {
            double* dst = dA.data() + (static_cast<std::size_t>(b) * T + t) * d;
            const double* src = G.data() + static_cast<std::size_t>(b) * d;
            for (int j = 0; j < d; ++j) dst[j] += src[j];
        }
    };
    return push(std::move(C), std::move(back), "slice_time");
}

ValueRef Tape::mean_pool(ValueRef a, const Tensor& mask) {
    const Tensor& A = val(a);
    if (A.ndim() != 3) throw ShapeMismatch("mean_pool expects (B,T,d)");
    const int B = A.dim(0), T = A.dim(1), d = A.dim(2);
    if (mask.rows() != B || mask.cols() != T) throw ShapeMismatch("mean_pool mask shape");
    Tensor C(std::vector<int>{B, d});
    Tensor denom(std::vector<int>{B});
    for (int b = 0; b < B; ++b) {
        double total = 0.0;
        for (int t = 0; t < T; ++t) total += mask.at(b, t);
        denom[static_cast<std::size_t>(b)] = total;
        if (total <= 0.0) continue;
        for (int t = 0; t < T; ++t) {
            const double w = mask.at(b, t) / total;
            if (w == 0.0) continue;
            const double* src = A.data() + (static_cast<std::size_t>(b) * T + t) * d;
            double* dst = C.data() + static_cast<std::size_t>(b) * d;
            for (int j = 0; j < d; ++j) dst[j] += w * src[j];
        }
    }
    ValueRef self{static_cast<int>(nodes_.size())};
    auto back = [self, a, mask, B, T, d, denom = std::move(denom)](Tape& tape) {
        const Tensor& G = tape.nodes_[self.id].grad;
        Tensor& dA = tape.grad(a);
        for (int b = 0; b < B; ++b) {
            const double total = denom[static_cast<std::size_t>(b)];
            if (total <= 0.0) continue;
            for (int t = 0; t < T; ++t) {
                const double w = mask.at(b, t) / total;
                if (w == 0.0) continue;
                double* dst = dA.data() + (static_cast<std::size_t>(b) * T + t) * d;
                const double* src = G.data() + static_cast<std::size_t>(b) * d;
                for (int j = 0; j < d; ++j) dst[j] += w * src[j];
            }
        }
    };
    return push(std::move(C), std::move(back), "mean_pool");
}

ValueRef Tape::embedding_lookup(Parameter& table, const std::vector<std::vector<int>>& ids) {
    const int B = static_cast<int>(ids.size());
    if (B == 0) throw EmptyBatch("embedding_lookup on empty batch");
    const int T = static_cast<int>(ids.front().size());
    const int V = table.value.dim(0), d = table.value.dim(1);
    Tensor C(std::vector<int>{B, T, d});
    for (int b = 0; b < B; ++b) {
        if (static_cast<int>(ids[b].size()) != T)
            throw ShapeMismatch("ragged id batch in embedding_lookup");
        for (int t = 0; t < T; ++t) {
            const int id = ids[b][t];
            if (id < 0 || id >= V) throw ShapeMismatch("token id out of vocabulary range");
            const double* src = table.value.data() + static_cast<std::size_t>(id) * d;
            double* dst = C.data() + (static_cast<std::size_t>(b) * T + t) * d;
            std::copy(src, src + d, dst);
        }
    }
    ValueRef self{static_cast<int>(nodes_.size())};
    Parameter* ptr = &table;
    auto back = [self, ptr, ids, B, T, d](Tape& tape) {
        const Tensor& G = tape.nodes_[self.id].grad;
        for (int b = 0; b < B; ++b)
            for (int t = 0; t < T; ++t) {
                double* dst = ptr->grad.data() + static_cast<std::size_t>(ids[b][t]) * d;
                const double* src = G.data() + (static_cast<std::size_t>(b) * T + t) * d;
                for (int j = 0; j < d; ++j) dst[j] += src[j];
            }
    };
    return push(std::move(C), std::move(back), "embedding_lookup");
}

ValueRef Tape::bce_loss(ValueRef pred, const Tensor& labels, double pos_weight) {
    constexpr double kEps = 1e-7;
    const Tensor& P = val(pred);
    const std::int64_t n = P.numel();
    if (n == 0) throw EmptyBatch("bce_loss over empty batch");
    if (labels.numel() != n) throw ShapeMismatch("bce_loss labels mismatch");

    double loss = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double p = std::clamp(P[k], kEps, 1.0 - kEps);
        const double y = labels[k];
        loss -= pos_weight * y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    loss /= static_cast<double>(n);

    ValueRef self{static_cast<int>(nodes_.size())};
    auto back = [self, pred, labels, n, pos_weight](Tape& tape) {
        const double g = tape.nodes_[self.id].grad[0];
        const Tensor& P = tape.val(pred);
        Tensor& dP = tape.grad(pred);
        for (std::int64_t i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(i);
            const double p = P[k];
            if (p <= kEps || p >= 1.0 - kEps) continue;  // clamped region
            const double y = labels[k];
            dP[k] += g * (-pos_weight * y / p + (1.0 - y) / (1.0 - p)) / static_cast<double>(n);
        }
    };
    return push(Tensor::scalar(loss), std::move(back), "bce_loss");
}

void Tape::backward(ValueRef root) {
    if (!root.valid()) throw std::invalid_argument("backward on invalid node");
    if (nodes_[root.id].value.numel() != 1)
        throw ShapeMismatch("backward root must be scalar");
    nodes_[root.id].grad[0] = 1.0;
    for (int id = root.id; id >= 0; --id) {
        if (nodes_[id].back) nodes_[id].back(*this);
    }
}

}  // namespace credit
