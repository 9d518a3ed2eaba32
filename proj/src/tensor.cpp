#include "credit/tensor.hpp"

#include <cmath>

namespace credit {

Tensor::Tensor(std::vector<int> shape, double fill) : shape_(std::move(shape)) {
    std::int64_t n = 1;
    for (int d : shape_) {
        if (d < 0) throw ShapeMismatch("negative dimension");
        n *= d;
    }
    data_.assign(static_cast<std::size_t>(n), fill);
    init_cols();
}

Tensor Tensor::scalar(double v) {
    Tensor t(std::vector<int>{});
    t.data_ = {v};
    t.cols_ = 1;
    return t;
}

Tensor Tensor::row(std::vector<double> values) {
    Tensor t;
    t.shape_ = {static_cast<int>(values.size())};
    t.data_ = std::move(values);
    t.init_cols();
    return t;
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> values) {
    if (static_cast<std::size_t>(rows) * cols != values.size())
        throw ShapeMismatch("matrix literal size mismatch");
    Tensor t;
    t.shape_ = {rows, cols};
    t.data_ = std::move(values);
    t.init_cols();
    return t;
}

int Tensor::rows() const {
    if (shape_.empty()) return 1;
    std::int64_t r = 1;
    for (std::size_t i = 0; i + 1 < shape_.size(); ++i) r *= shape_[i];
    return static_cast<int>(r);
}

int Tensor::cols() const { return cols_; }

Tensor Tensor::reshaped(std::vector<int> new_shape) const {
    std::int64_t n = 1;
    for (int d : new_shape) n *= d;
    if (n != numel()) throw ShapeMismatch("reshape changes element count");
    Tensor t = *this;
    t.shape_ = std::move(new_shape);
    t.init_cols();
    return t;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string Tensor::shape_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape_[i]);
    }
    return s + ")";
}

void Tensor::init_cols() { cols_ = shape_.empty() ? 1 : shape_.back(); }

void check_finite(const Tensor& t, const char* context) {
    if (!t.all_finite())
        throw NonFinite(std::string("non-finite values in ") + context);
}

}  // namespace credit
