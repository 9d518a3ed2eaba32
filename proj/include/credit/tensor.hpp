#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace credit {

struct ShapeMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonFinite : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense row-major tensor of 64-bit floats.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape, double fill = 0.0);
    static Tensor scalar(double v);
    static Tensor row(std::vector<double> values);                 // shape (n)
    static Tensor matrix(int rows, int cols, std::vector<double>); // shape (rows, cols)

    const std::vector<int>& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

    // 2-D accessors (rows x cols); 3-D tensors use (d0*d1, d2) flattening.
    int rows() const;
    int cols() const;
    double& at(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
    double at(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    Tensor reshaped(std::vector<int> new_shape) const;
    void fill(double v);
    bool all_finite() const;
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    std::string shape_string() const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
    int cols_ = 0;  // innermost dimension, cached for 2-D indexing

    void init_cols();
};

void check_finite(const Tensor& t, const char* context);

}  // namespace credit
