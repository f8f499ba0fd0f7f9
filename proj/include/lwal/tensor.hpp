#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace lwal {

// Dense row-major tensor of 64-bit floats.
//
// A Tensor is a plain value: copyable, movable, no gradient bookkeeping.
// Gradients live on the Tape (see autodiff.hpp).
class Tensor {
  public:
    Tensor() = default;

    // Zero-filled tensor of the given shape. Each dimension must be positive.
    explicit Tensor(std::vector<std::size_t> shape);

    // Takes ownership of `data`; product(shape) must equal data.size().
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor row(std::vector<double> values); // shape {n}
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor full(std::vector<std::size_t> shape, double v);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    bool is_scalar() const { return data_.size() == 1; }

    // 2-d accessors; throw ShapeError when the tensor is not a matrix.
    std::size_t rows() const;
    std::size_t cols() const;
    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;
    std::span<const double> row_span(std::size_t r) const;

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    bool operator==(const Tensor& other) const = default;

  private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

} // namespace lwal
