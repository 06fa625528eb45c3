#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace diffcdr {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major tensor of doubles. Rank 0 (shape {}) holds a scalar.
class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool is_scalar() const { return data_.size() == 1; }

  // Rank-2 accessors. A rank-1 tensor is viewed as a single row.
  std::size_t rows() const {
    if (shape_.size() == 2) return shape_[0];
    return rows_slow();
  }
  std::size_t cols() const {
    if (shape_.size() == 2) return shape_[1];
    return cols_slow();
  }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }

  std::span<const double> row(std::size_t r) const;
  std::span<double> row(std::size_t r);

  double item() const;
  bool all_finite() const;

  bool operator==(const Tensor& other) const = default;

 private:
  std::size_t rows_slow() const;
  std::size_t cols_slow() const;
  Shape shape_;
  std::vector<double> data_;
};

// FNV-1a over the raw bytes of shape and data; used for frozen-state checks.
std::uint64_t checksum(const Tensor& t);

/// Throws NonFiniteError naming `what` if any entry is NaN/Inf.
void require_finite(const Tensor& t, std::string_view what);

// Plain (non-recording) math. Shapes are validated; mismatches throw ShapeError
// naming both shapes.
namespace ops {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // a^T b
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a b^T
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor silu(const Tensor& a);
Tensor add_row(const Tensor& m, const Tensor& bias);
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> index);
Tensor row_sum(const Tensor& m);
double sum(const Tensor& a);
double mean(const Tensor& a);
double l1(const Tensor& a);
double sqnorm(const Tensor& a);
double dot(std::span<const double> a, std::span<const double> b);

}  // namespace ops
}  // namespace diffcdr
