#include "diffcdr/tensor.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>

#include <Eigen/Core>

namespace diffcdr {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape_));
  }
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("shape " + shape_str(shape_) + " needs " + std::to_string(shape_numel(shape_)) +
                     " values, got " + std::to_string(data_.size()));
  }
}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
  auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
  auto n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::identity(std::size_t n) {
  auto t = zeros({n, n});
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

std::size_t Tensor::rows_slow() const {
  if (rank() <= 1) return 1;
  throw ShapeError("rows() on rank-" + std::to_string(rank()) + " tensor " + shape_str(shape_));
}

std::size_t Tensor::cols_slow() const {
  if (rank() == 1) return shape_[0];
  if (rank() == 0) return 1;
  throw ShapeError("cols() on rank-" + std::to_string(rank()) + " tensor " + shape_str(shape_));
}

std::span<const double> Tensor::row(std::size_t r) const {
  auto c = cols();
  return std::span<const double>(data_).subspan(r * c, c);
}

std::span<double> Tensor::row(std::size_t r) {
  auto c = cols();
  return std::span<double>(data_).subspan(r * c, c);
}

double Tensor::item() const {
  if (!is_scalar()) throw ShapeError("item() on non-scalar tensor " + shape_str(shape_));
  return data_[0];
}

bool Tensor::all_finite() const {
  // x * 0 is 0 for finite x and NaN otherwise; four lanes keep this vectorizable.
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t n = data_.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (std::size_t l = 0; l < 4; ++l) acc[l] += data_[i + l] * 0.0;
  }
  for (; i < n; ++i) acc[0] += data_[i] * 0.0;
  return acc[0] + acc[1] + acc[2] + acc[3] == 0.0;
}

std::uint64_t checksum(const Tensor& t) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (auto d : t.shape()) mix(&d, sizeof d);
  mix(t.data().data(), t.size() * sizeof(double));
  return h;
}

void require_finite(const Tensor& t, std::string_view what) {
  if (!t.all_finite()) throw NonFiniteError("non-finite value produced by " + std::string(what));
}

namespace ops {
namespace {

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void require_matrix(const Tensor& a, const char* op) {
  if (a.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(a.shape()));
}

template <class F>
Tensor zip(const Tensor& a, const Tensor& b, const char* op, F f) {
  // Scalar broadcast on either side; otherwise shapes must match.
  if (b.is_scalar() && b.rank() == 0 && !(a.is_scalar() && a.rank() == 0)) {
    std::vector<double> out(a.size());
    const double s = b[0];
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], s);
    return Tensor(a.shape(), std::move(out));
  }
  if (a.is_scalar() && a.rank() == 0 && !(b.is_scalar() && b.rank() == 0)) {
    std::vector<double> out(b.size());
    const double s = a[0];
    for (std::size_t i = 0; i < b.size(); ++i) out[i] = f(s, b[i]);
    return Tensor(b.shape(), std::move(out));
  }
  require_same(a, b, op);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return Tensor(a.shape(), std::move(out));
}

}  // namespace

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMajor> as_matrix(const Tensor& t) {
  return {t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (b.rows() != a.cols()) {
    throw ShapeError("matmul: inner dimensions differ " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor out = Tensor::zeros({a.rows(), b.cols()});
  Eigen::Map<RowMajor> o(out.data().data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(b.cols()));
  o.noalias() = as_matrix(a) * as_matrix(b);
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_tn");
  require_matrix(b, "matmul_tn");
  if (b.rows() != a.rows()) {
    throw ShapeError("matmul_tn: row counts differ " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor out = Tensor::zeros({a.cols(), b.cols()});
  Eigen::Map<RowMajor> o(out.data().data(), static_cast<Eigen::Index>(a.cols()), static_cast<Eigen::Index>(b.cols()));
  o.noalias() = as_matrix(a).transpose() * as_matrix(b);
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  if (b.cols() != a.cols()) {
    throw ShapeError("matmul_nt: column counts differ " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor out = Tensor::zeros({a.rows(), b.rows()});
  Eigen::Map<RowMajor> o(out.data().data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(b.rows()));
  o.noalias() = as_matrix(a) * as_matrix(b).transpose();
  return out;
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const auto m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a(i, j);
  return Tensor({n, m}, std::move(out));
}

Tensor add(const Tensor& a, const Tensor& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return zip(a, b, "sub", [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return zip(a, b, "mul", [](double x, double y) { return x * y; });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return Tensor(a.shape(), std::move(out));
}

Tensor silu(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] / (1.0 + std::exp(-a[i]));
  return Tensor(a.shape(), std::move(out));
}

Tensor add_row(const Tensor& m, const Tensor& bias) {
  require_matrix(m, "add_row");
  if (bias.rank() != 1 || bias.size() != m.cols()) {
    throw ShapeError("add_row: bias " + shape_str(bias.shape()) + " does not match columns of " +
                     shape_str(m.shape()));
  }
  Tensor out = m;
  const auto c = m.cols();
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t j = 0; j < c; ++j) out(r, j) += bias[j];
  return out;
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> index) {
  require_matrix(table, "gather_rows");
  if (index.empty()) throw ShapeError("gather_rows: empty index list");
  const auto c = table.cols();
  std::vector<double> out(index.size() * c);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= table.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(index[r]) + " out of range for " +
                       shape_str(table.shape()));
    }
    auto src = table.row(index[r]);
    std::copy(src.begin(), src.end(), out.begin() + static_cast<std::ptrdiff_t>(r * c));
  }
  return Tensor({index.size(), c}, std::move(out));
}

Tensor row_sum(const Tensor& m) {
  require_matrix(m, "row_sum");
  std::vector<double> out(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (double v : m.row(r)) out[r] += v;
  return Tensor({m.rows()}, std::move(out));
}

double sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return s;
}

double mean(const Tensor& a) { return sum(a) / static_cast<double>(a.size()); }

double l1(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += std::abs(v);
  return s;
}

double sqnorm(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("dot: length mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace ops
}  // namespace diffcdr
