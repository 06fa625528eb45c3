#include "diffcdr/alignment.hpp"

#include <stdexcept>

namespace diffcdr {

AlmLayer::AlmLayer(std::size_t k) : k_(k) {
  if (k == 0) throw std::invalid_argument("AlmLayer: k must be positive");
  params_.add("alm.w", Tensor::identity(k));
}

Var AlmLayer::forward(Tape& tape, Var u_hat) {
  const auto& v = u_hat.value();
  if (v.rank() != 2 || v.cols() != k_) {
    throw ShapeError("alm_forward: expected [Bx" + std::to_string(k_) + "], got " + shape_str(v.shape()));
  }
  return matmul(u_hat, tape.param(params_, "alm.w"));
}

Tensor AlmLayer::apply(const Tensor& u_hat) const {
  if (u_hat.rank() == 1) {
    if (u_hat.size() != k_) throw ShapeError("alm_forward: expected length " + std::to_string(k_));
    auto row = ops::matmul(Tensor::matrix(1, k_, u_hat.values()), weight());
    return Tensor::vector(row.values());
  }
  if (u_hat.rank() != 2 || u_hat.cols() != k_) {
    throw ShapeError("alm_forward: expected [Bx" + std::to_string(k_) + "], got " + shape_str(u_hat.shape()));
  }
  return ops::matmul(u_hat, weight());
}

void AlmLayer::set_weight(Tensor w) {
  if (w.shape() != Shape{k_, k_}) throw ShapeError("AlmLayer::set_weight: got " + shape_str(w.shape()));
  params_.mutable_value("alm.w") = std::move(w);
}

void LossWeights::validate() const {
  if (!(lambda_task >= 0.0)) throw std::invalid_argument("lambda_task must be >= 0");
  if (norm_order != 1 && norm_order != 2) throw std::invalid_argument("norm_order must be 1 or 2");
}

nlohmann::json LossWeights::to_json() const { return {{"lambda_task", lambda_task}, {"norm_order", norm_order}}; }

Var alm_loss(Var aligned, const Tensor& u_true, int norm_order) {
  const auto& a = aligned.value();
  if (a.rank() != 2 || a.rows() == 0) throw std::invalid_argument("alm_loss: empty batch");
  if (a.shape() != u_true.shape()) {
    throw ShapeError("alm_loss: aligned " + shape_str(a.shape()) + " vs target " + shape_str(u_true.shape()));
  }
  auto resid = sub(aligned, aligned.tape().constant(u_true));
  const double inv_b = 1.0 / static_cast<double>(a.rows());
  switch (norm_order) {
    case 1: return scale(l1(resid), inv_b);
    case 2: return scale(sqnorm(resid), inv_b);
    default: throw std::invalid_argument("alm_loss: norm_order must be 1 or 2");
  }
}

Var task_loss(Var aligned, Var items, const std::vector<TaskRating>& ratings) {
  if (ratings.empty()) throw std::invalid_argument("task_loss: empty batch");
  std::vector<std::size_t> rows, cols;
  std::vector<double> r;
  rows.reserve(ratings.size());
  cols.reserve(ratings.size());
  r.reserve(ratings.size());
  for (const auto& t : ratings) {
    rows.push_back(t.row);
    cols.push_back(t.item);
    r.push_back(t.rating);
  }
  auto& tape = aligned.tape();
  auto pred = row_sum(mul(gather_rows(aligned, std::move(rows)), gather_rows(items, std::move(cols))));
  auto resid = sub(tape.constant(Tensor::vector(std::move(r))), pred);
  return scale(sqnorm(resid), 1.0 / static_cast<double>(ratings.size()));
}

Var combined_loss(Var alm, Var task, double lambda_task) { return add(alm, scale(task, lambda_task)); }

double predict_rating_cdr(const AlmLayer& layer, std::span<const double> u_hat, std::span<const double> v) {
  if (u_hat.size() != layer.dim() || v.size() != layer.dim()) {
    throw ShapeError("predict_rating_cdr: expected vectors of length " + std::to_string(layer.dim()));
  }
  auto aligned = layer.apply(Tensor::vector({u_hat.begin(), u_hat.end()}));
  return ops::dot(aligned.data(), v);
}

}  // namespace diffcdr
