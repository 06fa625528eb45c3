#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "diffcdr/autodiff.hpp"
#include "diffcdr/param_store.hpp"

namespace diffcdr {

/// Bias-free k x k linear map applied to generated user embeddings.
///
/// Stored as "alm.w" in the (in x out) layout used by every layer here, so a
/// batch maps as U_hat * w; for a single column vector that is w^T u_hat.
/// Initialized to the identity.
class AlmLayer {
 public:
  explicit AlmLayer(std::size_t k = 10);

  std::size_t dim() const { return k_; }
  Var forward(Tape& tape, Var u_hat);
  Tensor apply(const Tensor& u_hat) const;

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const Tensor& weight() const { return params_.value("alm.w"); }
  void set_weight(Tensor w);

 private:
  std::size_t k_;
  ParamStore params_;
};

struct LossWeights {
  double lambda_task = 0.1;
  int norm_order = 1;  // 1: sum of absolute errors, 2: squared L2

  void validate() const;
  nlohmann::json to_json() const;
};

/// mean over users of ||aligned - u_true||_n^n.
Var alm_loss(Var aligned, const Tensor& u_true, int norm_order);

/// One observed target rating of a batch user. `row` indexes the batch.
struct TaskRating {
  std::size_t row = 0;
  std::size_t item = 0;
  double rating = 0.0;
};

/// mean over ratings of (r - aligned[row] . items[item])^2.
Var task_loss(Var aligned, Var items, const std::vector<TaskRating>& ratings);

/// alm + lambda * task
Var combined_loss(Var alm, Var task, double lambda_task);

/// (aligned u_hat) . v
double predict_rating_cdr(const AlmLayer& layer, std::span<const double> u_hat, std::span<const double> v);

}  // namespace diffcdr
