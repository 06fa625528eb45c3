#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "diffcdr/autodiff.hpp"
#include "diffcdr/param_store.hpp"
#include "diffcdr/rng.hpp"
#include "diffcdr/schedule.hpp"

namespace diffcdr {

/// Sinusoidal embedding of `t * time_scale`: interleaved (sin, cos) pairs at
/// frequencies 10000^(-2j/dim). `dim` must be even.
std::vector<double> time_embedding(double t, std::size_t dim = 64, double time_scale = 1000.0);

struct ScoreNetConfig {
  std::size_t k = 10;
  std::size_t hidden = 128;
  std::size_t time_dim = 64;
  double time_scale = 1000.0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

/// Conditional epsilon-predictor.
///
///   h   = x_t + time_proj(embed(t)) + mask * cond_proj(c)
///   eps = W2 silu(W1 silu(W0 h + b0) + b1) + b2
///
/// The last layer starts at zero, so an untrained network predicts 0. An
/// absent condition takes the same path with mask 0.
class ScoreNetwork {
 public:
  explicit ScoreNetwork(const ScoreNetConfig& cfg = {});

  const ScoreNetConfig& config() const { return cfg_; }
  std::size_t dim() const { return cfg_.k; }

  /// Recorded forward with gradients flowing into params(). `cond` may be
  /// null; `cond_mask` holds one 0/1 entry per row (empty means all ones).
  Var forward(Tape& tape, Var x, std::span<const double> t, const Tensor* cond,
              std::span<const double> cond_mask = {});

  /// Inference-only forward.
  Tensor predict(const Tensor& x, std::span<const double> t, const Tensor* cond) const;
  Tensor predict(const Tensor& x, double t, const Tensor* cond) const;

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

 private:
  template <class Bind>
  Var forward_impl(Tape& tape, Var x, std::span<const double> t, const Tensor* cond,
                   std::span<const double> cond_mask, Bind bind) const;

  ScoreNetConfig cfg_;
  ParamStore params_;
};

struct GuidanceConfig {
  double strength = 0.1;   // s
  double mask_prob = 0.1;  // condition dropout during training

  void validate() const;
  nlohmann::json to_json() const;
};

/// (1 - s) * eps(x, t) + s * eps(x, t | c). Algebraically equal to
/// eps_u + s (eps_c - eps_u); this form makes s = 0 and s = 1 exact.
Tensor guided_score(const ScoreNetwork& net, const Tensor& x, double t, const Tensor& cond, double s);

enum class DimLossNorm { kL2Squared, kL1 };

/// Per-sample randomness of one DIM training batch.
struct DimNoiseDraw {
  std::vector<double> t;
  Tensor eps;
  std::vector<double> mask;  // 1 keeps the condition, 0 drops it
};

DimNoiseDraw draw_dim_noise(std::size_t batch, std::size_t k, const NoiseSchedule& schedule, double mask_prob,
                            Rng& rng);

/// mean over the batch of ||eps - eps_theta(x_t, t | c or none)||^2 (or L1).
Var dim_loss(Tape& tape, ScoreNetwork& net, const Tensor& x0, const Tensor& cond, const NoiseSchedule& schedule,
             const DimNoiseDraw& draw, DimLossNorm norm = DimLossNorm::kL2Squared);

Var dim_loss(Tape& tape, ScoreNetwork& net, const Tensor& x0, const Tensor& cond, const NoiseSchedule& schedule,
             double mask_prob, Rng& rng, DimLossNorm norm = DimLossNorm::kL2Squared);

}  // namespace diffcdr
