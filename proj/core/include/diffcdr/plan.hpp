#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "diffcdr/alignment.hpp"
#include "diffcdr/base_models.hpp"
#include "diffcdr/data.hpp"
#include "diffcdr/metrics.hpp"
#include "diffcdr/samplers.hpp"
#include "diffcdr/schedule.hpp"
#include "diffcdr/score_network.hpp"

namespace diffcdr {

/// Invalid plan document; key_path() names the offending entry ("cdr.epochs").
class PlanError : public std::runtime_error {
 public:
  PlanError(std::string key_path, const std::string& msg)
      : std::runtime_error(key_path + ": " + msg), key_path_(std::move(key_path)) {}
  const std::string& key_path() const { return key_path_; }

 private:
  std::string key_path_;
};

enum class Variant { kDAT, kDA, kAT };

Variant parse_variant(const std::string& s);
std::string to_string(Variant v);

struct DataPaths {
  std::string source_csv;
  std::string target_csv;
  std::string source_tag = "src";
  std::string target_tag = "tgt";
};

struct ScheduleConfig {
  double beta_min = 0.1;
  double beta_max = 20.0;
  double t_eps = NoiseSchedule::kDefaultTEps;

  NoiseSchedule make() const { return NoiseSchedule(beta_min, beta_max, t_eps); }
};

struct CdrTrainConfig {
  std::size_t epochs = 100;
  double lr = 1e-3;
  std::size_t batch_size = 64;
  std::size_t patience = 10;
  // Sampling weights track an exponential average of the DIM weights; 0 samples
  // with the raw weights.
  double ema_decay = 0.99;
  // Early DIM outputs are large (the zero-initialized score maps x_T to
  // x_T/alpha(t_start)); clipping keeps them out of the ALM Adam moments.
  double alm_max_grad_norm = 1.0;  // 0: no clipping
  DimLossNorm dim_loss_norm = DimLossNorm::kL2Squared;
};

struct WarmConfig {
  std::size_t epochs = 10;
  double lr = 1e-3;
  std::size_t batch_size = 64;
};

struct EvalConfig {
  std::size_t k = 20;
  CandidateMode candidates;
};

struct ExperimentPlan {
  DataPaths data;
  std::uint64_t seed = 0;
  Variant variant = Variant::kDAT;
  SplitSpec split;
  MfConfig base;
  ScheduleConfig schedule;
  ScoreNetConfig score_net;
  GuidanceConfig guidance;
  SolverConfig solver;
  LossWeights loss;
  bool norm_order_explicit = false;  // false: 1 for DAT/AT, 2 for DA
  CdrTrainConfig cdr;
  EmcdrConfig emcdr;
  WarmConfig warm;
  EvalConfig eval;

  void validate() const;

  /// Loss weights after variant rules: DA forces lambda_task = 0 and defaults
  /// to n = 2.
  LossWeights effective_loss() const;

  /// Deterministic per-consumer seed derived from `seed`.
  std::uint64_t derived_seed(const std::string& consumer) const;

  nlohmann::json to_json() const;
  static ExperimentPlan from_json(const nlohmann::json& doc);

  /// FNV-1a of the canonical JSON dump, hex encoded.
  std::string config_hash() const;
};

/// Applies "a.b.c=value" to `doc`. `value` is parsed as JSON when possible,
/// otherwise taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

}  // namespace diffcdr
