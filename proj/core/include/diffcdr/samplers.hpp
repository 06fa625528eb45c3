#pragma once

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "diffcdr/rng.hpp"
#include "diffcdr/schedule.hpp"
#include "diffcdr/score_network.hpp"

namespace diffcdr {

/// Noise predictor evaluated on a batch at a shared time t.
using EpsilonFn = std::function<Tensor(const Tensor& x, double t)>;

enum class InitMode { kGaussian, kSourceEmbedding };

InitMode parse_init_mode(const std::string& s);
std::string to_string(InitMode m);

struct SolverConfig {
  std::size_t nfe = 30;
  double t_start = 1.0;
  double t_end = 1e-3;
  InitMode init_mode = InitMode::kSourceEmbedding;

  void validate() const;
  nlohmann::json to_json() const;
};

/// t_0 = t_start > t_1 > ... > t_M = t_end with M = nfe and lambda(t_i)
/// uniformly spaced.
std::vector<double> build_time_grid(const SolverConfig& cfg, const NoiseSchedule& schedule);

/// Called after each solver step with the step index (1-based) and the new state.
using StepObserver = std::function<void(std::size_t step, const Tensor& state)>;

/// First-order DPM-Solver over the diffusion ODE, followed by a final
/// denoise-to-data step x0 = (x - sigma eps) / alpha at t_end.
Tensor dpm_solver1(const EpsilonFn& eps, const NoiseSchedule& schedule, const SolverConfig& cfg,
                   const Tensor& x_init, const StepObserver& observer = {});

/// Network-driven solver call: guided score when `cond` is present, plain
/// unconditional score otherwise.
Tensor dpm_solver1(const ScoreNetwork& net, const NoiseSchedule& schedule, const SolverConfig& cfg,
                   const Tensor* cond, double guidance, const Tensor& x_init);

/// Starting state for `rows` samples: the source embeddings themselves, or a
/// standard normal draw.
Tensor solver_init(const SolverConfig& cfg, const Tensor& source_embeddings, Rng& rng);

struct AncestralConfig {
  std::size_t num_steps = 1000;
};

/// Discrete ancestral sampling on the grid t_i = i/N with per-step
/// alpha_i = (alpha(t_i) / alpha(t_{i-1}))^2 and variance 1 - alpha_i.
Tensor ddpm_ancestral(const EpsilonFn& eps, const NoiseSchedule& schedule, const AncestralConfig& cfg,
                      std::size_t rows, std::size_t dim, Rng& rng);

/// Wraps a network (and optional guidance) as an EpsilonFn.
EpsilonFn make_epsilon_fn(const ScoreNetwork& net, const Tensor* cond, double guidance);

}  // namespace diffcdr
