#include "diffcdr/samplers.hpp"

#include <cmath>
#include <stdexcept>

namespace diffcdr {

InitMode parse_init_mode(const std::string& s) {
  if (s == "gaussian") return InitMode::kGaussian;
  if (s == "source_embedding") return InitMode::kSourceEmbedding;
  throw std::invalid_argument("init_mode must be gaussian|source_embedding, got '" + s + "'");
}

std::string to_string(InitMode m) { return m == InitMode::kGaussian ? "gaussian" : "source_embedding"; }

void SolverConfig::validate() const {
  if (nfe < 1) throw std::invalid_argument("solver.nfe must be >= 1");
  if (!(t_end < t_start)) throw std::invalid_argument("solver.t_end must be below t_start");
  if (!(t_end > 0.0 && t_start <= 1.0)) throw std::invalid_argument("solver times must lie in (0,1]");
}

nlohmann::json SolverConfig::to_json() const {
  return {{"nfe", nfe},
          {"t_start", t_start},
          {"t_end", t_end},
          {"grid", "uniform_lambda"},
          {"init_mode", to_string(init_mode)},
          {"init_scaled", false}};
}

std::vector<double> build_time_grid(const SolverConfig& cfg, const NoiseSchedule& schedule) {
  cfg.validate();
  const double l0 = schedule.lambda(cfg.t_start);
  const double l1 = schedule.lambda(cfg.t_end);
  std::vector<double> grid(cfg.nfe + 1);
  grid.front() = cfg.t_start;
  grid.back() = cfg.t_end;
  for (std::size_t i = 1; i < cfg.nfe; ++i) {
    const double lam = l0 + (l1 - l0) * static_cast<double>(i) / static_cast<double>(cfg.nfe);
    grid[i] = schedule.t_from_lambda(lam);
  }
  return grid;
}

Tensor dpm_solver1(const EpsilonFn& eps, const NoiseSchedule& schedule, const SolverConfig& cfg,
                   const Tensor& x_init, const StepObserver& observer) {
  const auto grid = build_time_grid(cfg, schedule);
  Tensor x = x_init;
  require_finite(x, "dpm_solver1 initial state");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double s = grid[i - 1], t = grid[i];
    const double ratio = schedule.alpha(t) / schedule.alpha(s);
    const double h = schedule.lambda(t) - schedule.lambda(s);
    const double coef = schedule.sigma(t) * std::expm1(h);
    const Tensor e = eps(x, s);
    if (e.shape() != x.shape()) throw ShapeError("dpm_solver1: epsilon shape " + shape_str(e.shape()));
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = ratio * x[j] - coef * e[j];
    if (!x.all_finite()) throw NonFiniteError("dpm_solver1: non-finite state at step " + std::to_string(i));
    if (observer) observer(i, x);
  }
  // Remove the residual sigma(t_end) noise with one more evaluation.
  const double a = schedule.alpha(cfg.t_end);
  const double sg = schedule.sigma(cfg.t_end);
  const Tensor e = eps(x, cfg.t_end);
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = (x[j] - sg * e[j]) / a;
  if (!x.all_finite()) throw NonFiniteError("dpm_solver1: non-finite state at final denoise step");
  return x;
}

EpsilonFn make_epsilon_fn(const ScoreNetwork& net, const Tensor* cond, double guidance) {
  if (cond) {
    return [&net, cond, guidance](const Tensor& x, double t) { return guided_score(net, x, t, *cond, guidance); };
  }
  return [&net](const Tensor& x, double t) { return net.predict(x, t, nullptr); };
}

Tensor dpm_solver1(const ScoreNetwork& net, const NoiseSchedule& schedule, const SolverConfig& cfg,
                   const Tensor* cond, double guidance, const Tensor& x_init) {
  return dpm_solver1(make_epsilon_fn(net, cond, guidance), schedule, cfg, x_init);
}

Tensor solver_init(const SolverConfig& cfg, const Tensor& source_embeddings, Rng& rng) {
  if (cfg.init_mode == InitMode::kSourceEmbedding) return source_embeddings;
  return rng.normal_tensor(source_embeddings.shape());
}

Tensor ddpm_ancestral(const EpsilonFn& eps, const NoiseSchedule& schedule, const AncestralConfig& cfg,
                      std::size_t rows, std::size_t dim, Rng& rng) {
  if (cfg.num_steps < 1) throw std::invalid_argument("ancestral: num_steps must be >= 1");
  const auto n = static_cast<double>(cfg.num_steps);
  Tensor x = rng.normal_tensor({rows, dim});
  for (std::size_t i = cfg.num_steps; i >= 1; --i) {
    const double ti = static_cast<double>(i) / n;
    const double tprev = static_cast<double>(i - 1) / n;
    const double alpha_i = std::exp(2.0 * (schedule.log_alpha(ti) - schedule.log_alpha(tprev)));
    const double beta_i = -std::expm1(2.0 * (schedule.log_alpha(ti) - schedule.log_alpha(tprev)));
    const double sigma_cum = schedule.sigma(ti);
    const Tensor e = eps(x, ti);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha_i);
    const double eps_coef = beta_i / sigma_cum;
    const double noise_scale = i > 1 ? std::sqrt(beta_i) : 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double mu = inv_sqrt_alpha * (x[j] - eps_coef * e[j]);
      x[j] = i > 1 ? mu + noise_scale * rng.normal() : mu;
    }
    if (!x.all_finite()) throw NonFiniteError("ddpm_ancestral: non-finite state at step " + std::to_string(i));
  }
  return x;
}

}  // namespace diffcdr
