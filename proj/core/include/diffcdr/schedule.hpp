#pragma once

#include <nlohmann/json.hpp>

#include "diffcdr/tensor.hpp"

namespace diffcdr {

struct ScheduleValues {
  double alpha;   // signal scale, alpha_bar(t)
  double sigma;   // noise scale
  double lambda;  // log-SNR, log(alpha / sigma)
};

/// Continuous-time variance-preserving noise schedule with a linear beta(t):
///
///   log alpha(t) = -t^2 (beta_max - beta_min) / 4 - t beta_min / 2
///   sigma(t)     = sqrt(1 - alpha(t)^2)
///   lambda(t)    = log alpha(t) - log sigma(t)
///
/// At t = 0 sigma is 0 and lambda is reported as the largest finite double.
class NoiseSchedule {
 public:
  static constexpr double kDefaultTEps = 1e-3;

  explicit NoiseSchedule(double beta_min = 0.1, double beta_max = 20.0, double t_eps = kDefaultTEps);

  double beta_min() const { return beta_min_; }
  double beta_max() const { return beta_max_; }
  double t_eps() const { return t_eps_; }

  double log_alpha(double t) const;
  double alpha(double t) const;
  double sigma(double t) const;
  double lambda(double t) const;
  ScheduleValues values(double t) const;

  /// d log alpha / dt
  double drift(double t) const;
  /// g^2(t) = d sigma^2/dt - 2 (d log alpha/dt) sigma^2, which equals beta(t).
  double diffusion_sq(double t) const;

  /// Inverse of lambda on [0,1] by bisection (tolerance 1e-10 in t).
  double t_from_lambda(double lambda) const;

  nlohmann::json to_json() const;

 private:
  void check_t(double t) const;

  double beta_min_;
  double beta_max_;
  double t_eps_;
};

/// x_t = alpha(t) x0 + sigma(t) eps, applied row-wise with one t per row.
Tensor q_sample(const NoiseSchedule& schedule, const Tensor& x0, std::span<const double> t, const Tensor& eps);
Tensor q_sample(const NoiseSchedule& schedule, const Tensor& x0, double t, const Tensor& eps);

}  // namespace diffcdr
