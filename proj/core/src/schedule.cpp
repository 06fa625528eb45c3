#include "diffcdr/schedule.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace diffcdr {

NoiseSchedule::NoiseSchedule(double beta_min, double beta_max, double t_eps)
    : beta_min_(beta_min), beta_max_(beta_max), t_eps_(t_eps) {
  if (!(beta_min > 0.0 && beta_max > beta_min)) throw std::invalid_argument("schedule: need 0 < beta_min < beta_max");
  if (!(t_eps > 0.0 && t_eps < 1.0)) throw std::invalid_argument("schedule: t_eps must lie in (0,1)");
}

void NoiseSchedule::check_t(double t) const {
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("schedule: t=" + std::to_string(t) + " outside [0,1]");
}

double NoiseSchedule::log_alpha(double t) const {
  check_t(t);
  return -0.25 * t * t * (beta_max_ - beta_min_) - 0.5 * t * beta_min_;
}

double NoiseSchedule::alpha(double t) const { return std::exp(log_alpha(t)); }

double NoiseSchedule::sigma(double t) const {
  // 1 - alpha^2 = -expm1(2 log alpha), accurate near t = 0.
  return std::sqrt(-std::expm1(2.0 * log_alpha(t)));
}

double NoiseSchedule::lambda(double t) const {
  const double la = log_alpha(t);
  const double var = -std::expm1(2.0 * la);
  if (var <= 0.0) return std::numeric_limits<double>::max();
  return la - 0.5 * std::log(var);
}

ScheduleValues NoiseSchedule::values(double t) const { return {alpha(t), sigma(t), lambda(t)}; }

double NoiseSchedule::drift(double t) const {
  check_t(t);
  return -0.5 * t * (beta_max_ - beta_min_) - 0.5 * beta_min_;
}

double NoiseSchedule::diffusion_sq(double t) const {
  const double f = drift(t);
  const double a2 = std::exp(2.0 * log_alpha(t));
  const double s2 = -std::expm1(2.0 * log_alpha(t));
  const double dsigma2 = -2.0 * f * a2;
  return dsigma2 - 2.0 * f * s2;
}

double NoiseSchedule::t_from_lambda(double target) const {
  double lo = 0.0, hi = 1.0;
  if (!std::isfinite(target) || target < lambda(1.0)) {
    throw std::domain_error("schedule: lambda=" + std::to_string(target) + " outside the schedule's range");
  }
  // lambda is strictly decreasing in t.
  for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (lambda(mid) > target) lo = mid;
    else hi = mid;
  }
  if (hi - lo > 1e-10) throw std::runtime_error("schedule: lambda inversion did not converge");
  return 0.5 * (lo + hi);
}

nlohmann::json NoiseSchedule::to_json() const {
  return {{"type", "vp_linear"}, {"beta_min", beta_min_}, {"beta_max", beta_max_}, {"t_eps", t_eps_}};
}

Tensor q_sample(const NoiseSchedule& schedule, const Tensor& x0, std::span<const double> t, const Tensor& eps) {
  if (x0.shape() != eps.shape()) {
    throw ShapeError("q_sample: x0 " + shape_str(x0.shape()) + " vs eps " + shape_str(eps.shape()));
  }
  if (t.size() != x0.rows()) {
    throw ShapeError("q_sample: " + std::to_string(t.size()) + " times for " + std::to_string(x0.rows()) + " rows");
  }
  Tensor out = x0;
  const auto c = x0.cols();
  for (std::size_t r = 0; r < x0.rows(); ++r) {
    const double a = schedule.alpha(t[r]);
    const double s = schedule.sigma(t[r]);
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] = a * x0[r * c + j] + s * eps[r * c + j];
  }
  return out;
}

Tensor q_sample(const NoiseSchedule& schedule, const Tensor& x0, double t, const Tensor& eps) {
  std::vector<double> ts(x0.rows(), t);
  return q_sample(schedule, x0, ts, eps);
}

}  // namespace diffcdr
