#include "diffcdr/score_network.hpp"

#include <cmath>
#include <stdexcept>

namespace diffcdr {

std::vector<double> time_embedding(double t, std::size_t dim, double time_scale) {
  if (dim == 0 || dim % 2 != 0) throw std::invalid_argument("time_embedding: dim must be even and positive");
  std::vector<double> out(dim);
  const double x = t * time_scale;
  const double half = static_cast<double>(dim);
  for (std::size_t j = 0; j < dim / 2; ++j) {
    const double omega = std::pow(10000.0, -2.0 * static_cast<double>(j) / half);
    out[2 * j] = std::sin(x * omega);
    out[2 * j + 1] = std::cos(x * omega);
  }
  return out;
}

nlohmann::json ScoreNetConfig::to_json() const {
  return {{"k", k}, {"hidden", hidden}, {"time_dim", time_dim}, {"time_scale", time_scale}, {"seed", seed}};
}

ScoreNetwork::ScoreNetwork(const ScoreNetConfig& cfg) : cfg_(cfg) {
  if (cfg.k == 0 || cfg.hidden == 0) throw std::invalid_argument("ScoreNetwork: dimensions must be positive");
  if (cfg.time_dim % 2 != 0) throw std::invalid_argument("ScoreNetwork: time_dim must be even");
  Rng rng = Rng(cfg.seed).split("score_init");
  auto uniform = [&rng](Shape shape, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& x : t.data()) x = rng.uniform(-bound, bound);
    return t;
  };
  const auto k = cfg.k, h = cfg.hidden, td = cfg.time_dim;
  params_.add("time_proj.w", uniform({td, k}, td));
  params_.add("time_proj.b", uniform({k}, td));
  params_.add("cond_proj.w", uniform({k, k}, k));
  params_.add("cond_proj.b", uniform({k}, k));
  params_.add("mlp.0.w", uniform({k, h}, k));
  params_.add("mlp.0.b", uniform({h}, k));
  params_.add("mlp.1.w", uniform({h, h}, h));
  params_.add("mlp.1.b", uniform({h}, h));
  params_.add("mlp.2.w", Tensor::zeros({h, k}));
  params_.add("mlp.2.b", Tensor::zeros({k}));
}

template <class Bind>
Var ScoreNetwork::forward_impl(Tape& tape, Var x, std::span<const double> t, const Tensor* cond,
                               std::span<const double> cond_mask, Bind bind) const {
  const auto& xv = x.value();
  if (xv.rank() != 2 || xv.cols() != cfg_.k) {
    throw ShapeError("score_forward: x must be [Bx" + std::to_string(cfg_.k) + "], got " + shape_str(xv.shape()));
  }
  const auto batch = xv.rows();
  if (t.size() != batch) {
    throw ShapeError("score_forward: " + std::to_string(t.size()) + " times for batch of " + std::to_string(batch));
  }
  if (cond && cond->shape() != xv.shape()) {
    throw ShapeError("score_forward: condition " + shape_str(cond->shape()) + " vs x " + shape_str(xv.shape()));
  }
  if (!cond_mask.empty() && cond_mask.size() != batch) {
    throw ShapeError("score_forward: mask length " + std::to_string(cond_mask.size()) + " for batch of " +
                     std::to_string(batch));
  }

  std::vector<double> temb;
  temb.reserve(batch * cfg_.time_dim);
  std::vector<double> e;
  for (std::size_t r = 0; r < batch; ++r) {
    if (r == 0 || t[r] != t[r - 1]) e = time_embedding(t[r], cfg_.time_dim, cfg_.time_scale);
    temb.insert(temb.end(), e.begin(), e.end());
  }
  auto time_feat = add_row(matmul(tape.constant(Tensor({batch, cfg_.time_dim}, std::move(temb))), bind("time_proj.w")),
                           bind("time_proj.b"));

  // Absent and masked conditions share this path: zero input, zero mask.
  Tensor c = cond ? *cond : Tensor::zeros(xv.shape());
  Tensor mask = Tensor::zeros(xv.shape());
  for (std::size_t r = 0; r < batch; ++r) {
    const double m = cond ? (cond_mask.empty() ? 1.0 : cond_mask[r]) : 0.0;
    for (std::size_t j = 0; j < cfg_.k; ++j) mask(r, j) = m;
  }
  auto cond_feat = mul(add_row(matmul(tape.constant(std::move(c)), bind("cond_proj.w")), bind("cond_proj.b")),
                       tape.constant(std::move(mask)));

  auto h = add(add(x, time_feat), cond_feat);
  h = silu(add_row(matmul(h, bind("mlp.0.w")), bind("mlp.0.b")));
  h = silu(add_row(matmul(h, bind("mlp.1.w")), bind("mlp.1.b")));
  return add_row(matmul(h, bind("mlp.2.w")), bind("mlp.2.b"));
}

Var ScoreNetwork::forward(Tape& tape, Var x, std::span<const double> t, const Tensor* cond,
                          std::span<const double> cond_mask) {
  return forward_impl(tape, x, t, cond, cond_mask,
                      [this, &tape](const char* name) { return tape.param(params_, name); });
}

Tensor ScoreNetwork::predict(const Tensor& x, std::span<const double> t, const Tensor* cond) const {
  Tape tape;
  auto out = forward_impl(tape, tape.input(x), t, cond, {},
                          [this, &tape](const char* name) { return tape.input(params_.value(name)); });
  return out.value();
}

Tensor ScoreNetwork::predict(const Tensor& x, double t, const Tensor* cond) const {
  std::vector<double> ts(x.rank() == 2 ? x.rows() : 1, t);
  return predict(x, ts, cond);
}

void GuidanceConfig::validate() const {
  if (!(strength >= 0.0)) throw std::invalid_argument("guidance strength must be >= 0");
  if (!(mask_prob >= 0.0 && mask_prob <= 1.0)) throw std::invalid_argument("mask_prob must lie in [0,1]");
}

nlohmann::json GuidanceConfig::to_json() const { return {{"strength", strength}, {"mask_prob", mask_prob}}; }

Tensor guided_score(const ScoreNetwork& net, const Tensor& x, double t, const Tensor& cond, double s) {
  const auto uncond = net.predict(x, t, nullptr);
  const auto conditional = net.predict(x, t, &cond);
  Tensor out = uncond;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - s) * uncond[i] + s * conditional[i];
  require_finite(out, "guided_score");
  return out;
}

DimNoiseDraw draw_dim_noise(std::size_t batch, std::size_t k, const NoiseSchedule& schedule, double mask_prob,
                            Rng& rng) {
  DimNoiseDraw d;
  d.t.resize(batch);
  d.mask.resize(batch);
  std::vector<double> eps(batch * k);
  for (std::size_t r = 0; r < batch; ++r) {
    d.t[r] = rng.uniform(schedule.t_eps(), 1.0);
    for (std::size_t j = 0; j < k; ++j) eps[r * k + j] = rng.normal();
    d.mask[r] = rng.bernoulli(mask_prob) ? 0.0 : 1.0;
  }
  d.eps = Tensor({batch, k}, std::move(eps));
  return d;
}

Var dim_loss(Tape& tape, ScoreNetwork& net, const Tensor& x0, const Tensor& cond, const NoiseSchedule& schedule,
             const DimNoiseDraw& draw, DimLossNorm norm) {
  if (x0.rank() != 2 || x0.rows() == 0) throw std::invalid_argument("dim_loss: empty batch");
  if (draw.eps.shape() != x0.shape()) {
    throw ShapeError("dim_loss: noise " + shape_str(draw.eps.shape()) + " vs x0 " + shape_str(x0.shape()));
  }
  auto xt = tape.constant(q_sample(schedule, x0, draw.t, draw.eps));
  auto pred = net.forward(tape, xt, draw.t, &cond, draw.mask);
  auto resid = sub(tape.input(draw.eps), pred);
  const double inv_b = 1.0 / static_cast<double>(x0.rows());
  return scale(norm == DimLossNorm::kL1 ? l1(resid) : sqnorm(resid), inv_b);
}

Var dim_loss(Tape& tape, ScoreNetwork& net, const Tensor& x0, const Tensor& cond, const NoiseSchedule& schedule,
             double mask_prob, Rng& rng, DimLossNorm norm) {
  if (x0.rank() != 2 || x0.rows() == 0) throw std::invalid_argument("dim_loss: empty batch");
  // The draw must outlive the tape's reference to eps; keep it in a constant.
  auto draw = draw_dim_noise(x0.rows(), x0.cols(), schedule, mask_prob, rng);
  auto xt = tape.constant(q_sample(schedule, x0, draw.t, draw.eps));
  auto pred = net.forward(tape, xt, draw.t, &cond, draw.mask);
  auto resid = sub(tape.constant(std::move(draw.eps)), pred);
  const double inv_b = 1.0 / static_cast<double>(x0.rows());
  return scale(norm == DimLossNorm::kL1 ? l1(resid) : sqnorm(resid), inv_b);
}

}  // namespace diffcdr
