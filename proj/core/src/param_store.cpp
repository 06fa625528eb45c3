#include "diffcdr/param_store.hpp"

#include <cmath>
#include <stdexcept>

namespace diffcdr {

void ParamStore::add(const std::string& name, Tensor init) {
  if (params_.count(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  require_finite(init, "initializer of '" + name + "'");
  auto zeros = Tensor::zeros(init.shape());
  params_.emplace(name, Entry{std::move(init), zeros, zeros, zeros});
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ParamStore::value(const std::string& name) const { return entry(name).value; }
Tensor& ParamStore::mutable_value(const std::string& name) { return entry(name).value; }
const Tensor& ParamStore::grad(const std::string& name) const { return entry(name).grad; }

void ParamStore::accumulate_grad(const std::string& name, const Tensor& g) {
  auto& e = entry(name);
  if (g.shape() != e.grad.shape()) {
    throw ShapeError("gradient for '" + name + "' has shape " + shape_str(g.shape()) + ", parameter is " +
                     shape_str(e.grad.shape()));
  }
  auto dst = e.grad.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  grads_ready_ = true;
}

void ParamStore::set_grad(const std::string& name, Tensor g) {
  auto& e = entry(name);
  if (g.shape() != e.grad.shape()) {
    throw ShapeError("gradient for '" + name + "' has shape " + shape_str(g.shape()) + ", parameter is " +
                     shape_str(e.grad.shape()));
  }
  e.grad = std::move(g);
  grads_ready_ = true;
}

void ParamStore::zero_grad() {
  for (auto& [_, e] : params_) std::fill(e.grad.data().begin(), e.grad.data().end(), 0.0);
  grads_ready_ = false;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, _] : params_) out.push_back(name);
  return out;
}

std::size_t ParamStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& [_, e] : params_) n += e.value.size();
  return n;
}

std::uint64_t ParamStore::checksum() const {
  std::uint64_t h = 0;
  for (const auto& [name, e] : params_) {
    h ^= diffcdr::checksum(e.value) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

void adam_step(ParamStore& store, const AdamConfig& cfg) {
  if (!store.grads_ready_) throw std::logic_error("adam_step: gradients missing (run backward first)");
  ++store.step_;
  const double t = static_cast<double>(store.step_);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  double gscale = 1.0;
  if (cfg.max_grad_norm > 0.0) {
    double sq = 0.0;
    for (const auto& [_, e] : store.params_)
      for (double g : e.grad.data()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > cfg.max_grad_norm) gscale = cfg.max_grad_norm / norm;
  }
  for (auto& [name, e] : store.params_) {
    auto w = e.value.data();
    auto g = e.grad.data();
    auto m = e.m.data();
    auto v = e.v.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] * gscale;
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
    require_finite(e.value, "adam update of '" + name + "'");
  }
  store.zero_grad();
}

void ema_update(ParamStore& avg, const ParamStore& src, double decay) {
  if (!(decay >= 0.0 && decay < 1.0)) throw std::invalid_argument("ema_update: decay must be in [0, 1)");
  for (const auto& name : src.names()) {
    auto a = avg.mutable_value(name).data();
    const auto s = src.value(name).data();
    if (a.size() != s.size()) throw ShapeError("ema_update: shape mismatch for '" + name + "'");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = decay * a[i] + (1.0 - decay) * s[i];
  }
}

}  // namespace diffcdr
