#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "diffcdr/tensor.hpp"

namespace diffcdr {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double max_grad_norm = 0.0;  // > 0: rescale the joint gradient to at most this L2 norm
};

/// Named trainable parameters with matching gradients and Adam moments.
///
/// Gradients accumulate across backward passes and are cleared by adam_step.
/// A store whose gradients were never populated since the last step refuses
/// to step.
class ParamStore {
 public:
  void add(const std::string& name, Tensor init);
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  const Tensor& value(const std::string& name) const;
  Tensor& mutable_value(const std::string& name);
  const Tensor& grad(const std::string& name) const;

  /// Adds `g` into the gradient buffer of `name` and marks gradients ready.
  void accumulate_grad(const std::string& name, const Tensor& g);
  void set_grad(const std::string& name, Tensor g);
  void zero_grad();
  bool grads_ready() const { return grads_ready_; }

  std::vector<std::string> names() const;
  std::size_t num_scalars() const;
  std::uint64_t step() const { return step_; }
  std::uint64_t checksum() const;

  friend void adam_step(ParamStore& store, const AdamConfig& cfg);

 private:
  struct Entry {
    Tensor value;
    Tensor grad;
    Tensor m;
    Tensor v;
  };
  Entry& entry(const std::string& name);
  const Entry& entry(const std::string& name) const;

  std::map<std::string, Entry> params_;
  std::uint64_t step_ = 0;
  bool grads_ready_ = false;
};

/// One bias-corrected Adam update of every parameter in `store`, then zeroes
/// the gradients. Throws std::logic_error if no gradient was populated.
void adam_step(ParamStore& store, const AdamConfig& cfg);

/// avg <- decay * avg + (1 - decay) * src, value by value. Both stores must
/// hold the same names and shapes.
void ema_update(ParamStore& avg, const ParamStore& src, double decay);

}  // namespace diffcdr
