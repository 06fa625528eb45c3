#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "diffcdr/param_store.hpp"
#include "diffcdr/tensor.hpp"

namespace diffcdr {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records tensor operations for one forward pass and replays them in
/// reverse to accumulate gradients into the ParamStores that own the
/// participating parameters. A tape is single-use: build, backward, discard.
///
/// Leaves created by `input` and `param` reference external tensors, which
/// must outlive the tape.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var input(const Tensor& value);
  Var input(Tensor&&) = delete;
  Var param(ParamStore& store, const std::string& name);

  const Tensor& value(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a scalar `loss`. Parameters bound on this tape but not
  /// reached by the loss receive an explicit zero gradient.
  void backward(Var loss);

 private:
  friend Var matmul(Var a, Var b);
  friend Var add(Var a, Var b);
  friend Var sub(Var a, Var b);
  friend Var mul(Var a, Var b);
  friend Var scale(Var a, double s);
  friend Var silu(Var a);
  friend Var add_row(Var m, Var bias);
  friend Var gather_rows(Var table, std::vector<std::size_t> index);
  friend Var row_sum(Var m);
  friend Var sum(Var a);
  friend Var mean(Var a);
  friend Var l1(Var a);
  friend Var sqnorm(Var a);

  using Backward = std::function<void(Tape&, std::size_t self)>;

  struct Node {
    Tensor owned;
    const Tensor* ref = nullptr;
    std::vector<std::size_t> parents;
    Backward backward;
    ParamStore* store = nullptr;
    std::string param_name;
    const Tensor& value() const { return ref ? *ref : owned; }
  };

  Var push(Tensor value, std::vector<std::size_t> parents, Backward backward, const char* op);
  Tensor& grad_of(std::size_t id);
  void accumulate(std::size_t id, const Tensor& g);

  std::deque<Node> nodes_;  // stable references for Var::value()
  std::vector<Tensor> grads_;
  std::vector<bool> has_grad_;
};

// Recorded ops. Shape rules match diffcdr::ops; both operands must live on the
// same tape.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var silu(Var a);
Var add_row(Var m, Var bias);
Var gather_rows(Var table, std::vector<std::size_t> index);
Var row_sum(Var m);
Var sum(Var a);
Var mean(Var a);
Var l1(Var a);
Var sqnorm(Var a);

}  // namespace diffcdr
