#include "diffcdr/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace diffcdr {

const Tensor& Var::value() const { return tape_->value(*this); }

Var Tape::push(Tensor value, std::vector<std::size_t> parents, Backward backward, const char* op) {
  require_finite(value, op);
  Node n;
  n.owned = std::move(value);
  n.parents = std::move(parents);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) { return push(std::move(value), {}, nullptr, "constant"); }

Var Tape::input(const Tensor& value) {
  require_finite(value, "input");
  Node n;
  n.ref = &value;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(ParamStore& store, const std::string& name) {
  Node n;
  n.ref = &store.value(name);
  n.store = &store;
  n.param_name = name;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(Var v) const {
  if (v.tape_ != this) throw std::logic_error("variable belongs to a different tape");
  return nodes_.at(v.id_).value();
}

Tensor& Tape::grad_of(std::size_t id) {
  if (!has_grad_[id]) {
    grads_[id] = Tensor::zeros(nodes_[id].value().shape());
    has_grad_[id] = true;
  }
  return grads_[id];
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  auto& dst = grad_of(id);
  if (dst.shape() != g.shape()) {
    throw ShapeError("gradient shape " + shape_str(g.shape()) + " does not match value " + shape_str(dst.shape()));
  }
  auto d = dst.data();
  auto s = g.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

void Tape::backward(Var loss) {
  if (loss.tape_ != this) throw std::logic_error("loss belongs to a different tape");
  const auto& lv = value(loss);
  if (!lv.is_scalar()) throw ShapeError("backward: loss must be scalar, got " + shape_str(lv.shape()));
  grads_.assign(nodes_.size(), Tensor());
  has_grad_.assign(nodes_.size(), false);
  grads_[loss.id_] = Tensor::filled(lv.shape(), 1.0);
  has_grad_[loss.id_] = true;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    if (!has_grad_[i]) continue;
    auto& n = nodes_[i];
    if (n.backward) n.backward(*this, i);
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    auto& n = nodes_[i];
    if (!n.store) continue;
    if (has_grad_[i]) {
      require_finite(grads_[i], "gradient of '" + n.param_name + "'");
      n.store->accumulate_grad(n.param_name, grads_[i]);
    } else {
      n.store->accumulate_grad(n.param_name, Tensor::zeros(n.value().shape()));
    }
  }
  grads_.clear();
  has_grad_.clear();
}

namespace {

Tape& same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw std::logic_error("operands recorded on different tapes");
  return a.tape();
}

// Reduces a gradient computed for a broadcast operand back to its shape.
Tensor unbroadcast(const Tensor& g, const Tensor& operand) {
  if (operand.shape() == g.shape()) return g;
  return Tensor::filled(operand.shape(), ops::sum(g));
}

}  // namespace

Var matmul(Var a, Var b) {
  auto& tape = same_tape(a, b);
  const auto ia = a.id(), ib = b.id();
  return tape.push(ops::matmul(a.value(), b.value()), {ia, ib},
                   [ia, ib](Tape& t, std::size_t self) {
                     const auto& g = t.grads_[self];
                     const auto& av = t.nodes_[ia].value();
                     const auto& bv = t.nodes_[ib].value();
                     t.accumulate(ia, ops::matmul_nt(g, bv));
                     t.accumulate(ib, ops::matmul_tn(av, g));
                   },
                   "matmul");
}

Var add(Var a, Var b) {
  auto& tape = same_tape(a, b);
  const auto ia = a.id(), ib = b.id();
  return tape.push(ops::add(a.value(), b.value()), {ia, ib},
                   [ia, ib](Tape& t, std::size_t self) {
                     const Tensor g = t.grads_[self];
                     t.accumulate(ia, unbroadcast(g, t.nodes_[ia].value()));
                     t.accumulate(ib, unbroadcast(g, t.nodes_[ib].value()));
                   },
                   "add");
}

Var sub(Var a, Var b) {
  auto& tape = same_tape(a, b);
  const auto ia = a.id(), ib = b.id();
  return tape.push(ops::sub(a.value(), b.value()), {ia, ib},
                   [ia, ib](Tape& t, std::size_t self) {
                     const Tensor g = t.grads_[self];
                     t.accumulate(ia, unbroadcast(g, t.nodes_[ia].value()));
                     t.accumulate(ib, unbroadcast(ops::scale(g, -1.0), t.nodes_[ib].value()));
                   },
                   "sub");
}

Var mul(Var a, Var b) {
  auto& tape = same_tape(a, b);
  const auto ia = a.id(), ib = b.id();
  return tape.push(ops::mul(a.value(), b.value()), {ia, ib},
                   [ia, ib](Tape& t, std::size_t self) {
                     const Tensor g = t.grads_[self];
                     const auto& av = t.nodes_[ia].value();
                     const auto& bv = t.nodes_[ib].value();
                     t.accumulate(ia, unbroadcast(ops::mul(g, bv), av));
                     t.accumulate(ib, unbroadcast(ops::mul(g, av), bv));
                   },
                   "mul");
}

Var scale(Var a, double s) {
  const auto ia = a.id();
  return a.tape().push(ops::scale(a.value(), s), {ia},
                       [ia, s](Tape& t, std::size_t self) { t.accumulate(ia, ops::scale(t.grads_[self], s)); },
                       "scale");
}

Var silu(Var a) {
  const auto ia = a.id();
  return a.tape().push(ops::silu(a.value()), {ia},
                       [ia](Tape& t, std::size_t self) {
                         const auto& x = t.nodes_[ia].value();
                         const auto& g = t.grads_[self];
                         std::vector<double> d(x.size());
                         for (std::size_t i = 0; i < x.size(); ++i) {
                           const double s = 1.0 / (1.0 + std::exp(-x[i]));
                           d[i] = g[i] * s * (1.0 + x[i] * (1.0 - s));
                         }
                         t.accumulate(ia, Tensor(x.shape(), std::move(d)));
                       },
                       "silu");
}

Var add_row(Var m, Var bias) {
  auto& tape = same_tape(m, bias);
  const auto im = m.id(), ib = bias.id();
  return tape.push(ops::add_row(m.value(), bias.value()), {im, ib},
                   [im, ib](Tape& t, std::size_t self) {
                     const Tensor g = t.grads_[self];
                     t.accumulate(im, g);
                     std::vector<double> db(g.cols(), 0.0);
                     for (std::size_t r = 0; r < g.rows(); ++r)
                       for (std::size_t j = 0; j < g.cols(); ++j) db[j] += g(r, j);
                     t.accumulate(ib, Tensor::vector(std::move(db)));
                   },
                   "add_row");
}

Var gather_rows(Var table, std::vector<std::size_t> index) {
  const auto it = table.id();
  auto out = ops::gather_rows(table.value(), index);
  return table.tape().push(std::move(out), {it},
                           [it, index = std::move(index)](Tape& t, std::size_t self) {
                             const auto& g = t.grads_[self];
                             auto& dst = t.grad_of(it);
                             const auto c = dst.cols();
                             for (std::size_t r = 0; r < index.size(); ++r) {
                               auto drow = dst.row(index[r]);
                               for (std::size_t j = 0; j < c; ++j) drow[j] += g(r, j);
                             }
                           },
                           "gather_rows");
}

Var row_sum(Var m) {
  const auto im = m.id();
  return m.tape().push(ops::row_sum(m.value()), {im},
                       [im](Tape& t, std::size_t self) {
                         const auto& g = t.grads_[self];
                         const auto& x = t.nodes_[im].value();
                         Tensor d = Tensor::zeros(x.shape());
                         for (std::size_t r = 0; r < x.rows(); ++r)
                           for (std::size_t j = 0; j < x.cols(); ++j) d(r, j) = g[r];
                         t.accumulate(im, d);
                       },
                       "row_sum");
}

Var sum(Var a) {
  const auto ia = a.id();
  return a.tape().push(Tensor::scalar(ops::sum(a.value())), {ia},
                       [ia](Tape& t, std::size_t self) {
                         t.accumulate(ia, Tensor::filled(t.nodes_[ia].value().shape(), t.grads_[self][0]));
                       },
                       "sum");
}

Var mean(Var a) {
  const auto ia = a.id();
  return a.tape().push(Tensor::scalar(ops::mean(a.value())), {ia},
                       [ia](Tape& t, std::size_t self) {
                         const auto& x = t.nodes_[ia].value();
                         t.accumulate(ia, Tensor::filled(x.shape(), t.grads_[self][0] / static_cast<double>(x.size())));
                       },
                       "mean");
}

Var l1(Var a) {
  const auto ia = a.id();
  return a.tape().push(Tensor::scalar(ops::l1(a.value())), {ia},
                       [ia](Tape& t, std::size_t self) {
                         const auto& x = t.nodes_[ia].value();
                         const double g = t.grads_[self][0];
                         std::vector<double> d(x.size());
                         // Subgradient 0 at the kink.
                         for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] > 0 ? g : (x[i] < 0 ? -g : 0.0);
                         t.accumulate(ia, Tensor(x.shape(), std::move(d)));
                       },
                       "l1");
}

Var sqnorm(Var a) {
  const auto ia = a.id();
  return a.tape().push(Tensor::scalar(ops::sqnorm(a.value())), {ia},
                       [ia](Tape& t, std::size_t self) {
                         const auto& x = t.nodes_[ia].value();
                         t.accumulate(ia, ops::scale(x, 2.0 * t.grads_[self][0]));
                       },
                       "sqnorm");
}

}  // namespace diffcdr
