#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "diffcdr/autodiff.hpp"
#include "diffcdr/pipeline.hpp"
#include "diffcdr/synth.hpp"

namespace diffcdr::testing {

struct GradCheck {
  double max_rel_err = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

/// Central differences (step h) against reverse-mode gradients for every
/// scalar of every parameter in `store`. `loss` must rebuild the graph from
/// the store's current values on the tape it is handed.
inline GradCheck check_gradients(ParamStore& store, const std::function<Var(Tape&)>& loss, double h = 1e-4) {
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  GradCheck out;
  for (const auto& name : store.names()) {
    const Tensor analytic = store.grad(name);
    auto& value = store.mutable_value(name);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double orig = value[i];
      auto eval = [&](double x) {
        value[i] = x;
        Tape tape;
        return loss(tape).value().item();
      };
      // Fourth-order central stencil: truncation error O(h^4) keeps the
      // oracle well below the 1e-4 tolerance at a step where roundoff is small.
      const double numeric =
          (-eval(orig + 2 * h) + 8 * eval(orig + h) - 8 * eval(orig - h) + eval(orig - 2 * h)) / (12.0 * h);
      value[i] = orig;
      const double a = analytic[i];
      // Relative error with a floor so exact zeros do not divide by zero.
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      if (rel > out.max_rel_err) {
        out.max_rel_err = rel;
        out.worst = name + "[" + std::to_string(i) + "]";
      }
      ++out.checked;
    }
  }
  store.zero_grad();
  return out;
}

/// Small synthetic two-domain problem for pipeline tests (seconds, not minutes).
struct SmallWorld {
  SynthData data;
  DomainPair pair;
  ExperimentPlan plan;
  ColdSplit split;

  explicit SmallWorld(std::uint64_t seed = 3, std::size_t users = 120) {
    SynthConfig sc;
    sc.n_users = users;
    sc.n_items_per_domain = 60;
    sc.ratings_per_user = 15;
    sc.seed = seed;
    data = synth_generate(sc);
    pair = build_domain_pair(five_core_filter(data.source_records), five_core_filter(data.target_records));
    plan.data.source_csv = "unused-src.csv";
    plan.data.target_csv = "unused-tgt.csv";
    plan.seed = seed;
    plan.split.beta = 0.5;
    plan.split.seed = seed;
    plan.base.epochs = 20;
    plan.base.batch_size = 128;
    plan.cdr.epochs = 2;
    plan.cdr.batch_size = 16;
    plan.solver.nfe = 5;
    plan.emcdr.epochs = 5;
    plan.warm.epochs = 2;
    split = split_cold_start(pair, plan.split);
  }
};

}  // namespace diffcdr::testing
