#include "diffcdr/plan.hpp"

#include <optional>
#include <set>
#include <type_traits>

#include "diffcdr/io.hpp"
#include "diffcdr/rng.hpp"

namespace diffcdr {

using nlohmann::json;

Variant parse_variant(const std::string& s) {
  if (s == "DAT") return Variant::kDAT;
  if (s == "DA") return Variant::kDA;
  if (s == "AT") return Variant::kAT;
  throw std::invalid_argument("unknown variant '" + s + "' (expected DAT, DA or AT)");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kDAT: return "DAT";
    case Variant::kDA: return "DA";
    case Variant::kAT: return "AT";
  }
  return "?";
}

namespace {

std::string join_path(const std::string& base, const std::string& key) { return base.empty() ? key : base + "." + key; }

// Typed view of one JSON object. Every key must be consumed by get/require or
// finish() reports it as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw PlanError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!obj_.contains(key)) return;
    seen_.insert(key);
    out = convert<T>(obj_.at(key), join_path(path_, key));
  }

  template <class T>
  void require(const std::string& key, T& out) {
    if (!obj_.contains(key)) throw PlanError(join_path(path_, key), "required key missing");
    get(key, out);
  }

  std::optional<ObjectReader> child(const std::string& key) {
    if (!obj_.contains(key)) return std::nullopt;
    seen_.insert(key);
    return ObjectReader(obj_.at(key), join_path(path_, key));
  }

  const json* raw(const std::string& key) {
    if (!obj_.contains(key)) return nullptr;
    seen_.insert(key);
    return &obj_.at(key);
  }

  std::string path_of(const std::string& key) const { return join_path(path_, key); }

  void finish() const {
    for (const auto& [key, _] : obj_.items()) {
      if (!seen_.count(key)) throw PlanError(join_path(path_, key), "unknown key");
    }
  }

 private:
  template <class T>
  static T convert(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw PlanError(path, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw PlanError(path, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw PlanError(path, "expected an integer");
      if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
        throw PlanError(path, "expected a non-negative integer");
      }
      return v.get<T>();
    } else {
      if (!v.is_number()) throw PlanError(path, "expected a number");
      return v.get<T>();
    }
  }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

// Runs a validator and re-throws its message against `path`.
template <class F>
void validate_at(const std::string& path, F&& f) {
  try {
    f();
  } catch (const PlanError&) {
    throw;
  } catch (const std::exception& e) {
    throw PlanError(path, e.what());
  }
}

DimLossNorm parse_loss_norm(const std::string& s, const std::string& path) {
  if (s == "l2") return DimLossNorm::kL2Squared;
  if (s == "l1") return DimLossNorm::kL1;
  throw PlanError(path, "expected 'l2' or 'l1'");
}

}  // namespace

void ExperimentPlan::validate() const {
  validate_at("split", [&] { split.validate(); });
  if (base.k == 0) throw PlanError("base.k", "must be positive");
  if (base.epochs == 0) throw PlanError("base.epochs", "must be positive");
  if (!(base.lr > 0.0)) throw PlanError("base.lr", "must be positive");
  if (base.batch_size == 0) throw PlanError("base.batch_size", "must be positive");
  if (!(base.init_std > 0.0)) throw PlanError("base.init_std", "must be positive");
  validate_at("diffusion", [&] { (void)schedule.make(); });
  if (score_net.k != base.k) throw PlanError("diffusion", "score network dimension must equal base.k");
  if (score_net.hidden == 0) throw PlanError("diffusion.hidden", "must be positive");
  if (score_net.time_dim == 0 || score_net.time_dim % 2 != 0) {
    throw PlanError("diffusion.time_dim", "must be a positive even number");
  }
  if (!(score_net.time_scale > 0.0)) throw PlanError("diffusion.time_scale", "must be positive");
  validate_at("diffusion", [&] { guidance.validate(); });
  validate_at("solver", [&] { solver.validate(); });
  if (solver.t_end < schedule.t_eps) throw PlanError("solver.t_end", "must be >= diffusion.t_eps");
  validate_at("loss", [&] { loss.validate(); });
  if (cdr.epochs == 0) throw PlanError("cdr.epochs", "must be positive");
  if (!(cdr.lr > 0.0)) throw PlanError("cdr.lr", "must be positive");
  if (cdr.batch_size == 0) throw PlanError("cdr.batch_size", "must be positive");
  if (!(cdr.ema_decay >= 0.0 && cdr.ema_decay < 1.0)) throw PlanError("cdr.ema_decay", "must be in [0, 1)");
  if (!(cdr.alm_max_grad_norm >= 0.0)) throw PlanError("cdr.alm_max_grad_norm", "must be non-negative");
  if (emcdr.epochs == 0) throw PlanError("emcdr.epochs", "must be positive");
  if (!(emcdr.lr > 0.0)) throw PlanError("emcdr.lr", "must be positive");
  if (emcdr.batch_size == 0) throw PlanError("emcdr.batch_size", "must be positive");
  if (!(warm.lr > 0.0)) throw PlanError("warm.lr", "must be positive");
  if (warm.batch_size == 0) throw PlanError("warm.batch_size", "must be positive");
  if (eval.k == 0) throw PlanError("eval.k", "must be positive");
  if (eval.candidates.kind == CandidateMode::Kind::kSampled && eval.candidates.n_neg == 0) {
    throw PlanError("eval.n_neg", "must be positive in sampled mode");
  }
}

LossWeights ExperimentPlan::effective_loss() const {
  LossWeights w = loss;
  if (!norm_order_explicit) w.norm_order = variant == Variant::kDA ? 2 : 1;
  if (variant == Variant::kDA) w.lambda_task = 0.0;
  return w;
}

std::uint64_t ExperimentPlan::derived_seed(const std::string& consumer) const {
  return Rng(seed).split(consumer).seed();
}

json ExperimentPlan::to_json() const {
  json doc;
  doc["data"] = {{"source_csv", data.source_csv},
                 {"target_csv", data.target_csv},
                 {"source_tag", data.source_tag},
                 {"target_tag", data.target_tag}};
  doc["seed"] = seed;
  doc["variant"] = to_string(variant);
  doc["split"] = {{"beta", split.beta}, {"seed", split.seed}, {"warm_fraction", split.warm_fraction}};
  doc["base"] = {{"k", base.k},
                 {"epochs", base.epochs},
                 {"lr", base.lr},
                 {"batch_size", base.batch_size},
                 {"init_std", base.init_std}};
  doc["diffusion"] = {{"beta_min", schedule.beta_min},
                      {"beta_max", schedule.beta_max},
                      {"t_eps", schedule.t_eps},
                      {"hidden", score_net.hidden},
                      {"time_dim", score_net.time_dim},
                      {"time_scale", score_net.time_scale},
                      {"guidance_strength", guidance.strength},
                      {"mask_prob", guidance.mask_prob},
                      {"loss_norm", cdr.dim_loss_norm == DimLossNorm::kL1 ? "l1" : "l2"}};
  doc["solver"] = {{"nfe", solver.nfe},
                   {"t_start", solver.t_start},
                   {"t_end", solver.t_end},
                   {"init_mode", diffcdr::to_string(solver.init_mode)}};
  const auto eff = effective_loss();
  doc["loss"] = {{"lambda_task", loss.lambda_task}, {"norm_order", eff.norm_order}};
  doc["cdr"] = {{"epochs", cdr.epochs}, {"lr", cdr.lr}, {"batch_size", cdr.batch_size}, {"patience", cdr.patience},
                {"ema_decay", cdr.ema_decay},
                {"alm_max_grad_norm", cdr.alm_max_grad_norm}};
  doc["emcdr"] = {{"epochs", emcdr.epochs}, {"lr", emcdr.lr}, {"batch_size", emcdr.batch_size}};
  doc["warm"] = {{"epochs", warm.epochs}, {"lr", warm.lr}, {"batch_size", warm.batch_size}};
  doc["eval"] = {{"k", eval.k},
                 {"candidate_mode", eval.candidates.kind == CandidateMode::Kind::kSampled ? "sampled" : "all_items"},
                 {"n_neg", eval.candidates.n_neg},
                 {"neg_seed", eval.candidates.seed}};
  return doc;
}

ExperimentPlan ExperimentPlan::from_json(const json& doc) {
  ExperimentPlan p;
  ObjectReader root(doc, "");

  {
    auto r = root.child("data");
    if (!r) throw PlanError("data", "required key missing");
    r->require("source_csv", p.data.source_csv);
    r->require("target_csv", p.data.target_csv);
    r->get("source_tag", p.data.source_tag);
    r->get("target_tag", p.data.target_tag);
    if (p.data.source_tag == p.data.target_tag) throw PlanError("data.target_tag", "must differ from source_tag");
    r->finish();
  }
  root.require("seed", p.seed);
  if (const json* v = root.raw("variant")) {
    if (!v->is_string()) throw PlanError("variant", "expected a string");
    validate_at("variant", [&] { p.variant = parse_variant(v->get<std::string>()); });
  }
  {
    auto r = root.child("split");
    if (!r) throw PlanError("split", "required key missing");
    r->require("beta", p.split.beta);
    p.split.seed = p.seed;
    r->get("seed", p.split.seed);
    r->get("warm_fraction", p.split.warm_fraction);
    r->finish();
  }
  if (auto r = root.child("base")) {
    r->get("k", p.base.k);
    r->get("epochs", p.base.epochs);
    r->get("lr", p.base.lr);
    r->get("batch_size", p.base.batch_size);
    r->get("init_std", p.base.init_std);
    r->finish();
  }
  if (auto r = root.child("diffusion")) {
    r->get("beta_min", p.schedule.beta_min);
    r->get("beta_max", p.schedule.beta_max);
    r->get("t_eps", p.schedule.t_eps);
    r->get("hidden", p.score_net.hidden);
    r->get("time_dim", p.score_net.time_dim);
    r->get("time_scale", p.score_net.time_scale);
    r->get("guidance_strength", p.guidance.strength);
    r->get("mask_prob", p.guidance.mask_prob);
    std::string norm = "l2";
    r->get("loss_norm", norm);
    p.cdr.dim_loss_norm = parse_loss_norm(norm, r->path_of("loss_norm"));
    r->finish();
  }
  if (auto r = root.child("solver")) {
    r->get("nfe", p.solver.nfe);
    r->get("t_start", p.solver.t_start);
    r->get("t_end", p.solver.t_end);
    std::string mode = diffcdr::to_string(p.solver.init_mode);
    r->get("init_mode", mode);
    validate_at(r->path_of("init_mode"), [&] { p.solver.init_mode = parse_init_mode(mode); });
    r->finish();
  }
  if (auto r = root.child("loss")) {
    r->get("lambda_task", p.loss.lambda_task);
    if (r->has("norm_order")) {
      r->get("norm_order", p.loss.norm_order);
      p.norm_order_explicit = true;
    }
    r->finish();
  }
  if (auto r = root.child("cdr")) {
    r->get("epochs", p.cdr.epochs);
    r->get("lr", p.cdr.lr);
    r->get("batch_size", p.cdr.batch_size);
    r->get("patience", p.cdr.patience);
    r->get("ema_decay", p.cdr.ema_decay);
    r->get("alm_max_grad_norm", p.cdr.alm_max_grad_norm);
    r->finish();
  }
  if (auto r = root.child("emcdr")) {
    r->get("epochs", p.emcdr.epochs);
    r->get("lr", p.emcdr.lr);
    r->get("batch_size", p.emcdr.batch_size);
    r->finish();
  }
  if (auto r = root.child("warm")) {
    r->get("epochs", p.warm.epochs);
    r->get("lr", p.warm.lr);
    r->get("batch_size", p.warm.batch_size);
    r->finish();
  }
  if (auto r = root.child("eval")) {
    r->get("k", p.eval.k);
    std::string mode = "all_items";
    r->get("candidate_mode", mode);
    if (mode == "sampled") {
      p.eval.candidates.kind = CandidateMode::Kind::kSampled;
    } else if (mode != "all_items") {
      throw PlanError(r->path_of("candidate_mode"), "expected 'all_items' or 'sampled'");
    }
    r->get("n_neg", p.eval.candidates.n_neg);
    p.eval.candidates.seed = p.seed;
    r->get("neg_seed", p.eval.candidates.seed);
    r->finish();
  }
  root.finish();

  p.score_net.k = p.base.k;
  p.validate();
  return p;
}

std::string ExperimentPlan::config_hash() const { return hex64(fnv1a(to_json().dump())); }

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw PlanError(assignment, "override must have the form key.path=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw PlanError(path, "empty path segment");
    if (!node->is_object()) throw PlanError(path.substr(0, start ? start - 1 : 0), "not an object");
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

}  // namespace diffcdr
