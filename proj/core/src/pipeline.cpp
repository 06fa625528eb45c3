#include "diffcdr/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <numeric>
#include <stdexcept>

#include "diffcdr/io.hpp"
#include "diffcdr/log.hpp"

namespace diffcdr {

using nlohmann::json;

namespace {

MfConfig seeded(MfConfig cfg, std::uint64_t seed) {
  cfg.seed = seed;
  return cfg;
}

Tensor rows_of(const Tensor& table, const std::vector<std::uint32_t>& rows) {
  return ops::gather_rows(table, std::vector<std::size_t>(rows.begin(), rows.end()));
}

struct StepContext {
  const NoiseSchedule& schedule;
  const ExperimentPlan& plan;
  LossWeights loss;
  AdamConfig adam;
  AdamConfig alm_adam;
  const Tensor& target_items;
  const TrainHooks* hooks = nullptr;
};

struct StepResult {
  double dim_loss = 0.0;
  double combined_loss = 0.0;
};

void emit(const TrainHooks* hooks, TrainEvent ev, std::size_t epoch, std::size_t batch) {
  if (hooks && hooks->on_event) hooks->on_event(ev, epoch, batch);
}

// One batch of the alternating scheme. `us`/`ut` are the batch's source and
// target user vectors; `ratings` index rows of the batch.
StepResult alternating_step(ScoreNetwork& dim, ScoreNetwork& sampler, AlmLayer& alm, const Tensor& us, const Tensor& ut,
                            const std::vector<TaskRating>& ratings, const StepContext& ctx, Rng& rng,
                            std::size_t epoch, std::size_t batch, std::size_t* stop_gradient_checks) {
  StepResult out;
  Tensor u_hat;
  if (ctx.plan.variant == Variant::kAT) {
    u_hat = us;
  } else {
    {
      Tape tape;
      auto loss = dim_loss(tape, dim, ut, us, ctx.schedule, ctx.plan.guidance.mask_prob, rng, ctx.plan.cdr.dim_loss_norm);
      out.dim_loss = loss.value().item();
      tape.backward(loss);
      adam_step(dim.params(), ctx.adam);
      ema_update(sampler.params(), dim.params(), ctx.plan.cdr.ema_decay);
    }
    emit(ctx.hooks, TrainEvent::kDimStep, epoch, batch);
    u_hat = dpm_solver1(sampler, ctx.schedule, ctx.plan.solver, &us, ctx.plan.guidance.strength,
                        solver_init(ctx.plan.solver, us, rng));
    emit(ctx.hooks, TrainEvent::kInfer, epoch, batch);
  }

  const auto theta_before = dim.params().checksum();
  const auto sampler_before = sampler.params().checksum();
  {
    Tape tape;
    auto aligned = alm.forward(tape, tape.input(u_hat));
    auto loss = alm_loss(aligned, ut, ctx.loss.norm_order);
    if (ctx.loss.lambda_task > 0.0 && !ratings.empty()) {
      loss = combined_loss(loss, task_loss(aligned, tape.input(ctx.target_items), ratings), ctx.loss.lambda_task);
    }
    out.combined_loss = loss.value().item();
    tape.backward(loss);
    adam_step(alm.params(), ctx.alm_adam);
  }
  if (dim.params().checksum() != theta_before || sampler.params().checksum() != sampler_before) {
    throw ProtocolError("ALM step modified DIM parameters");
  }
  if (stop_gradient_checks) ++*stop_gradient_checks;
  emit(ctx.hooks, TrainEvent::kAlmStep, epoch, batch);
  return out;
}

// Target training ratings of each overlap train user, keyed by target row.
std::map<std::uint32_t, std::vector<std::pair<std::uint32_t, double>>> ratings_by_user(
    const DomainPair& pair, const std::vector<RatingRecord>& records) {
  std::map<std::uint32_t, std::vector<std::pair<std::uint32_t, double>>> out;
  for (const auto& r : index_records(pair.target, records)) out[r.user].emplace_back(r.item, r.rating);
  return out;
}

std::vector<TaskRating> batch_ratings(
    const std::vector<UserPairIndex>& batch,
    const std::map<std::uint32_t, std::vector<std::pair<std::uint32_t, double>>>& by_user) {
  std::vector<TaskRating> out;
  for (std::size_t row = 0; row < batch.size(); ++row) {
    auto it = by_user.find(batch[row].target_row);
    if (it == by_user.end()) continue;
    for (const auto& [item, rating] : it->second) out.push_back({row, item, rating});
  }
  return out;
}

void split_batch(const std::vector<UserPairIndex>& batch, const PretrainedBases& bases, Tensor& us, Tensor& ut) {
  std::vector<std::uint32_t> s, t;
  for (const auto& p : batch) {
    s.push_back(p.source_row);
    t.push_back(p.target_row);
  }
  us = rows_of(bases.source.users, s);
  ut = rows_of(bases.target.users, t);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

PretrainedBases pretrain_bases(const DomainPair& pair, const ColdSplit& split, const ExperimentPlan& plan) {
  PretrainedBases b;
  b.source = train_source_mf(pair, seeded(plan.base, plan.derived_seed("mf_source")), &b.source_trace);
  b.target = train_tgt(pair, split, seeded(plan.base, plan.derived_seed("mf_target")), &b.target_trace);
  return b;
}

Tensor TrainedDiffCDR::transfer(const Tensor& source_users, Rng& rng) const {
  if (plan.variant == Variant::kAT) return source_users;
  const auto schedule = plan.schedule.make();
  return dpm_solver1(sampler, schedule, plan.solver, &source_users, plan.guidance.strength,
                     solver_init(plan.solver, source_users, rng));
}

Tensor TrainedDiffCDR::transfer(const Tensor& source_users) const {
  Rng rng = Rng(plan.derived_seed("inference"));
  return transfer(source_users, rng);
}

Tensor TrainedDiffCDR::aligned(const Tensor& source_users) const { return alm.apply(transfer(source_users)); }

json TrainReport::to_json() const {
  return {{"epochs_run", epochs_run},
          {"stopped_early", stopped_early},
          {"epoch_dim_loss", epoch_dim_loss},
          {"epoch_combined_loss", epoch_combined_loss},
          {"alm_steps", alm_steps},
          {"stop_gradient_checks", stop_gradient_checks},
          {"bases_frozen", bases_frozen},
          {"leakage_checked", leakage_checked}};
}

TrainedDiffCDR train_diffcdr(const DomainPair& pair, const ColdSplit& split, const PretrainedBases& bases,
                             const ExperimentPlan& plan, TrainReport* report, const TrainHooks* hooks) {
  plan.validate();
  if (split.train_users.empty()) throw std::invalid_argument("train_diffcdr: empty overlap train set");
  const auto k = plan.base.k;
  if (bases.source.k() != k || bases.target.k() != k) throw ShapeError("train_diffcdr: base tables do not match base.k");

  const auto training = cold_target_training_records(pair, split);
  assert_no_leakage(training, split.test_users);
  const auto by_user = ratings_by_user(pair, training);
  auto train_rows = overlap_rows(pair, split.train_users);

  const auto source_sum = bases.source.checksum();
  const auto target_sum = bases.target.checksum();

  ScoreNetConfig net_cfg = plan.score_net;
  net_cfg.k = k;
  net_cfg.seed = plan.derived_seed("score_net");
  TrainedDiffCDR model{bases.source, bases.target, ScoreNetwork(net_cfg), ScoreNetwork(net_cfg), AlmLayer(k), plan,
                       json::object()};

  const auto schedule = plan.schedule.make();
  const StepContext ctx{schedule, plan, plan.effective_loss(), AdamConfig{.lr = plan.cdr.lr},
                        AdamConfig{.lr = plan.cdr.lr, .max_grad_norm = plan.cdr.alm_max_grad_norm}, bases.target.items,
                        hooks};
  Rng root = Rng(plan.derived_seed("cdr"));
  Rng shuffle_rng = root.split("shuffle");
  Rng noise_rng = root.split("noise");

  TrainReport local;
  TrainReport& rep = report ? *report : local;
  rep = TrainReport{};
  rep.leakage_checked = true;

  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  for (std::size_t epoch = 0; epoch < plan.cdr.epochs; ++epoch) {
    shuffle_rng.shuffle(train_rows);
    double dim_total = 0.0, comb_total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < train_rows.size(); start += plan.cdr.batch_size) {
      const auto end = std::min(train_rows.size(), start + plan.cdr.batch_size);
      const std::vector<UserPairIndex> batch(train_rows.begin() + static_cast<std::ptrdiff_t>(start),
                                             train_rows.begin() + static_cast<std::ptrdiff_t>(end));
      Tensor us, ut;
      split_batch(batch, bases, us, ut);
      const auto r = alternating_step(model.dim, model.sampler, model.alm, us, ut, batch_ratings(batch, by_user), ctx, noise_rng,
                                      epoch, batches, &rep.stop_gradient_checks);
      dim_total += r.dim_loss;
      comb_total += r.combined_loss;
      ++batches;
      ++rep.alm_steps;
    }
    const double comb = comb_total / static_cast<double>(batches);
    rep.epoch_dim_loss.push_back(dim_total / static_cast<double>(batches));
    rep.epoch_combined_loss.push_back(comb);
    rep.epochs_run = epoch + 1;
    log::debug("cdr epoch " + std::to_string(epoch) + " dim=" + std::to_string(rep.epoch_dim_loss.back()) +
               " combined=" + std::to_string(comb));
    if (comb < best) {
      best = comb;
      since_best = 0;
    } else if (plan.cdr.patience > 0 && ++since_best >= plan.cdr.patience) {
      rep.stopped_early = true;
      break;
    }
  }

  if (bases.source.checksum() != source_sum || bases.target.checksum() != target_sum ||
      model.source.checksum() != source_sum || model.target.checksum() != target_sum) {
    throw ProtocolError("base embedding tables changed during CDR training");
  }
  rep.bases_frozen = true;

  const auto eff = plan.effective_loss();
  model.manifest = {{"plan", plan.to_json()},
                    {"config_hash", plan.config_hash()},
                    {"seed", plan.seed},
                    {"variant", to_string(plan.variant)},
                    {"effective_loss", eff.to_json()},
                    {"schedule", schedule.to_json()},
                    {"guidance", plan.guidance.to_json()},
                    {"solver", plan.solver.to_json()},
                    {"score_net", net_cfg.to_json()},
                    {"baseline_source_data", "all methods train on every source record, test users included"},
                    {"train", rep.to_json()},
                    {"checksums",
                     {{"source", hex64(source_sum)},
                      {"target", hex64(target_sum)},
                      {"theta", hex64(model.dim.params().checksum())},
                      {"theta_sampler", hex64(model.sampler.params().checksum())},
                      {"phi", hex64(model.alm.params().checksum())}}}};
  return model;
}

EvalSet make_eval_set(const DomainPair& pair, const std::vector<RatingRecord>& records) {
  std::map<std::string, std::vector<const RatingRecord*>> grouped;
  for (const auto& r : records) grouped[r.user_id].push_back(&r);
  EvalSet set;
  for (const auto& [user, recs] : grouped) {
    if (!pair.source.users.contains(user)) {
      ++set.skipped_users;
      continue;
    }
    const auto row = set.users.size();
    set.users.push_back(user);
    for (const auto* r : recs) set.records.push_back({row, pair.target.items.at(r->item_id), r->rating});
  }
  if (set.skipped_users) log::warn(std::to_string(set.skipped_users) + " eval users have no source embedding; skipped");
  return set;
}

MetricsReport evaluate_user_vectors(const std::string& method, const Tensor& user_vectors, const Tensor& items,
                                    const EvalSet& set, const EvalConfig& cfg) {
  if (set.records.empty()) throw std::invalid_argument("evaluate: zero eval records");
  if (user_vectors.rows() != set.users.size()) throw ShapeError("evaluate: one user vector per eval user required");
  if (user_vectors.cols() != items.cols()) throw ShapeError("evaluate: user and item dimensions differ");

  std::vector<double> preds, truths;
  preds.reserve(set.records.size());
  truths.reserve(set.records.size());
  for (const auto& r : set.records) {
    preds.push_back(ops::dot(user_vectors.row(r.user), items.row(r.item)));
    truths.push_back(r.rating);
  }
  const auto err = mae_rmse(preds, truths);

  const auto num_items = items.rows();
  ScoreFn scores = [&](std::size_t user) {
    std::vector<double> s(num_items);
    const auto u = user_vectors.row(user);
    for (std::size_t j = 0; j < num_items; ++j) s[j] = ops::dot(u, items.row(j));
    return s;
  };
  const auto rank = rank_metrics(scores, set.records, num_items, cfg.k, cfg.candidates);

  MetricsReport rep;
  rep.method = method;
  rep.mae = err.mae;
  rep.rmse = err.rmse;
  rep.ndcg_at_k = rank.ndcg;
  rep.hit_at_k = rank.hit;
  rep.k = cfg.k;
  rep.n_eval_records = set.records.size();
  rep.n_eval_users = set.users.size();
  rep.skipped_users = set.skipped_users;
  rep.config = {{"candidates", cfg.candidates.to_json()}, {"k", cfg.k}};
  return rep;
}

namespace {

Tensor source_vectors_for(const DomainPair& pair, const Tensor& source_users, const std::vector<std::string>& users) {
  std::vector<std::uint32_t> rows;
  rows.reserve(users.size());
  for (const auto& u : users) rows.push_back(pair.source.users.at(u));
  return rows_of(source_users, rows);
}

}  // namespace

MetricsReport evaluate_cold(const TrainedDiffCDR& model, const DomainPair& pair, const ColdSplit& split,
                            const EvalConfig& cfg, const std::vector<RatingRecord>* records) {
  const auto set = make_eval_set(pair, records ? *records : test_user_target_records(pair, split));
  if (set.records.empty()) throw std::invalid_argument("evaluate_cold: zero eval records");
  const auto vectors = model.aligned(source_vectors_for(pair, model.source.users, set.users));
  auto rep = evaluate_user_vectors("DiffCDR-" + to_string(model.plan.variant), vectors, model.target.items, set, cfg);
  rep.config["config_hash"] = model.plan.config_hash();
  rep.config["seed"] = model.plan.seed;
  return rep;
}

TrainedDiffCDR warm_start_finetune(const TrainedDiffCDR& model, const DomainPair& pair,
                                   const std::vector<RatingRecord>& finetune, const WarmConfig& cfg) {
  TrainedDiffCDR out = model;
  if (finetune.empty()) {
    log::warn("warm_start_finetune: empty finetune set; model unchanged");
    return out;
  }
  if (cfg.epochs == 0) return out;
  if (cfg.batch_size == 0) throw std::invalid_argument("warm_start_finetune: batch_size must be positive");

  // u_hat is fixed: the DIM is frozen and inference is deterministic per seed.
  std::map<std::string, std::vector<std::pair<std::uint32_t, double>>> by_user;
  for (const auto& r : finetune) {
    if (!pair.source.users.contains(r.user_id)) continue;
    by_user[r.user_id].emplace_back(pair.target.items.at(r.item_id), r.rating);
  }
  std::vector<std::string> users;
  for (const auto& [u, _] : by_user) users.push_back(u);
  if (users.empty()) {
    log::warn("warm_start_finetune: no finetune user has a source embedding; model unchanged");
    return out;
  }
  const Tensor u_hat = out.transfer(source_vectors_for(pair, out.source.users, users));

  ParamStore items;
  items.add("items", out.target.items);
  const AdamConfig adam{.lr = cfg.lr};
  Rng rng = Rng(model.plan.derived_seed("warm"));
  std::vector<std::size_t> order(users.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto end = std::min(order.size(), start + cfg.batch_size);
      std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                    order.begin() + static_cast<std::ptrdiff_t>(end));
      std::vector<TaskRating> ratings;
      for (std::size_t b = 0; b < rows.size(); ++b) {
        for (const auto& [item, rating] : by_user[users[rows[b]]]) ratings.push_back({b, item, rating});
      }
      const Tensor batch = ops::gather_rows(u_hat, rows);
      Tape tape;
      auto aligned = out.alm.forward(tape, tape.input(batch));
      auto loss = task_loss(aligned, tape.param(items, "items"), ratings);
      tape.backward(loss);
      adam_step(out.alm.params(), adam);
      adam_step(items, adam);
    }
  }
  out.target.items = items.value("items");
  out.manifest["warm"] = {{"epochs", cfg.epochs},
                          {"lr", cfg.lr},
                          {"batch_size", cfg.batch_size},
                          {"finetune_records", finetune.size()},
                          {"updated", {"alm.w", "target.items"}}};
  return out;
}

MetricsReport run_baseline(const std::string& name, const DomainPair& pair, const ColdSplit& split,
                           const PretrainedBases& bases, const ExperimentPlan& plan,
                           const std::vector<RatingRecord>* records) {
  if (name != "TGT" && name != "CMF" && name != "EMCDR") {
    throw std::invalid_argument("run_baseline: unknown baseline '" + name + "' (expected TGT, CMF or EMCDR)");
  }
  const auto set = make_eval_set(pair, records ? *records : test_user_target_records(pair, split));
  if (set.records.empty()) throw std::invalid_argument("run_baseline: zero eval records");

  Tensor vectors, items;
  if (name == "TGT") {
    std::vector<std::uint32_t> rows;
    for (const auto& u : set.users) rows.push_back(pair.target.users.at(u));
    vectors = rows_of(bases.target.users, rows);
    items = bases.target.items;
  } else if (name == "CMF") {
    const auto cmf = train_cmf(pair, split, seeded(plan.base, plan.derived_seed("mf_cmf")));
    std::vector<std::uint32_t> rows;
    for (const auto& u : set.users) rows.push_back(cmf.users.at(u));
    vectors = rows_of(cmf.user_vectors, rows);
    items = cmf.target_items;
  } else {
    EmcdrConfig cfg = plan.emcdr;
    cfg.seed = plan.derived_seed("emcdr");
    const auto net = train_emcdr(bases.source, bases.target, overlap_rows(pair, split.train_users), cfg);
    vectors = net.apply(source_vectors_for(pair, bases.source.users, set.users));
    items = bases.target.items;
  }
  auto rep = evaluate_user_vectors(name, vectors, items, set, plan.eval);
  rep.config["config_hash"] = plan.config_hash();
  rep.config["seed"] = plan.seed;
  rep.config["baseline_source_data"] = "all source records, test users included";
  return rep;
}

json ThroughputReport::to_json() const {
  return {{"train_samples_per_sec", train_samples_per_sec},
          {"infer_samples_per_sec", infer_samples_per_sec},
          {"n_users", n_users},
          {"repetitions", repetitions}};
}

ThroughputReport bench_throughput(const TrainedDiffCDR& model, const DomainPair& pair, const ColdSplit& split,
                                  std::size_t n_users, std::size_t repetitions) {
  if (n_users == 0) throw std::invalid_argument("bench_throughput: n_users must be positive");
  if (split.train_users.empty()) throw std::invalid_argument("bench_throughput: no train users");
  repetitions = std::max<std::size_t>(repetitions, 3);

  const auto& plan = model.plan;
  Rng rng = Rng(plan.derived_seed("bench"));
  const auto all_rows = overlap_rows(pair, split.train_users);
  std::vector<UserPairIndex> sample;
  for (std::size_t i = 0; i < n_users; ++i) sample.push_back(all_rows[rng.index(all_rows.size())]);
  const auto by_user = ratings_by_user(pair, cold_target_training_records(pair, split));
  const PretrainedBases bases{model.source, model.target, {}, {}};
  const auto schedule = plan.schedule.make();
  const StepContext ctx{schedule, plan, plan.effective_loss(), AdamConfig{.lr = plan.cdr.lr},
                        AdamConfig{.lr = plan.cdr.lr, .max_grad_norm = plan.cdr.alm_max_grad_norm}, model.target.items,
                        nullptr};

  using clock = std::chrono::steady_clock;
  std::vector<double> train_rates, infer_rates;
  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    TrainedDiffCDR work = model;
    Rng noise = rng.split(rep);
    const auto t0 = clock::now();
    for (std::size_t start = 0; start < sample.size(); start += plan.cdr.batch_size) {
      const auto end = std::min(sample.size(), start + plan.cdr.batch_size);
      const std::vector<UserPairIndex> batch(sample.begin() + static_cast<std::ptrdiff_t>(start),
                                             sample.begin() + static_cast<std::ptrdiff_t>(end));
      Tensor us, ut;
      split_batch(batch, bases, us, ut);
      alternating_step(work.dim, work.sampler, work.alm, us, ut, batch_ratings(batch, by_user), ctx, noise, 0, 0, nullptr);
    }
    const auto t1 = clock::now();
    Tensor us, ut;
    split_batch(sample, bases, us, ut);
    const auto out = work.alm.apply(work.transfer(us, noise));
    const auto t2 = clock::now();
    (void)out;
    const double train_s = std::chrono::duration<double>(t1 - t0).count();
    const double infer_s = std::chrono::duration<double>(t2 - t1).count();
    train_rates.push_back(static_cast<double>(n_users) / std::max(train_s, 1e-9));
    infer_rates.push_back(static_cast<double>(n_users) / std::max(infer_s, 1e-9));
  }
  return {median(train_rates), median(infer_rates), n_users, repetitions};
}

}  // namespace diffcdr
