#include "diffcdr/base_models.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "diffcdr/log.hpp"
#include "diffcdr/rng.hpp"

namespace diffcdr {

std::uint64_t EmbeddingTable::checksum() const {
  return diffcdr::checksum(users) * 31 + diffcdr::checksum(items);
}

ParamStore EmbeddingTable::to_params() const {
  ParamStore s;
  s.add("users", users);
  s.add("items", items);
  return s;
}

EmbeddingTable EmbeddingTable::from_params(const ParamStore& store) {
  EmbeddingTable t{store.value("users"), store.value("items")};
  if (t.users.rank() != 2 || t.items.rank() != 2 || t.users.cols() != t.items.cols()) {
    throw ShapeError("embedding table shapes disagree: users " + shape_str(t.users.shape()) + ", items " +
                     shape_str(t.items.shape()));
  }
  return t;
}

nlohmann::json MfConfig::to_json() const {
  return {{"k", k}, {"epochs", epochs}, {"lr", lr}, {"batch_size", batch_size}, {"init_std", init_std}, {"seed", seed}};
}

nlohmann::json EmcdrConfig::to_json() const {
  return {{"epochs", epochs}, {"lr", lr}, {"batch_size", batch_size}, {"seed", seed}};
}

double predict_rating(std::span<const double> u, std::span<const double> v) { return ops::dot(u, v); }

Var mf_loss(Tape& tape, ParamStore& tables, const std::vector<IndexedRating>& batch) {
  if (batch.empty()) throw std::invalid_argument("mf_loss: empty batch");
  std::vector<std::size_t> uidx, iidx;
  std::vector<double> r;
  uidx.reserve(batch.size());
  iidx.reserve(batch.size());
  r.reserve(batch.size());
  for (const auto& rec : batch) {
    uidx.push_back(rec.user);
    iidx.push_back(rec.item);
    r.push_back(rec.rating);
  }
  const double n = static_cast<double>(r.size());
  auto u = gather_rows(tape.param(tables, "users"), std::move(uidx));
  auto v = gather_rows(tape.param(tables, "items"), std::move(iidx));
  auto pred = row_sum(mul(u, v));
  return scale(sqnorm(sub(tape.constant(Tensor::vector(std::move(r))), pred)), 1.0 / n);
}

namespace {

// Shared MF loop over (user row, item row, rating) triples.
void fit_mf(ParamStore& params, const std::vector<IndexedRating>& records, const MfConfig& cfg, Rng rng,
            MfTrace* trace) {
  if (records.empty()) throw std::invalid_argument("train_mf: no records");
  if (cfg.batch_size == 0) throw std::invalid_argument("train_mf: batch_size must be positive");
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  const AdamConfig adam{.lr = cfg.lr};
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto end = std::min(order.size(), start + cfg.batch_size);
      std::vector<IndexedRating> batch;
      batch.reserve(end - start);
      for (auto p = start; p < end; ++p) batch.push_back(records[order[p]]);
      Tape tape;
      auto loss = mf_loss(tape, params, batch);
      loss_sum += loss.value().item() * static_cast<double>(batch.size());
      tape.backward(loss);
      adam_step(params, adam);
    }
    // Record-weighted, so a short final batch does not skew the epoch value.
    const double mse = loss_sum / static_cast<double>(records.size());
    if (trace) trace->epoch_mse.push_back(mse);
    log::debug("mf epoch " + std::to_string(epoch) + " mse " + std::to_string(mse));
  }
}

ParamStore init_tables(std::size_t num_users, std::size_t num_items, const MfConfig& cfg, Rng& rng) {
  if (cfg.k == 0) throw std::invalid_argument("train_mf: k must be positive");
  ParamStore params;
  params.add("users", rng.normal_tensor({num_users, cfg.k}, cfg.init_std));
  params.add("items", rng.normal_tensor({num_items, cfg.k}, cfg.init_std));
  return params;
}

}  // namespace

EmbeddingTable train_mf(const std::vector<IndexedRating>& records, std::size_t num_users, std::size_t num_items,
                        const MfConfig& cfg, MfTrace* trace) {
  if (records.empty()) throw std::invalid_argument("train_mf: no records");
  Rng rng(cfg.seed);
  Rng init_rng = rng.split("init");
  auto params = init_tables(num_users, num_items, cfg, init_rng);
  fit_mf(params, records, cfg, rng.split("shuffle"), trace);
  return EmbeddingTable::from_params(params);
}

EmbeddingTable train_tgt(const DomainPair& pair, const ColdSplit& split, const MfConfig& cfg, MfTrace* trace) {
  auto training = cold_target_training_records(pair, split);
  assert_no_leakage(training, split.test_users);
  return train_mf(index_records(pair.target, training), pair.target.users.size(), pair.target.items.size(), cfg,
                  trace);
}

EmbeddingTable train_source_mf(const DomainPair& pair, const MfConfig& cfg, MfTrace* trace) {
  return train_mf(index_records(pair.source, pair.source.records), pair.source.users.size(),
                  pair.source.items.size(), cfg, trace);
}

EmbeddingTable train_joint_mf(const std::vector<IndexedRating>& source, const std::vector<IndexedRating>& target,
                              std::size_t num_users, std::size_t num_source_items, std::size_t num_target_items,
                              const MfConfig& cfg, MfTrace* trace) {
  std::vector<IndexedRating> all = source;
  all.reserve(source.size() + target.size());
  for (auto r : target) {
    r.item += static_cast<std::uint32_t>(num_source_items);
    all.push_back(r);
  }
  return train_mf(all, num_users, num_source_items + num_target_items, cfg, trace);
}

CmfModel train_cmf(const DomainPair& pair, const ColdSplit& split, const MfConfig& cfg, MfTrace* trace) {
  auto target_training = cold_target_training_records(pair, split);
  assert_no_leakage(target_training, split.test_users);

  std::vector<std::string> all_users = pair.source.users.ids();
  all_users.insert(all_users.end(), pair.target.users.ids().begin(), pair.target.users.ids().end());
  CmfModel model;
  model.users = IdMap(std::move(all_users));

  auto to_union = [&](const Domain& d, const std::vector<RatingRecord>& recs) {
    std::vector<IndexedRating> out;
    out.reserve(recs.size());
    for (const auto& r : recs) out.push_back({model.users.at(r.user_id), d.items.at(r.item_id), r.rating});
    return out;
  };
  const auto ns = pair.source.items.size();
  const auto nt = pair.target.items.size();
  auto table = train_joint_mf(to_union(pair.source, pair.source.records), to_union(pair.target, target_training),
                              model.users.size(), ns, nt, cfg, trace);
  model.user_vectors = std::move(table.users);
  std::vector<std::size_t> src_rows(ns), tgt_rows(nt);
  std::iota(src_rows.begin(), src_rows.end(), 0);
  std::iota(tgt_rows.begin(), tgt_rows.end(), ns);
  model.source_items = ops::gather_rows(table.items, src_rows);
  model.target_items = ops::gather_rows(table.items, tgt_rows);
  return model;
}

MappingNet::MappingNet(std::size_t k, std::uint64_t seed) {
  Rng rng = Rng(seed).split("emcdr_init");
  auto uniform = [&rng](Shape shape, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& x : t.data()) x = rng.uniform(-bound, bound);
    return t;
  };
  params_.add("map.0.w", uniform({k, 2 * k}, k));
  params_.add("map.0.b", uniform({2 * k}, k));
  params_.add("map.1.w", uniform({2 * k, k}, 2 * k));
  params_.add("map.1.b", uniform({k}, 2 * k));
}

Var MappingNet::forward(Tape& tape, Var x) {
  auto h = silu(add_row(matmul(x, tape.param(params_, "map.0.w")), tape.param(params_, "map.0.b")));
  return add_row(matmul(h, tape.param(params_, "map.1.w")), tape.param(params_, "map.1.b"));
}

Tensor MappingNet::apply(const Tensor& x) const {
  auto h = ops::silu(ops::add_row(ops::matmul(x, params_.value("map.0.w")), params_.value("map.0.b")));
  return ops::add_row(ops::matmul(h, params_.value("map.1.w")), params_.value("map.1.b"));
}

MappingNet train_emcdr(const EmbeddingTable& source, const EmbeddingTable& target,
                       const std::vector<UserPairIndex>& train_users, const EmcdrConfig& cfg,
                       std::vector<double>* epoch_loss) {
  if (train_users.empty()) throw std::invalid_argument("train_emcdr: no training users");
  if (source.k() != target.k()) throw ShapeError("train_emcdr: source and target k differ");
  if (cfg.batch_size == 0) throw std::invalid_argument("train_emcdr: batch_size must be positive");
  MappingNet net(source.k(), cfg.seed);
  Rng rng = Rng(cfg.seed).split("emcdr_shuffle");
  std::vector<std::size_t> order(train_users.size());
  std::iota(order.begin(), order.end(), 0);
  const AdamConfig adam{.lr = cfg.lr};
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto end = std::min(order.size(), start + cfg.batch_size);
      std::vector<std::size_t> srows, trows;
      for (auto p = start; p < end; ++p) {
        srows.push_back(train_users[order[p]].source_row);
        trows.push_back(train_users[order[p]].target_row);
      }
      const auto xs = ops::gather_rows(source.users, srows);
      const auto ys = ops::gather_rows(target.users, trows);
      Tape tape;
      auto pred = net.forward(tape, tape.input(xs));
      auto loss = scale(sqnorm(sub(pred, tape.input(ys))), 1.0 / static_cast<double>(srows.size()));
      total += loss.value().item();
      ++batches;
      tape.backward(loss);
      adam_step(net.params(), adam);
    }
    if (epoch_loss) epoch_loss->push_back(total / static_cast<double>(batches));
  }
  return net;
}

std::vector<UserPairIndex> overlap_rows(const DomainPair& pair, const std::vector<std::string>& users) {
  std::vector<UserPairIndex> out;
  out.reserve(users.size());
  for (const auto& u : users) out.push_back({pair.source.users.at(u), pair.target.users.at(u)});
  return out;
}

}  // namespace diffcdr
