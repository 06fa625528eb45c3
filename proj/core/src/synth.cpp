#include "diffcdr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "diffcdr/rng.hpp"

namespace diffcdr {

nlohmann::json SynthConfig::to_json() const {
  return {{"n_users", n_users},
          {"n_items_per_domain", n_items_per_domain},
          {"k", k},
          {"overlap_fraction", overlap_fraction},
          {"noise_std", noise_std},
          {"obs_noise_std", obs_noise_std},
          {"mu", mu},
          {"dot_std", dot_std},
          {"ratings_per_user", ratings_per_user},
          {"seed", seed}};
}

SynthConfig SynthConfig::from_json(const nlohmann::json& doc) {
  SynthConfig c;
  for (const auto& [key, value] : doc.items()) {
    if (key == "n_users") c.n_users = value.get<std::size_t>();
    else if (key == "n_items_per_domain") c.n_items_per_domain = value.get<std::size_t>();
    else if (key == "k") c.k = value.get<std::size_t>();
    else if (key == "overlap_fraction") c.overlap_fraction = value.get<double>();
    else if (key == "noise_std") c.noise_std = value.get<double>();
    else if (key == "obs_noise_std") c.obs_noise_std = value.get<double>();
    else if (key == "mu") c.mu = value.get<double>();
    else if (key == "dot_std") c.dot_std = value.get<double>();
    else if (key == "ratings_per_user") c.ratings_per_user = value.get<std::size_t>();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else throw std::invalid_argument("unknown synth key '" + key + "'");
  }
  return c;
}

namespace {

std::string make_id(char prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%05zu", prefix, i);
  return buf;
}

std::vector<double> draw_vector(Rng& rng, std::size_t k, double stddev) {
  std::vector<double> v(k);
  for (auto& x : v) x = stddev * rng.normal();
  return v;
}

// Draws `count` distinct indices from [0, n) by partial Fisher-Yates.
std::vector<std::size_t> draw_distinct(Rng& rng, std::size_t n, std::size_t count) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < count; ++i) std::swap(pool[i], pool[i + rng.index(n - i)]);
  pool.resize(count);
  return pool;
}

void emit_ratings(Rng& rng, const SynthConfig& cfg, const std::string& user, const std::vector<double>& u,
                  const std::vector<std::string>& item_ids, const std::vector<std::vector<double>>& items,
                  std::vector<RatingRecord>& out) {
  for (auto j : draw_distinct(rng, items.size(), cfg.ratings_per_user)) {
    double r = cfg.mu + ops::dot(u, items[j]) + cfg.obs_noise_std * rng.normal();
    r = std::clamp(r, 0.0, 5.0);
    auto ts = static_cast<std::int64_t>(rng.index(1'000'000));
    out.push_back({user, item_ids[j], r, ts});
  }
}

}  // namespace

SynthData synth_generate(const SynthConfig& cfg) {
  if (cfg.k < 2) throw std::invalid_argument("synth: k must be >= 2");
  if (!(cfg.overlap_fraction > 0.0 && cfg.overlap_fraction <= 1.0)) {
    throw std::invalid_argument("synth: overlap_fraction must lie in (0,1]");
  }
  if (cfg.ratings_per_user < 5) throw std::invalid_argument("synth: ratings_per_user < 5 violates 5-core");
  if (cfg.n_items_per_domain < cfg.ratings_per_user) {
    throw std::invalid_argument("synth: fewer items than ratings per user");
  }
  if (cfg.n_users * cfg.ratings_per_user < 5 * cfg.n_items_per_domain) {
    throw std::invalid_argument("synth: parameters imply fewer than 5 ratings per item");
  }
  if (cfg.noise_std < 0.0 || cfg.obs_noise_std < 0.0) throw std::invalid_argument("synth: negative noise");
  if (!(cfg.dot_std > 0.0)) throw std::invalid_argument("synth: dot_std must be positive");

  const auto k = cfg.k;
  Rng root(cfg.seed);
  Rng map_rng = root.split("map");
  Rng user_rng = root.split("users");
  Rng item_rng = root.split("items");
  Rng rating_rng = root.split("ratings");

  SynthData data;
  auto& truth = data.truth;

  // Coordinate scale with Var(u.v) = dot_std^2 for independent u, v.
  const double coord_std = std::sqrt(cfg.dot_std) / std::pow(static_cast<double>(k), 0.25);
  // A has N(0, 1/k) entries so A*s keeps the coordinate scale.
  truth.map_matrix = map_rng.normal_tensor({k, k}, 1.0 / std::sqrt(static_cast<double>(k)));
  truth.map_offset = map_rng.normal_tensor({k}, 0.25 * coord_std);

  std::vector<std::string> src_item_ids, tgt_item_ids;
  std::vector<std::vector<double>> src_items, tgt_items;
  for (std::size_t j = 0; j < cfg.n_items_per_domain; ++j) {
    src_item_ids.push_back(kSourceTag + ":" + make_id('i', j));
    src_items.push_back(draw_vector(item_rng, k, coord_std));
    truth.source_items[src_item_ids.back()] = src_items.back();
  }
  for (std::size_t j = 0; j < cfg.n_items_per_domain; ++j) {
    tgt_item_ids.push_back(kTargetTag + ":" + make_id('i', j));
    tgt_items.push_back(draw_vector(item_rng, k, coord_std));
    truth.target_items[tgt_item_ids.back()] = tgt_items.back();
  }

  auto to_target = [&](const std::vector<double>& s) {
    std::vector<double> t(k);
    for (std::size_t r = 0; r < k; ++r) {
      double acc = truth.map_offset[r];
      for (std::size_t c = 0; c < k; ++c) acc += truth.map_matrix(r, c) * s[c];
      t[r] = acc + cfg.noise_std * user_rng.normal();
    }
    return t;
  };

  const auto n_overlap = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(cfg.overlap_fraction * static_cast<double>(cfg.n_users))));
  const auto n_exclusive = cfg.n_users - std::min(n_overlap, cfg.n_users);

  for (std::size_t i = 0; i < std::min(n_overlap, cfg.n_users); ++i) {
    const auto id = make_id('u', i);
    auto s = draw_vector(user_rng, k, coord_std);
    auto t = to_target(s);
    emit_ratings(rating_rng, cfg, id, s, src_item_ids, src_items, data.source_records);
    emit_ratings(rating_rng, cfg, id, t, tgt_item_ids, tgt_items, data.target_records);
    truth.source_users[id] = std::move(s);
    truth.target_users[id] = std::move(t);
  }
  for (std::size_t i = 0; i < n_exclusive; ++i) {
    const auto id = make_id('s', i);
    auto s = draw_vector(user_rng, k, coord_std);
    emit_ratings(rating_rng, cfg, id, s, src_item_ids, src_items, data.source_records);
    truth.source_users[id] = std::move(s);
  }
  for (std::size_t i = 0; i < n_exclusive; ++i) {
    const auto id = make_id('t', i);
    auto t = to_target(draw_vector(user_rng, k, coord_std));
    emit_ratings(rating_rng, cfg, id, t, tgt_item_ids, tgt_items, data.target_records);
    truth.target_users[id] = std::move(t);
  }

  for (const auto* records : {&data.source_records, &data.target_records}) {
    std::map<std::string, std::size_t> item_count;
    for (const auto& r : *records) ++item_count[r.item_id];
    for (const auto& [item, n] : item_count) {
      if (n < 5) throw std::invalid_argument("synth: item '" + item + "' drew fewer than 5 ratings; raise n_users");
    }
    const auto& ids = records == &data.source_records ? src_item_ids : tgt_item_ids;
    if (item_count.size() != ids.size()) {
      throw std::invalid_argument("synth: some items drew no ratings; raise n_users");
    }
  }
  return data;
}

nlohmann::json synth_truth_to_json(const SynthTruth& truth) {
  return {{"source_users", truth.source_users},
          {"target_users", truth.target_users},
          {"source_items", truth.source_items},
          {"target_items", truth.target_items},
          {"map_matrix", {{"shape", truth.map_matrix.shape()}, {"data", truth.map_matrix.values()}}},
          {"map_offset", truth.map_offset.values()}};
}

}  // namespace diffcdr
