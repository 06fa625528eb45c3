#include "diffcdr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "diffcdr/rng.hpp"

namespace diffcdr {

ErrorMetrics mae_rmse(std::span<const double> preds, std::span<const double> truths) {
  if (preds.size() != truths.size()) throw std::invalid_argument("mae_rmse: length mismatch");
  if (preds.empty()) throw std::invalid_argument("mae_rmse: no records to score");
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double d = std::clamp(preds[i], 0.0, 5.0) - truths[i];
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  const double n = static_cast<double>(preds.size());
  return {abs_sum / n, std::sqrt(sq_sum / n)};
}

nlohmann::json CandidateMode::to_json() const {
  if (kind == Kind::kAllItems) return {{"mode", "all_items"}};
  return {{"mode", "sampled"}, {"n_neg", n_neg}, {"seed", seed}};
}

std::size_t rank_among(std::span<const double> scores, std::span<const std::size_t> candidates,
                       std::size_t true_item) {
  if (std::find(candidates.begin(), candidates.end(), true_item) == candidates.end()) {
    throw std::invalid_argument("rank_metrics: true item " + std::to_string(true_item) + " not among candidates");
  }
  const double s = scores[true_item];
  std::size_t rank = 1;
  for (auto c : candidates) {
    if (c == true_item) continue;
    if (scores[c] > s || (scores[c] == s && c < true_item)) ++rank;
  }
  return rank;
}

std::vector<std::vector<std::size_t>> sample_negatives(std::span<const EvalRecord> records, std::size_t num_items,
                                                       std::size_t n_neg, std::uint64_t seed) {
  std::map<std::size_t, std::set<std::size_t>> positives;
  for (const auto& r : records) positives[r.user].insert(r.item);
  std::size_t max_user = 0;
  for (const auto& [u, _] : positives) max_user = std::max(max_user, u);
  std::vector<std::vector<std::size_t>> out(positives.empty() ? 0 : max_user + 1);
  const Rng root(seed);
  for (const auto& [user, pos] : positives) {
    std::vector<std::size_t> pool;
    for (std::size_t j = 0; j < num_items; ++j)
      if (!pos.count(j)) pool.push_back(j);
    Rng rng = root.split(static_cast<std::uint64_t>(user));
    const auto take = std::min(n_neg, pool.size());
    for (std::size_t i = 0; i < take; ++i) std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
    pool.resize(take);
    std::sort(pool.begin(), pool.end());
    out[user] = std::move(pool);
  }
  return out;
}

RankResult rank_metrics(const ScoreFn& scores, std::span<const EvalRecord> records, std::size_t num_items,
                        std::size_t k, const CandidateMode& mode) {
  if (records.empty()) throw std::invalid_argument("rank_metrics: no records");
  if (k == 0) throw std::invalid_argument("rank_metrics: k must be positive");
  std::vector<std::vector<std::size_t>> negatives;
  if (mode.kind == CandidateMode::Kind::kSampled) negatives = sample_negatives(records, num_items, mode.n_neg, mode.seed);
  std::vector<std::size_t> all(num_items);
  for (std::size_t j = 0; j < num_items; ++j) all[j] = j;

  RankResult out;
  out.ranks.reserve(records.size());
  std::size_t cached_user = static_cast<std::size_t>(-1);
  std::vector<double> user_scores;
  double dcg = 0.0, hits = 0.0;
  for (const auto& rec : records) {
    if (rec.item >= num_items) throw std::invalid_argument("rank_metrics: item index out of range");
    if (rec.user != cached_user) {
      user_scores = scores(rec.user);
      if (user_scores.size() != num_items) throw std::invalid_argument("rank_metrics: score vector size mismatch");
      cached_user = rec.user;
    }
    std::size_t rank;
    if (mode.kind == CandidateMode::Kind::kAllItems) {
      rank = rank_among(user_scores, all, rec.item);
    } else {
      auto cands = negatives[rec.user];
      cands.push_back(rec.item);
      rank = rank_among(user_scores, cands, rec.item);
    }
    out.ranks.push_back(rank);
    if (rank <= k) {
      hits += 1.0;
      dcg += 1.0 / std::log2(1.0 + static_cast<double>(rank));
    }
  }
  const double n = static_cast<double>(records.size());
  out.hit = hits / n;
  out.ndcg = dcg / n;
  return out;
}

nlohmann::json MetricsReport::to_json() const {
  return {{"method", method},
          {"mae", mae},
          {"rmse", rmse},
          {"ndcg_at_k", ndcg_at_k},
          {"hit_at_k", hit_at_k},
          {"k", k},
          {"n_eval_records", n_eval_records},
          {"n_eval_users", n_eval_users},
          {"skipped_users", skipped_users},
          {"config", config}};
}

}  // namespace diffcdr
