#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace diffcdr {

struct ErrorMetrics {
  double mae = 0.0;
  double rmse = 0.0;
};

/// Predictions are clipped to [0,5] before scoring.
ErrorMetrics mae_rmse(std::span<const double> preds, std::span<const double> truths);

struct CandidateMode {
  enum class Kind { kAllItems, kSampled };
  Kind kind = Kind::kAllItems;
  std::size_t n_neg = 99;
  std::uint64_t seed = 0;

  static CandidateMode all_items() { return {}; }
  static CandidateMode sampled(std::size_t n_neg, std::uint64_t seed) { return {Kind::kSampled, n_neg, seed}; }
  nlohmann::json to_json() const;
};

/// One held-out rating; `user` is a row of the evaluated user matrix and
/// `item` a target-domain item index.
struct EvalRecord {
  std::size_t user = 0;
  std::size_t item = 0;
  double rating = 0.0;
};

/// Scores of every catalog item for one user.
using ScoreFn = std::function<std::vector<double>(std::size_t user)>;

struct RankResult {
  double ndcg = 0.0;
  double hit = 0.0;
  std::vector<std::size_t> ranks;  // 1-based, one per eval record
};

/// 1-based rank of `true_item` among `candidates` by descending score, ties
/// broken by ascending item index. Throws if the item is not a candidate.
std::size_t rank_among(std::span<const double> scores, std::span<const std::size_t> candidates,
                       std::size_t true_item);

/// Per user: `n_neg` distinct items outside that user's eval items, drawn from
/// a stream keyed by (seed, user). Identical for every model evaluated on the
/// same records.
std::vector<std::vector<std::size_t>> sample_negatives(std::span<const EvalRecord> records, std::size_t num_items,
                                                       std::size_t n_neg, std::uint64_t seed);

/// Single-relevant-item hit@k and nDCG@k (1/log2(1+rank) when rank <= k).
RankResult rank_metrics(const ScoreFn& scores, std::span<const EvalRecord> records, std::size_t num_items,
                        std::size_t k, const CandidateMode& mode);

struct MetricsReport {
  std::string method;
  double mae = 0.0;
  double rmse = 0.0;
  double ndcg_at_k = 0.0;
  double hit_at_k = 0.0;
  std::size_t k = 20;
  std::size_t n_eval_records = 0;
  std::size_t n_eval_users = 0;
  std::size_t skipped_users = 0;
  nlohmann::json config;

  nlohmann::json to_json() const;
};

}  // namespace diffcdr
