#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "diffcdr/alignment.hpp"
#include "diffcdr/base_models.hpp"
#include "diffcdr/data.hpp"
#include "diffcdr/metrics.hpp"
#include "diffcdr/plan.hpp"
#include "diffcdr/samplers.hpp"
#include "diffcdr/score_network.hpp"

namespace diffcdr {

/// Violation of a training-protocol contract (stop-gradient, frozen bases).
class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct PretrainedBases {
  EmbeddingTable source;  // all source records
  EmbeddingTable target;  // train users' target records only
  MfTrace source_trace;
  MfTrace target_trace;
};

PretrainedBases pretrain_bases(const DomainPair& pair, const ColdSplit& split, const ExperimentPlan& plan);

struct TrainedDiffCDR {
  EmbeddingTable source;
  EmbeddingTable target;
  ScoreNetwork dim;      // trained weights
  ScoreNetwork sampler;  // weights used to generate u_hat (average of dim)
  AlmLayer alm;
  ExperimentPlan plan;
  nlohmann::json manifest;

  /// u_hat for each row of `source_users` (DIM output, or the input itself for
  /// the AT variant). Gaussian init draws come from `rng`.
  Tensor transfer(const Tensor& source_users, Rng& rng) const;
  Tensor transfer(const Tensor& source_users) const;

  /// W u_hat
  Tensor aligned(const Tensor& source_users) const;
};

enum class TrainEvent { kDimStep, kInfer, kAlmStep };

struct TrainHooks {
  std::function<void(TrainEvent, std::size_t epoch, std::size_t batch)> on_event;
};

struct TrainReport {
  std::size_t epochs_run = 0;
  bool stopped_early = false;
  std::vector<double> epoch_dim_loss;
  std::vector<double> epoch_combined_loss;
  std::size_t alm_steps = 0;
  std::size_t stop_gradient_checks = 0;
  bool bases_frozen = false;
  bool leakage_checked = false;

  nlohmann::json to_json() const;
};

/// Alternating optimization over batches of overlap train users: DIM step,
/// then u_hat inference, then an ALM step with u_hat held constant.
TrainedDiffCDR train_diffcdr(const DomainPair& pair, const ColdSplit& split, const PretrainedBases& bases,
                             const ExperimentPlan& plan, TrainReport* report = nullptr,
                             const TrainHooks* hooks = nullptr);

/// Held-out ratings resolved to evaluation rows. `users[i]` owns row i.
struct EvalSet {
  std::vector<std::string> users;
  std::vector<EvalRecord> records;
  std::size_t skipped_users = 0;  // no source embedding
};

/// Groups `records` by user (sorted). Users absent from the source domain are
/// dropped and counted.
EvalSet make_eval_set(const DomainPair& pair, const std::vector<RatingRecord>& records);

/// Scores every eval record with user_vectors[row] . items[item].
MetricsReport evaluate_user_vectors(const std::string& method, const Tensor& user_vectors, const Tensor& items,
                                    const EvalSet& set, const EvalConfig& cfg);

/// Cold-start evaluation on test users' target records, or on `records` when
/// given (e.g. the eval half of a warm split).
MetricsReport evaluate_cold(const TrainedDiffCDR& model, const DomainPair& pair, const ColdSplit& split,
                            const EvalConfig& cfg, const std::vector<RatingRecord>* records = nullptr);

/// Continues training the ALM weight and target item vectors on the task loss
/// over `finetune`; the DIM stays frozen.
TrainedDiffCDR warm_start_finetune(const TrainedDiffCDR& model, const DomainPair& pair,
                                   const std::vector<RatingRecord>& finetune, const WarmConfig& cfg);

/// TGT, CMF or EMCDR through the same evaluation path as DiffCDR.
MetricsReport run_baseline(const std::string& name, const DomainPair& pair, const ColdSplit& split,
                           const PretrainedBases& bases, const ExperimentPlan& plan,
                           const std::vector<RatingRecord>* records = nullptr);

struct ThroughputReport {
  double train_samples_per_sec = 0.0;
  double infer_samples_per_sec = 0.0;
  std::size_t n_users = 0;
  std::size_t repetitions = 0;

  nlohmann::json to_json() const;
};

/// Median over `repetitions` of one alternating training pass and one
/// inference pass over `n_users` sampled train users. Works on a copy.
ThroughputReport bench_throughput(const TrainedDiffCDR& model, const DomainPair& pair, const ColdSplit& split,
                                  std::size_t n_users, std::size_t repetitions = 3);

}  // namespace diffcdr
