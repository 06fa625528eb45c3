#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "diffcdr/autodiff.hpp"
#include "diffcdr/data.hpp"
#include "diffcdr/param_store.hpp"
#include "diffcdr/tensor.hpp"

namespace diffcdr {

/// Pretrained user/item latent vectors of one domain.
struct EmbeddingTable {
  Tensor users;  // num_users x k
  Tensor items;  // num_items x k

  std::size_t k() const { return users.cols(); }
  std::uint64_t checksum() const;

  ParamStore to_params() const;
  static EmbeddingTable from_params(const ParamStore& store);
};

struct MfConfig {
  std::size_t k = 10;
  std::size_t epochs = 200;
  double lr = 0.01;
  std::size_t batch_size = 512;
  double init_std = 0.1;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

struct MfTrace {
  std::vector<double> epoch_mse;  // per epoch: mean over records of the loss seen during that epoch
};

/// r_hat = u . v, no bias and no clipping.
double predict_rating(std::span<const double> u, std::span<const double> v);

/// (1/|B|) sum (r - u.v)^2 over `batch`, reading "users" and "items" from
/// `tables`.
Var mf_loss(Tape& tape, ParamStore& tables, const std::vector<IndexedRating>& batch);

/// Adam on (1/|B|) sum (r - u.v)^2 over shuffled mini-batches.
EmbeddingTable train_mf(const std::vector<IndexedRating>& records, std::size_t num_users, std::size_t num_items,
                        const MfConfig& cfg, MfTrace* trace = nullptr);

/// MF over the target domain with every test user's target record withheld.
/// Test-user rows keep their initial values.
EmbeddingTable train_tgt(const DomainPair& pair, const ColdSplit& split, const MfConfig& cfg,
                         MfTrace* trace = nullptr);

/// MF over all source records.
EmbeddingTable train_source_mf(const DomainPair& pair, const MfConfig& cfg, MfTrace* trace = nullptr);

/// Collective MF: one user table over the union of both domains' users.
struct CmfModel {
  IdMap users;
  Tensor user_vectors;
  Tensor source_items;
  Tensor target_items;
};

/// Joint MSE over the concatenation of source records and target records.
/// Users index a shared table; target item indices are offset past the
/// source catalog internally.
EmbeddingTable train_joint_mf(const std::vector<IndexedRating>& source, const std::vector<IndexedRating>& target,
                              std::size_t num_users, std::size_t num_source_items, std::size_t num_target_items,
                              const MfConfig& cfg, MfTrace* trace = nullptr);

CmfModel train_cmf(const DomainPair& pair, const ColdSplit& split, const MfConfig& cfg, MfTrace* trace = nullptr);

/// EMCDR mapping network: k -> 2k -> k with SiLU.
class MappingNet {
 public:
  MappingNet(std::size_t k, std::uint64_t seed);

  Var forward(Tape& tape, Var x);
  Tensor apply(const Tensor& x) const;

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

 private:
  ParamStore params_;
};

struct EmcdrConfig {
  std::size_t epochs = 300;
  double lr = 0.005;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

struct UserPairIndex {
  std::uint32_t source_row = 0;
  std::uint32_t target_row = 0;
};

/// Minimizes mean ||f(u_s) - u_t||^2 over `train_users`. Tables are read-only.
MappingNet train_emcdr(const EmbeddingTable& source, const EmbeddingTable& target,
                       const std::vector<UserPairIndex>& train_users, const EmcdrConfig& cfg,
                       std::vector<double>* epoch_loss = nullptr);

std::vector<UserPairIndex> overlap_rows(const DomainPair& pair, const std::vector<std::string>& users);

}  // namespace diffcdr
