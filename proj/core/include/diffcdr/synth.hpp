#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "diffcdr/data.hpp"
#include "diffcdr/tensor.hpp"

namespace diffcdr {

struct SynthConfig {
  std::size_t n_users = 1000;             // users per domain
  std::size_t n_items_per_domain = 500;
  std::size_t k = 10;
  double overlap_fraction = 1.0;
  double noise_std = 0.2;                 // cross-domain user noise
  double obs_noise_std = 0.1;             // rating observation noise
  double mu = 3.0;
  double dot_std = 1.0;                   // std of u.v; sqrt(k) gives unit-variance coordinates
  std::size_t ratings_per_user = 50;      // per user per domain
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& doc);
};

/// Generating vectors for oracle checks, keyed by user/item id.
struct SynthTruth {
  std::map<std::string, std::vector<double>> source_users;
  std::map<std::string, std::vector<double>> target_users;
  std::map<std::string, std::vector<double>> source_items;
  std::map<std::string, std::vector<double>> target_items;
  Tensor map_matrix;  // A (k x k), target = A * source + b + noise
  Tensor map_offset;  // b (k)
};

struct SynthData {
  std::vector<RatingRecord> source_records;
  std::vector<RatingRecord> target_records;
  SynthTruth truth;
};

inline const std::string kSourceTag = "src";
inline const std::string kTargetTag = "tgt";

/// Two-domain dataset whose target user vectors are an affine image of the
/// source vectors plus Gaussian noise.
SynthData synth_generate(const SynthConfig& cfg);

nlohmann::json synth_truth_to_json(const SynthTruth& truth);

}  // namespace diffcdr
