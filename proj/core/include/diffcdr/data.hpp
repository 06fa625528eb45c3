#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace diffcdr {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RatingRecord {
  std::string user_id;
  std::string item_id;
  double rating = 0.0;
  std::int64_t timestamp = 0;

  bool operator==(const RatingRecord&) const = default;
};

struct LoadResult {
  std::vector<RatingRecord> records;
  std::size_t clamped = 0;
};

/// Parses `user_id,item_id,rating,timestamp` rows (optional header). Item ids
/// come back as "<domain_tag>:<item_id>"; ratings outside [0,5] are clamped
/// and counted.
LoadResult load_ratings_csv(const std::filesystem::path& path, const std::string& domain_tag);
LoadResult parse_ratings_csv(const std::string& text, const std::string& domain_tag,
                             const std::string& source_name = "<memory>");
void write_ratings_csv(const std::filesystem::path& path, const std::vector<RatingRecord>& records,
                       const std::string& strip_prefix = "");

/// Iteratively drops users and items with fewer than `min_count` records
/// until every survivor meets the threshold.
std::vector<RatingRecord> five_core_filter(const std::vector<RatingRecord>& records, std::size_t min_count = 5);

/// Bijection between string ids and dense indices, assigned in sorted order.
class IdMap {
 public:
  IdMap() = default;
  explicit IdMap(std::vector<std::string> ids);

  std::size_t size() const { return ids_.size(); }
  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  std::uint32_t at(const std::string& id) const;
  const std::string& id(std::uint32_t index) const { return ids_.at(index); }
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct Domain {
  std::vector<RatingRecord> records;
  IdMap users;
  IdMap items;
};

struct DomainPair {
  Domain source;
  Domain target;
  std::vector<std::string> overlap_users;  // sorted
};

DomainPair build_domain_pair(std::vector<RatingRecord> source_records, std::vector<RatingRecord> target_records);

/// Rating addressed by dense indices of one domain.
struct IndexedRating {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  double rating = 0.0;
};

std::vector<IndexedRating> index_records(const Domain& domain, const std::vector<RatingRecord>& records);

struct SplitSpec {
  double beta = 0.2;
  std::uint64_t seed = 0;
  double warm_fraction = 0.5;

  void validate() const;
};

struct ColdSplit {
  std::vector<std::string> train_users;  // sorted
  std::vector<std::string> test_users;   // sorted
};

ColdSplit split_cold_start(const DomainPair& pair, const SplitSpec& spec);

/// Target-domain records usable for training under the cold protocol: every
/// target record whose user is not a test user.
std::vector<RatingRecord> cold_target_training_records(const DomainPair& pair, const ColdSplit& split);
std::vector<RatingRecord> test_user_target_records(const DomainPair& pair, const ColdSplit& split);

/// Throws DataError if any record in `training` belongs to a test user.
void assert_no_leakage(const std::vector<RatingRecord>& training, const std::vector<std::string>& test_users);

struct WarmSplit {
  std::vector<RatingRecord> finetune;
  std::vector<RatingRecord> eval;
  std::size_t users_without_finetune = 0;
};

/// Per user: chronological order (ties by item id), the earliest
/// floor(warm_fraction * n) records go to finetune.
WarmSplit split_warm_start(const std::vector<RatingRecord>& test_user_target_records, const SplitSpec& spec);

nlohmann::json split_manifest(const SplitSpec& spec, const ColdSplit& split);

}  // namespace diffcdr
