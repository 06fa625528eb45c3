#include "diffcdr/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_set>

#include "diffcdr/io.hpp"
#include "diffcdr/log.hpp"
#include "diffcdr/rng.hpp"

namespace diffcdr {

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  // from_chars for double is available in libstdc++ 11.
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

bool parse_int(std::string_view s, std::int64_t& out) {
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace

LoadResult parse_ratings_csv(const std::string& text, const std::string& domain_tag, const std::string& source_name) {
  LoadResult result;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool first_data_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_commas(line);
    if (fields.size() != 4) {
      throw DataError(source_name + ":" + std::to_string(line_no) + ": expected 4 fields, got " +
                      std::to_string(fields.size()));
    }
    double rating = 0.0;
    std::int64_t ts = 0;
    const bool numeric = parse_double(fields[2], rating) && parse_int(fields[3], ts);
    if (!numeric) {
      if (first_data_line) {  // header row
        first_data_line = false;
        continue;
      }
      throw DataError(source_name + ":" + std::to_string(line_no) + ": cannot parse rating/timestamp");
    }
    first_data_line = false;
    if (fields[0].empty() || fields[1].empty()) {
      throw DataError(source_name + ":" + std::to_string(line_no) + ": empty user or item id");
    }
    if (!std::isfinite(rating)) throw DataError(source_name + ":" + std::to_string(line_no) + ": non-finite rating");
    if (ts < 0) throw DataError(source_name + ":" + std::to_string(line_no) + ": negative timestamp");
    if (rating < 0.0 || rating > 5.0) {
      rating = std::clamp(rating, 0.0, 5.0);
      ++result.clamped;
    }
    result.records.push_back({std::string(fields[0]), domain_tag + ":" + std::string(fields[1]), rating, ts});
  }
  if (result.records.empty()) throw DataError(source_name + ": no rating rows");
  if (result.clamped) log::warn(source_name + ": clamped " + std::to_string(result.clamped) + " ratings into [0,5]");
  return result;
}

LoadResult load_ratings_csv(const std::filesystem::path& path, const std::string& domain_tag) {
  if (!std::filesystem::exists(path)) throw DataError("ratings file not found: " + path.string());
  return parse_ratings_csv(read_file(path), domain_tag, path.string());
}

void write_ratings_csv(const std::filesystem::path& path, const std::vector<RatingRecord>& records,
                       const std::string& strip_prefix) {
  std::ostringstream os;
  os.precision(17);
  os << "user_id,item_id,rating,timestamp\n";
  for (const auto& r : records) {
    std::string_view item = r.item_id;
    if (!strip_prefix.empty() && item.starts_with(strip_prefix)) item.remove_prefix(strip_prefix.size());
    os << r.user_id << ',' << item << ',' << r.rating << ',' << r.timestamp << '\n';
  }
  write_file_atomic(path, os.str());
}

std::vector<RatingRecord> five_core_filter(const std::vector<RatingRecord>& records, std::size_t min_count) {
  if (records.empty()) throw DataError("five_core_filter: empty input");
  std::vector<bool> alive(records.size(), true);
  bool changed = true;
  while (changed) {
    changed = false;
    std::unordered_map<std::string, std::size_t> user_count, item_count;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (!alive[i]) continue;
      ++user_count[records[i].user_id];
      ++item_count[records[i].item_id];
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (!alive[i]) continue;
      if (user_count[records[i].user_id] < min_count || item_count[records[i].item_id] < min_count) {
        alive[i] = false;
        changed = true;
      }
    }
  }
  std::vector<RatingRecord> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (alive[i]) out.push_back(records[i]);
  if (out.empty()) throw DataError("dataset degenerate under 5-core");
  return out;
}

IdMap::IdMap(std::vector<std::string> ids) : ids_(std::move(ids)) {
  std::sort(ids_.begin(), ids_.end());
  ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
  index_.reserve(ids_.size());
  for (std::uint32_t i = 0; i < ids_.size(); ++i) index_.emplace(ids_[i], i);
}

std::uint32_t IdMap::at(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw DataError("unknown id '" + id + "'");
  return it->second;
}

namespace {

Domain make_domain(std::vector<RatingRecord> records) {
  std::vector<std::string> users, items;
  users.reserve(records.size());
  items.reserve(records.size());
  for (const auto& r : records) {
    users.push_back(r.user_id);
    items.push_back(r.item_id);
  }
  return Domain{std::move(records), IdMap(std::move(users)), IdMap(std::move(items))};
}

}  // namespace

DomainPair build_domain_pair(std::vector<RatingRecord> source_records, std::vector<RatingRecord> target_records) {
  DomainPair pair{make_domain(std::move(source_records)), make_domain(std::move(target_records)), {}};
  std::set_intersection(pair.source.users.ids().begin(), pair.source.users.ids().end(),
                        pair.target.users.ids().begin(), pair.target.users.ids().end(),
                        std::back_inserter(pair.overlap_users));
  if (pair.overlap_users.empty()) throw DataError("source and target domains share no users");
  for (const auto& item : pair.source.items.ids()) {
    if (pair.target.items.contains(item)) throw DataError("item id '" + item + "' appears in both domains");
  }
  return pair;
}

std::vector<IndexedRating> index_records(const Domain& domain, const std::vector<RatingRecord>& records) {
  std::vector<IndexedRating> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({domain.users.at(r.user_id), domain.items.at(r.item_id), r.rating});
  return out;
}

void SplitSpec::validate() const {
  if (!(beta > 0.0 && beta < 1.0)) throw DataError("split.beta must lie in (0,1)");
  if (!(warm_fraction >= 0.0 && warm_fraction < 1.0)) throw DataError("split.warm_fraction must lie in [0,1)");
}

ColdSplit split_cold_start(const DomainPair& pair, const SplitSpec& spec) {
  spec.validate();
  const auto n_test = static_cast<std::size_t>(std::floor(spec.beta * static_cast<double>(pair.overlap_users.size())));
  if (n_test == 0) throw DataError("split leaves no test users (beta too small for overlap size)");
  auto users = pair.overlap_users;
  Rng rng = Rng(spec.seed).split("cold_split");
  rng.shuffle(users);
  ColdSplit split;
  split.test_users.assign(users.begin(), users.begin() + static_cast<std::ptrdiff_t>(n_test));
  split.train_users.assign(users.begin() + static_cast<std::ptrdiff_t>(n_test), users.end());
  std::sort(split.test_users.begin(), split.test_users.end());
  std::sort(split.train_users.begin(), split.train_users.end());
  return split;
}

std::vector<RatingRecord> cold_target_training_records(const DomainPair& pair, const ColdSplit& split) {
  std::unordered_set<std::string> test(split.test_users.begin(), split.test_users.end());
  std::vector<RatingRecord> out;
  for (const auto& r : pair.target.records)
    if (!test.count(r.user_id)) out.push_back(r);
  return out;
}

std::vector<RatingRecord> test_user_target_records(const DomainPair& pair, const ColdSplit& split) {
  std::unordered_set<std::string> test(split.test_users.begin(), split.test_users.end());
  std::vector<RatingRecord> out;
  for (const auto& r : pair.target.records)
    if (test.count(r.user_id)) out.push_back(r);
  return out;
}

void assert_no_leakage(const std::vector<RatingRecord>& training, const std::vector<std::string>& test_users) {
  std::unordered_set<std::string> test(test_users.begin(), test_users.end());
  for (const auto& r : training) {
    if (test.count(r.user_id)) {
      throw DataError("cold-start leakage: test user '" + r.user_id + "' has record on '" + r.item_id +
                      "' in training data");
    }
  }
}

WarmSplit split_warm_start(const std::vector<RatingRecord>& records, const SplitSpec& spec) {
  spec.validate();
  std::map<std::string, std::vector<RatingRecord>> by_user;
  for (const auto& r : records) by_user[r.user_id].push_back(r);
  WarmSplit out;
  for (auto& [user, recs] : by_user) {
    std::sort(recs.begin(), recs.end(), [](const RatingRecord& a, const RatingRecord& b) {
      if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
      return a.item_id < b.item_id;
    });
    std::size_t n_ft = 0;
    if (recs.size() < 2) {
      ++out.users_without_finetune;
      log::debug("warm split: user '" + user + "' has <2 records; all go to eval");
    } else {
      n_ft = static_cast<std::size_t>(std::floor(spec.warm_fraction * static_cast<double>(recs.size())));
    }
    out.finetune.insert(out.finetune.end(), recs.begin(), recs.begin() + static_cast<std::ptrdiff_t>(n_ft));
    out.eval.insert(out.eval.end(), recs.begin() + static_cast<std::ptrdiff_t>(n_ft), recs.end());
  }
  return out;
}

nlohmann::json split_manifest(const SplitSpec& spec, const ColdSplit& split) {
  return {{"beta", spec.beta},
          {"seed", spec.seed},
          {"warm_fraction", spec.warm_fraction},
          {"train_users", split.train_users},
          {"test_users", split.test_users}};
}

}  // namespace diffcdr
