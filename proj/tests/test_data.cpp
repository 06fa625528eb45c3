#include <algorithm>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "diffcdr/data.hpp"
#include "diffcdr/rng.hpp"
#include "diffcdr/synth.hpp"

namespace diffcdr {
namespace {

std::vector<RatingRecord> dense_block(const std::string& user_prefix, std::size_t users, const std::string& item_prefix,
                                      std::size_t items) {
  std::vector<RatingRecord> out;
  for (std::size_t u = 0; u < users; ++u)
    for (std::size_t i = 0; i < items; ++i)
      out.push_back({user_prefix + std::to_string(u), item_prefix + std::to_string(i), 3.0, 0});
  return out;
}

std::map<std::string, std::size_t> count_by(const std::vector<RatingRecord>& recs, bool users) {
  std::map<std::string, std::size_t> c;
  for (const auto& r : recs) ++c[users ? r.user_id : r.item_id];
  return c;
}

TEST(Csv, ParsesRowAndPrefixesItem) {
  const auto res = parse_ratings_csv("u1,i1,4.0,100\n", "src");
  ASSERT_EQ(res.records.size(), 1u);
  EXPECT_EQ(res.records[0], (RatingRecord{"u1", "src:i1", 4.0, 100}));
  EXPECT_EQ(res.clamped, 0u);
}

TEST(Csv, HeaderIsOptional) {
  const auto res = parse_ratings_csv("user_id,item_id,rating,timestamp\nu1,i1,4.0,100\n", "tgt");
  ASSERT_EQ(res.records.size(), 1u);
  EXPECT_EQ(res.records[0].item_id, "tgt:i1");
}

TEST(Csv, ClampsOutOfRangeRatings) {
  const auto res = parse_ratings_csv("u1,i1,5.5,1\nu1,i2,-1,2\n", "src");
  EXPECT_EQ(res.records[0].rating, 5.0);
  EXPECT_EQ(res.records[1].rating, 0.0);
  EXPECT_EQ(res.clamped, 2u);
}

TEST(Csv, WrongArityNamesTheLine) {
  try {
    parse_ratings_csv("u1,i1,4.0,1\nu2,i2,3.0\n", "src", "ratings.csv");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("ratings.csv:2"), std::string::npos) << e.what();
  }
}

TEST(Csv, EmptyInputRejected) { EXPECT_THROW(parse_ratings_csv("", "src"), DataError); }

TEST(FiveCore, BoundaryUserRetained) {
  auto recs = dense_block("u", 5, "i", 5);
  EXPECT_EQ(five_core_filter(recs).size(), 25u);
}

TEST(FiveCore, SparseUserRemoved) {
  auto recs = dense_block("u", 6, "i", 6);
  for (int i = 0; i < 4; ++i) recs.push_back({"sparse", "i" + std::to_string(i), 1.0, 0});
  const auto out = five_core_filter(recs);
  EXPECT_EQ(count_by(out, true).count("sparse"), 0u);
  EXPECT_EQ(out.size(), 36u);
}

TEST(FiveCore, CascadesToFixedPoint) {
  // Item "x" has exactly five raters; one of them has four ratings in total,
  // so removing that user drops "x" to four and "x" must go too.
  auto recs = dense_block("u", 6, "i", 6);
  for (int u = 0; u < 4; ++u) recs.push_back({"u" + std::to_string(u), "x", 2.0, 0});
  for (int i = 0; i < 3; ++i) recs.push_back({"weak", "i" + std::to_string(i), 2.0, 0});
  recs.push_back({"weak", "x", 2.0, 0});
  const auto out = five_core_filter(recs);
  EXPECT_EQ(count_by(out, true).count("weak"), 0u);
  EXPECT_EQ(count_by(out, false).count("x"), 0u);
  for (const auto& [_, n] : count_by(out, true)) EXPECT_GE(n, 5u);
  for (const auto& [_, n] : count_by(out, false)) EXPECT_GE(n, 5u);
}

TEST(FiveCore, DegenerateInputRejected) {
  EXPECT_THROW(five_core_filter(dense_block("u", 2, "i", 2)), DataError);
}

// The k-core is the union of all node subsets in which every kept node keeps
// at least k edges; enumerate every subset of a 10-node bipartite graph.
TEST(FiveCore, MatchesBruteForceOnToyGraphs) {
  constexpr std::size_t kUsers = 5, kItems = 5, kMin = 2;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::vector<RatingRecord> recs;
    bool edge[kUsers][kItems] = {};
    for (std::size_t u = 0; u < kUsers; ++u)
      for (std::size_t i = 0; i < kItems; ++i)
        if (rng.bernoulli(0.45)) {
          edge[u][i] = true;
          recs.push_back({"u" + std::to_string(u), "i" + std::to_string(i), 1.0, 0});
        }
    if (recs.empty()) continue;

    unsigned best = 0;
    for (unsigned mask = 1; mask < (1u << (kUsers + kItems)); ++mask) {
      bool ok = true;
      for (std::size_t n = 0; n < kUsers + kItems && ok; ++n) {
        if (!(mask >> n & 1u)) continue;
        std::size_t deg = 0;
        if (n < kUsers) {
          for (std::size_t i = 0; i < kItems; ++i) deg += edge[n][i] && (mask >> (kUsers + i) & 1u);
        } else {
          for (std::size_t u = 0; u < kUsers; ++u) deg += edge[u][n - kUsers] && (mask >> u & 1u);
        }
        ok = deg >= kMin;
      }
      if (ok) best |= mask;
    }
    std::set<std::string> expected_users, got_users;
    for (std::size_t u = 0; u < kUsers; ++u)
      if (best >> u & 1u) expected_users.insert("u" + std::to_string(u));

    if (best == 0) {
      EXPECT_THROW(five_core_filter(recs, kMin), DataError) << "seed " << seed;
      continue;
    }
    for (const auto& r : five_core_filter(recs, kMin)) got_users.insert(r.user_id);
    EXPECT_EQ(got_users, expected_users) << "seed " << seed;
  }
}

TEST(DomainPair, OverlapIsIntersection) {
  std::vector<RatingRecord> src = {{"a", "src:1", 1, 0}, {"b", "src:1", 1, 0}};
  std::vector<RatingRecord> tgt = {{"b", "tgt:1", 1, 0}, {"c", "tgt:1", 1, 0}};
  const auto pair = build_domain_pair(src, tgt);
  EXPECT_EQ(pair.overlap_users, std::vector<std::string>{"b"});
}

TEST(DomainPair, IdenticalUsersFullyOverlap) {
  std::vector<RatingRecord> src = {{"a", "src:1", 1, 0}, {"b", "src:1", 1, 0}};
  std::vector<RatingRecord> tgt = {{"a", "tgt:1", 1, 0}, {"b", "tgt:1", 1, 0}};
  EXPECT_EQ(build_domain_pair(src, tgt).overlap_users.size(), 2u);
}

TEST(DomainPair, DisjointUsersRejected) {
  std::vector<RatingRecord> src = {{"a", "src:1", 1, 0}};
  std::vector<RatingRecord> tgt = {{"c", "tgt:1", 1, 0}};
  EXPECT_THROW(build_domain_pair(src, tgt), DataError);
}

TEST(DomainPair, IdMapsRoundTripInSortedOrder) {
  std::vector<RatingRecord> src = {{"zed", "src:1", 1, 0}, {"amy", "src:2", 1, 0}};
  std::vector<RatingRecord> tgt = {{"zed", "tgt:1", 1, 0}};
  const auto pair = build_domain_pair(src, tgt);
  EXPECT_EQ(pair.source.users.at("amy"), 0u);
  EXPECT_EQ(pair.source.users.at("zed"), 1u);
  for (std::uint32_t i = 0; i < pair.source.users.size(); ++i) {
    EXPECT_EQ(pair.source.users.at(pair.source.users.id(i)), i);
  }
}

DomainPair overlap_pair(std::size_t n) {
  std::vector<RatingRecord> src, tgt;
  for (std::size_t u = 0; u < n; ++u) {
    src.push_back({"u" + std::to_string(u), "src:1", 1, 0});
    tgt.push_back({"u" + std::to_string(u), "tgt:1", 1, 0});
  }
  return build_domain_pair(src, tgt);
}

TEST(ColdSplit, FloorOfBetaTimesOverlap) {
  const auto split = split_cold_start(overlap_pair(100), SplitSpec{0.2, 7});
  EXPECT_EQ(split.test_users.size(), 20u);
  EXPECT_EQ(split.train_users.size(), 80u);
}

TEST(ColdSplit, SmallOverlapHighBeta) {
  const auto split = split_cold_start(overlap_pair(10), SplitSpec{0.8, 1});
  EXPECT_EQ(split.test_users.size(), 8u);
  EXPECT_EQ(split.train_users.size(), 2u);
}

TEST(ColdSplit, DeterministicPerSeed) {
  const auto pair = overlap_pair(50);
  const auto a = split_cold_start(pair, SplitSpec{0.5, 3});
  const auto b = split_cold_start(pair, SplitSpec{0.5, 3});
  const auto c = split_cold_start(pair, SplitSpec{0.5, 4});
  EXPECT_EQ(a.test_users, b.test_users);
  EXPECT_NE(a.test_users, c.test_users);
}

TEST(ColdSplit, EmptyTestSetRejected) {
  EXPECT_THROW(split_cold_start(overlap_pair(3), SplitSpec{0.2, 0}), DataError);
  EXPECT_THROW(split_cold_start(overlap_pair(3), SplitSpec{1.0, 0}), DataError);
}

TEST(ColdSplit, TrainingRecordsExcludeTestUsers) {
  SynthConfig sc;
  sc.n_users = 100;
  sc.n_items_per_domain = 50;
  sc.ratings_per_user = 10;
  const auto data = synth_generate(sc);
  const auto pair = build_domain_pair(data.source_records, data.target_records);
  const auto split = split_cold_start(pair, SplitSpec{0.5, 2});
  const auto training = cold_target_training_records(pair, split);
  const std::set<std::string> test(split.test_users.begin(), split.test_users.end());
  for (const auto& r : training) EXPECT_EQ(test.count(r.user_id), 0u);
  EXPECT_NO_THROW(assert_no_leakage(training, split.test_users));
  auto leaked = training;
  leaked.push_back(test_user_target_records(pair, split).front());
  EXPECT_THROW(assert_no_leakage(leaked, split.test_users), DataError);
}

TEST(WarmSplit, ChronologicalHalves) {
  std::vector<RatingRecord> recs;
  for (int t = 4; t >= 1; --t) recs.push_back({"u", "tgt:i" + std::to_string(t), 3.0, t});
  const auto split = split_warm_start(recs, SplitSpec{0.5, 0, 0.5});
  ASSERT_EQ(split.finetune.size(), 2u);
  EXPECT_EQ(split.finetune[0].timestamp, 1);
  EXPECT_EQ(split.finetune[1].timestamp, 2);
  EXPECT_EQ(split.eval[0].timestamp, 3);
  EXPECT_EQ(split.eval[1].timestamp, 4);
}

TEST(WarmSplit, OddCountFloors) {
  std::vector<RatingRecord> recs = {{"u", "a", 1, 1}, {"u", "b", 1, 2}, {"u", "c", 1, 3}};
  const auto split = split_warm_start(recs, SplitSpec{0.5, 0, 0.5});
  EXPECT_EQ(split.finetune.size(), 1u);
  EXPECT_EQ(split.eval.size(), 2u);
}

TEST(WarmSplit, TiesBrokenByItemId) {
  std::vector<RatingRecord> recs = {{"u", "b", 1, 5}, {"u", "a", 1, 5}};
  const auto split = split_warm_start(recs, SplitSpec{0.5, 0, 0.5});
  ASSERT_EQ(split.finetune.size(), 1u);
  EXPECT_EQ(split.finetune[0].item_id, "a");
}

TEST(WarmSplit, SingleRecordUserGoesToEval) {
  std::vector<RatingRecord> recs = {{"u", "a", 1, 5}};
  const auto split = split_warm_start(recs, SplitSpec{0.5, 0, 0.5});
  EXPECT_TRUE(split.finetune.empty());
  EXPECT_EQ(split.eval.size(), 1u);
  EXPECT_EQ(split.users_without_finetune, 1u);
}

TEST(Synth, NoiselessTargetIsAffineImage) {
  SynthConfig sc;
  sc.n_users = 50;
  sc.n_items_per_domain = 40;
  sc.ratings_per_user = 10;
  sc.noise_std = 0.0;
  const auto data = synth_generate(sc);
  const auto& a = data.truth.map_matrix;
  const auto& b = data.truth.map_offset;
  for (const auto& [user, s] : data.truth.source_users) {
    const auto& t = data.truth.target_users.at(user);
    for (std::size_t r = 0; r < sc.k; ++r) {
      double acc = b[r];
      for (std::size_t c = 0; c < sc.k; ++c) acc += a(r, c) * s[c];
      EXPECT_NEAR(t[r], acc, 1e-12);
    }
  }
}

TEST(Synth, SameSeedSameData) {
  SynthConfig sc;
  sc.n_users = 60;
  sc.n_items_per_domain = 30;
  sc.ratings_per_user = 10;
  sc.seed = 11;
  const auto a = synth_generate(sc);
  const auto b = synth_generate(sc);
  EXPECT_EQ(a.source_records, b.source_records);
  EXPECT_EQ(a.target_records, b.target_records);
}

TEST(Synth, RatingIsMuPlusDotWithoutNoise) {
  SynthConfig sc;
  sc.n_users = 40;
  sc.n_items_per_domain = 20;
  sc.ratings_per_user = 10;
  sc.obs_noise_std = 0.0;
  const auto data = synth_generate(sc);
  for (const auto& r : data.target_records) {
    const auto& u = data.truth.target_users.at(r.user_id);
    const auto& v = data.truth.target_items.at(r.item_id);
    double dot = 0.0;
    for (std::size_t i = 0; i < sc.k; ++i) dot += u[i] * v[i];
    EXPECT_NEAR(r.rating, std::clamp(sc.mu + dot, 0.0, 5.0), 1e-12);
  }
}

TEST(Synth, TooFewInteractionsRejected) {
  SynthConfig sc;
  sc.n_users = 10;
  sc.n_items_per_domain = 100;
  sc.ratings_per_user = 10;
  EXPECT_THROW(synth_generate(sc), std::invalid_argument);
  sc.ratings_per_user = 4;
  EXPECT_THROW(synth_generate(sc), std::invalid_argument);
}

}  // namespace
}  // namespace diffcdr
