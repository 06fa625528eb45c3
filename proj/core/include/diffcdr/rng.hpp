#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "diffcdr/tensor.hpp"

namespace diffcdr {

/// Seeded 64-bit generator with splittable, named sub-streams.
///
/// `split("shuffle")` and `split("noise")` from the same parent are
/// independent and each reproducible from the parent seed alone.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  Rng split(std::uint64_t stream) const;
  Rng split(std::string_view stream) const;

  double uniform();
  double uniform(double lo, double hi);
  double normal();
  std::size_t index(std::size_t n);
  bool bernoulli(double p);

  Tensor normal_tensor(Shape shape, double stddev = 1.0);

  template <class T>
  void shuffle(std::vector<T>& v) {
    // Fisher-Yates with our own index() so results do not depend on the
    // standard library's shuffle implementation.
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace diffcdr
