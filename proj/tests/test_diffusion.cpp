#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "diffcdr/score_network.hpp"
#include "support.hpp"

namespace diffcdr {
namespace {

TEST(Schedule, EndpointValues) {
  const NoiseSchedule s;
  EXPECT_EQ(s.alpha(0.0), 1.0);
  EXPECT_EQ(s.sigma(0.0), 0.0);
  EXPECT_EQ(s.lambda(0.0), std::numeric_limits<double>::max());
  EXPECT_NEAR(s.alpha(1.0), std::exp(-5.025), 1e-9);
  EXPECT_NEAR(s.log_alpha(0.5), -1.26875, 1e-12);
}

TEST(Schedule, VariancePreservingAndMonotone) {
  const NoiseSchedule s;
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= 10000; ++i) {
    const double t = i / 10000.0;
    const auto v = s.values(t);
    EXPECT_NEAR(v.alpha * v.alpha + v.sigma * v.sigma, 1.0, 1e-12);
    EXPECT_LT(v.lambda, prev) << "t=" << t;
    prev = v.lambda;
  }
}

TEST(Schedule, LambdaInverseRoundTrips) {
  const NoiseSchedule s;
  for (double t : {1e-3, 0.01, 0.2, 0.5, 0.9, 1.0}) EXPECT_NEAR(s.t_from_lambda(s.lambda(t)), t, 1e-9);
  EXPECT_THROW(s.t_from_lambda(s.lambda(1.0) - 1.0), std::domain_error);
}

TEST(Schedule, DiffusionEqualsBeta) {
  const NoiseSchedule s;
  for (double t : {0.0, 0.25, 0.5, 1.0}) EXPECT_NEAR(s.diffusion_sq(t), 0.1 + t * 19.9, 1e-9);
}

TEST(Schedule, RejectsTimesOutsideUnitInterval) {
  const NoiseSchedule s;
  EXPECT_THROW(s.alpha(-0.1), std::domain_error);
  EXPECT_THROW(s.alpha(1.5), std::domain_error);
  EXPECT_THROW(NoiseSchedule(0.0, 20.0), std::invalid_argument);
}

TEST(QSample, EndpointsAndMixture) {
  const NoiseSchedule s;
  const auto x0 = Tensor::matrix(1, 2, {1.0, -2.0});
  const auto eps = Tensor::matrix(1, 2, {0.5, 0.5});
  EXPECT_EQ(q_sample(s, x0, 0.0, eps), x0);
  const auto mid = q_sample(s, x0, 0.5, eps);
  EXPECT_NEAR(mid[0], s.alpha(0.5) * 1.0 + s.sigma(0.5) * 0.5, 1e-15);
}

TEST(QSample, MonteCarloMoments) {
  const NoiseSchedule s;
  Rng rng(11);
  const std::size_t n = 20000;
  const auto x0 = Tensor::filled({n, 1}, 2.0);
  const auto xt = q_sample(s, x0, 0.3, rng.normal_tensor({n, 1}));
  const double mean = ops::mean(xt);
  double var = 0.0;
  for (double x : xt.data()) var += (x - mean) * (x - mean) / static_cast<double>(n);
  EXPECT_NEAR(mean, 2.0 * s.alpha(0.3), 0.03);
  EXPECT_NEAR(var, s.sigma(0.3) * s.sigma(0.3), 0.03);
}

TEST(TimeEmbedding, ValuesAndDistinctness) {
  const auto e0 = time_embedding(0.0, 8);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_EQ(e0[2 * j], 0.0);
    EXPECT_EQ(e0[2 * j + 1], 1.0);
  }
  const auto e = time_embedding(0.5, 4, 2.0);
  EXPECT_NEAR(e[0], std::sin(1.0), 1e-15);
  EXPECT_NEAR(e[2], std::sin(1.0 / 100.0), 1e-15);
  EXPECT_THROW(time_embedding(0.5, 5), std::invalid_argument);
  std::set<std::vector<double>> seen;
  for (int i = 0; i <= 1000; ++i) seen.insert(time_embedding(i / 1000.0));
  EXPECT_EQ(seen.size(), 1001u);
}

ScoreNetwork random_net(std::uint64_t seed, std::size_t hidden = 128, std::size_t time_dim = 64) {
  ScoreNetwork net(ScoreNetConfig{.k = 10, .hidden = hidden, .time_dim = time_dim, .seed = seed});
  // The last layer starts at zero; randomize it so every path carries signal.
  Rng rng(seed + 100);
  net.params().mutable_value("mlp.2.w") = rng.normal_tensor({hidden, 10}, 0.1);
  net.params().mutable_value("mlp.2.b") = rng.normal_tensor({10}, 0.1);
  return net;
}

TEST(ScoreNetwork, ZeroInitPredictsZero) {
  const ScoreNetwork net;
  Rng rng(1);
  const auto x = rng.normal_tensor({4, 10});
  const auto c = rng.normal_tensor({4, 10});
  EXPECT_EQ(net.predict(x, 0.3, &c), Tensor::zeros({4, 10}));
  EXPECT_EQ(net.predict(x, 0.3, nullptr), Tensor::zeros({4, 10}));
}

TEST(ScoreNetwork, AbsentConditionEqualsMaskedCondition) {
  auto net = random_net(2);
  Rng rng(3);
  const auto x = rng.normal_tensor({3, 10});
  const auto c = rng.normal_tensor({3, 10});
  const std::vector<double> t(3, 0.4), zeros(3, 0.0);
  const auto absent = net.predict(x, t, nullptr);
  Tape tape;
  const auto masked = net.forward(tape, tape.input(x), t, &c, zeros).value();
  EXPECT_EQ(absent, masked);
  EXPECT_NE(net.predict(x, t, &c), absent);
}

TEST(ScoreNetwork, RejectsBadShapes) {
  const ScoreNetwork net;
  EXPECT_THROW(net.predict(Tensor::zeros({2, 3}), 0.5, nullptr), ShapeError);
  const auto c = Tensor::zeros({3, 10});
  EXPECT_THROW(net.predict(Tensor::zeros({2, 10}), 0.5, &c), ShapeError);
}

TEST(Guidance, EndpointsAreBitwiseAndMixIsAffine) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto net = random_net(seed);
    Rng rng(seed);
    const auto x = rng.normal_tensor({6, 10});
    const auto c = rng.normal_tensor({6, 10});
    const auto eu = net.predict(x, 0.37, nullptr);
    const auto ec = net.predict(x, 0.37, &c);
    EXPECT_EQ(guided_score(net, x, 0.37, c, 0.0), eu);
    EXPECT_EQ(guided_score(net, x, 0.37, c, 1.0), ec);
    const auto mixed = guided_score(net, x, 0.37, c, 2.5);
    for (std::size_t i = 0; i < mixed.size(); ++i) EXPECT_NEAR(mixed[i], eu[i] + 2.5 * (ec[i] - eu[i]), 1e-12);
  }
}

TEST(DimLoss, ZeroNetworkGivesNoiseEnergy) {
  ScoreNetwork net;
  Rng rng(4);
  const auto x0 = rng.normal_tensor({4000, 10});
  Tape tape;
  const double loss = dim_loss(tape, net, x0, x0, NoiseSchedule(), 0.1, rng).value().item();
  EXPECT_NEAR(loss, 10.0, 0.3);
}

TEST(DimLoss, L1NormOption) {
  ScoreNetwork net;
  Rng rng(4);
  const auto x0 = rng.normal_tensor({4000, 10});
  Tape tape;
  const double loss = dim_loss(tape, net, x0, x0, NoiseSchedule(), 0.1, rng, DimLossNorm::kL1).value().item();
  EXPECT_NEAR(loss, 10.0 * std::sqrt(2.0 / M_PI), 0.1);
}

TEST(DimLoss, FullMaskCutsConditionGradient) {
  auto net = random_net(5, 16, 8);
  Rng rng(5);
  const auto x0 = rng.normal_tensor({8, 10});
  const auto c = rng.normal_tensor({8, 10});
  const NoiseSchedule s;
  {
    Rng r(1);
    const auto draw = draw_dim_noise(8, 10, s, 1.0, r);
    Tape tape;
    tape.backward(dim_loss(tape, net, x0, c, s, draw));
    EXPECT_EQ(ops::sqnorm(net.params().grad("cond_proj.w")), 0.0);
    net.params().zero_grad();
  }
  {
    Rng r(1);
    const auto draw = draw_dim_noise(8, 10, s, 0.0, r);
    Tape tape;
    tape.backward(dim_loss(tape, net, x0, c, s, draw));
    EXPECT_GT(ops::sqnorm(net.params().grad("cond_proj.w")), 0.0);
    net.params().zero_grad();
  }
}

TEST(DimLoss, MatchesFiniteDifferences) {
  const NoiseSchedule s;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto net = random_net(seed, 16, 8);
    Rng rng(seed);
    const auto x0 = rng.normal_tensor({5, 10});
    const auto c = rng.normal_tensor({5, 10});
    const auto draw = draw_dim_noise(5, 10, s, 0.5, rng);
    for (auto norm : {DimLossNorm::kL2Squared}) {
      const auto check = testing::check_gradients(
          net.params(), [&](Tape& tape) { return dim_loss(tape, net, x0, c, s, draw, norm); });
      EXPECT_LT(check.max_rel_err, 1e-4) << "seed " << seed << " worst " << check.worst;
    }
  }
}

TEST(DimLoss, DrawIsReproducible) {
  const NoiseSchedule s;
  Rng a(9), b(9);
  const auto d1 = draw_dim_noise(16, 10, s, 0.3, a);
  const auto d2 = draw_dim_noise(16, 10, s, 0.3, b);
  EXPECT_EQ(d1.t, d2.t);
  EXPECT_EQ(d1.eps, d2.eps);
  EXPECT_EQ(d1.mask, d2.mask);
  for (double t : d1.t) {
    EXPECT_GE(t, s.t_eps());
    EXPECT_LE(t, 1.0);
  }
}

}  // namespace
}  // namespace diffcdr
