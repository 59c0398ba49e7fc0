#include "lossnet/meanfield.hpp"
#include "lossnet/model.hpp"
#include "lossnet/transitions.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace lossnet;

namespace {

ModelParams small_two_class() {
  ModelParams p;
  p.K = 2;
  p.C = 2;
  p.A = {1, 1};
  p.alpha = {0.7, 1.3};
  p.gamma = {0.9, 0.4};
  p.delta = {0.2, 0.05};
  return p;
}

Vec random_simplex(std::mt19937_64& gen, std::size_t S) {
  std::exponential_distribution<double> e(1.0);
  Vec y(static_cast<Eigen::Index>(S));
  for (auto& v : y) v = e(gen);
  return y / y.sum();
}

}  // namespace

TEST_CASE("state space sizes and lexicographic order match brute force") {
  for (const auto& p : {oracle::toy(), oracle::two_class(), small_two_class()}) {
    const StateSpace ss = build_state_space(p);
    CHECK(ss.states == oracle::brute_states(p));
    CHECK(ss.states.front() == std::vector<int>(static_cast<std::size_t>(p.K), 0));
  }
  CHECK(build_state_space(oracle::toy()).size() == 2);
  CHECK(build_state_space(oracle::two_class()).size() == 22);
  CHECK(build_state_space(small_two_class()).size() == 6);
}

TEST_CASE("up and down tables are mutually inverse") {
  const StateSpace ss = build_state_space(oracle::two_class());
  for (int k = 0; k < ss.K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    for (std::size_t i = 0; i < ss.size(); ++i) {
      if (ss.up[ku][i] != kNoState) CHECK(ss.down[ku][ss.up[ku][i]] == i);
      if (ss.down[ku][i] != kNoState) CHECK(ss.up[ku][ss.down[ku][i]] == i);
      CHECK((ss.down[ku][i] == kNoState) == (ss.theta(i, k) == 0));
    }
  }
  // The full node (0,1) admits nobody; (20,0) admits nobody either.
  const std::size_t full2 = ss.find({0, 1});
  CHECK(!ss.admits(0, full2));
  CHECK(!ss.admits(1, full2));
  CHECK(!ss.admits(0, ss.find({20, 0})));
  CHECK(ss.admits(1, ss.find({0, 0})));
  CHECK(!ss.admits(1, ss.find({1, 0})));
}

TEST_CASE("parameter validation") {
  auto bad = [](auto mutate) {
    ModelParams p = oracle::two_class();
    mutate(p);
    return p;
  };
  CHECK_THROWS_AS(bad([](ModelParams& p) { p.K = 0; }).validate(), InvalidArgument);
  CHECK_THROWS_AS(bad([](ModelParams& p) { p.alpha.pop_back(); }).validate(), InvalidArgument);
  CHECK_THROWS_AS(bad([](ModelParams& p) { p.alpha[0] = 0.0; }).validate(), InvalidArgument);
  CHECK_THROWS_AS(bad([](ModelParams& p) { p.gamma[1] = -1.0; }).validate(), InvalidArgument);
  CHECK_THROWS_AS(bad([](ModelParams& p) { p.delta[0] = -0.1; }).validate(), InvalidArgument);
  CHECK_THROWS_AS(bad([](ModelParams& p) { p.delta[0] = NAN; }).validate(), InvalidArgument);
  CHECK_THROWS_AS(bad([](ModelParams& p) { p.A[0] = 0; }).validate(), InvalidArgument);
  CHECK_THROWS_AS(bad([](ModelParams& p) { p.C = 0; }).validate(), InvalidArgument);
  CHECK_THROWS_AS(bad([](ModelParams& p) { p.A = {30, 30}; }).validate(), InvalidArgument);
  CHECK_NOTHROW(bad([](ModelParams& p) { p.delta = {0.0, 0.0}; }).validate());

  ModelParams big;
  big.K = 3;
  big.C = 60;
  big.A = {1, 1, 1};
  big.alpha = big.gamma = big.delta = {1, 1, 1};
  CHECK_THROWS_AS(build_state_space(big, 1000), InvalidArgument);
}

TEST_CASE("Occupancy renormalizes small drift and rejects the rest") {
  Vec y(3);
  y << 0.2, 0.3, 0.5 + 5e-10;
  const Occupancy o(y);
  CHECK(o.values().sum() == doctest::Approx(1.0).epsilon(1e-15));
  y[2] = 0.5 + 1e-6;
  CHECK_THROWS_AS(Occupancy{y}, InvalidArgument);
  y << -0.1, 0.6, 0.5;
  CHECK_THROWS_AS(Occupancy{y}, InvalidArgument);

  Vec z(2);
  z << 0.3, -0.3;
  CHECK_NOTHROW(TangentVector{z});
  z[1] = -0.2;
  CHECK_THROWS_AS(TangentVector{z}, InvalidArgument);

  const StateSpace ss = build_state_space(small_two_class());
  CHECK(uniform_occupancy(ss).values().isApproxToConstant(1.0 / 6.0));
}

TEST_CASE("log factorial weights") {
  const StateSpace ss = build_state_space(small_two_class());
  const Vec w = log_factorial_weights(ss);
  for (std::size_t i = 0; i < ss.size(); ++i) {
    double ref = 0.0;
    for (int k = 0; k < 2; ++k) ref += std::lgamma(ss.theta(i, k) + 1.0);
    CHECK(w[static_cast<Eigen::Index>(i)] == doctest::Approx(ref));
  }
}

TEST_CASE("transition table: integral states give nonnegative, conserving jumps") {
  std::mt19937_64 gen(11);
  for (const auto& p : {oracle::toy(), small_two_class(), oracle::two_class()}) {
    const StateSpace ss = build_state_space(p);
    for (long n : {2L, 3L, 7L, 40L}) {
      for (int trial = 0; trial < 20; ++trial) {
        std::vector<long> counts(ss.size(), 0);
        std::uniform_int_distribution<std::size_t> pick(0, ss.size() - 1);
        for (long m = 0; m < n; ++m) ++counts[pick(gen)];
        Vec y(static_cast<Eigen::Index>(ss.size()));
        for (std::size_t i = 0; i < ss.size(); ++i) y[static_cast<Eigen::Index>(i)] = double(counts[i]) / double(n);
        const TransitionTable t = transition_table(ss, p, y, n);
        for (const auto& e : t.entries) {
          CHECK(e.rate >= 0.0);
          int net = 0;
          for (std::uint8_t j = 0; j < e.jump.size; ++j) {
            net += e.jump.coef[j];
            // Rate positive only when the losing state is populated.
            if (e.jump.coef[j] < 0 && e.rate > 0.0) CHECK(counts[e.jump.idx[j]] >= -e.jump.coef[j]);
          }
          CHECK(net == 0);
        }
      }
    }
  }
}

TEST_CASE("transition table approaches the mean-field table and its drift is V") {
  std::mt19937_64 gen(5);
  const ModelParams p = small_two_class();
  const StateSpace ss = build_state_space(p);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec y = random_simplex(gen, ss.size());
    const TransitionTable lim = transition_table(ss, p, y);
    const TransitionTable big = transition_table(ss, p, y, 100000000L);
    REQUIRE(lim.entries.size() == big.entries.size());
    CHECK(big.total_rate() == doctest::Approx(lim.total_rate()).epsilon(1e-6));
    Vec drift = Vec::Zero(y.size());
    for (const auto& e : lim.entries)
      for (std::uint8_t j = 0; j < e.jump.size; ++j)
        drift[static_cast<Eigen::Index>(e.jump.idx[j])] += e.rate * e.jump.coef[j];
    CHECK((drift - vector_field(y, ss, p)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("sup distance") {
  Vec a(3), b(3);
  a << 0.1, 0.5, 0.4;
  b << 0.3, 0.4, 0.3;
  CHECK(sup_distance(a, b) == doctest::Approx(0.2));
}
