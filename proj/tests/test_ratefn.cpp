#include "lossnet/meanfield.hpp"
#include "lossnet/ratefn.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

using namespace lossnet;

namespace {

Vec random_simplex(std::mt19937_64& gen, std::size_t S) {
  std::exponential_distribution<double> e(1.0);
  Vec y(static_cast<Eigen::Index>(S));
  for (auto& v : y) v = 0.02 + e(gen);
  return y / y.sum();
}

Vec random_tangent(std::mt19937_64& gen, std::size_t S, double scale) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec z(static_cast<Eigen::Index>(S));
  for (auto& v : z) v = nd(gen);
  z.array() -= z.mean();
  return scale * z / z.cwiseAbs().maxCoeff();
}

Vec vec(std::initializer_list<double> v) {
  Vec r(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) r[i++] = x;
  return r;
}

ModelParams three_state() {
  ModelParams p = oracle::toy();
  p.C = 2;
  p.alpha = {0.8};
  p.gamma = {1.3};
  p.delta = {0.4};
  return p;
}

/// Same states in a shuffled order, with the neighbour tables rebuilt.
StateSpace permuted(const StateSpace& ss, const std::vector<std::size_t>& order) {
  StateSpace out;
  out.K = ss.K;
  for (std::size_t i : order) out.states.push_back(ss.states[i]);
  for (std::size_t i = 0; i < out.size(); ++i) out.index.emplace(out.states[i], i);
  out.up.assign(static_cast<std::size_t>(ss.K), std::vector<std::size_t>(out.size(), kNoState));
  out.down = out.up;
  for (std::size_t i = 0; i < out.size(); ++i)
    for (int k = 0; k < ss.K; ++k) {
      auto nb = out.states[i];
      ++nb[static_cast<std::size_t>(k)];
      out.up[static_cast<std::size_t>(k)][i] = out.find(nb);
      nb[static_cast<std::size_t>(k)] -= 2;
      out.down[static_cast<std::size_t>(k)][i] = out.find(nb);
    }
  return out;
}

}  // namespace

TEST_CASE("Hamiltonian: zero at lambda = 0, hand expansion on two states, gauge invariance") {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const ModelParams toy = oracle::toy();
  const StateSpace tss = build_state_space(toy);
  const ModelParams p = oracle::two_class();
  const StateSpace ss = build_state_space(p);
  for (int t = 0; t < 50; ++t) {
    const Vec y = random_simplex(gen, 2);
    const Vec lam = vec({u(gen), u(gen)});
    CHECK(hamiltonian(y, lam, tss, toy) == doctest::Approx(oracle::toy_hamiltonian(toy, y, lam)).epsilon(1e-13));
    const Vec Y = random_simplex(gen, ss.size());
    CHECK(hamiltonian(Y, Vec::Zero(Y.size()), ss, p) == 0.0);
    Vec L(Y.size());
    for (auto& v : L) v = u(gen);
    const double shift = u(gen);
    CHECK(hamiltonian(Y, L.array() + shift, ss, p) == doctest::Approx(hamiltonian(Y, L, ss, p)).epsilon(1e-12));
    CHECK(DualVector(L).values()[0] == 0.0);
  }
  Vec big = Vec::Zero(static_cast<Eigen::Index>(ss.size()));
  big[3] = 501.0;
  CHECK_THROWS_AS(hamiltonian(uniform_occupancy(ss).values(), big, ss, p), InvalidArgument);
}

TEST_CASE("grad_lambda H matches central differences and sums to zero") {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const ModelParams p = oracle::two_class();
  const StateSpace ss = build_state_space(p);
  const auto S = static_cast<Eigen::Index>(ss.size());
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Vec y = random_simplex(gen, ss.size());
    Vec lam(S);
    for (auto& v : lam) v = u(gen);
    const Vec g = grad_hamiltonian(y, lam, ss, p);
    CHECK(std::abs(g.sum()) < 1e-10 * (1.0 + g.cwiseAbs().maxCoeff()));
    Vec fd(S);
    for (Eigen::Index i = 0; i < S; ++i) {
      const double h = 1e-6;
      Vec a = lam, b = lam;
      a[i] += h;
      b[i] -= h;
      fd[i] = (hamiltonian(y, a, ss, p) - hamiltonian(y, b, ss, p)) / (2 * h);
    }
    worst = std::max(worst, (g - fd).cwiseAbs().maxCoeff() / std::max(1e-3, fd.cwiseAbs().maxCoeff()));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("grad_y H matches central differences") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const ModelParams p = oracle::two_class();
  const StateSpace ss = build_state_space(p);
  const auto S = static_cast<Eigen::Index>(ss.size());
  for (int t = 0; t < 20; ++t) {
    const Vec y = random_simplex(gen, ss.size());
    Vec lam(S);
    for (auto& v : lam) v = u(gen);
    const Vec g = grad_hamiltonian_y(y, lam, ss, p);
    for (Eigen::Index i = 0; i < S; ++i) {
      const double h = 1e-6;
      Vec a = y, b = y;
      a[i] += h;
      b[i] -= h;
      const double fd = (hamiltonian(a, lam, ss, p) - hamiltonian(b, lam, ss, p)) / (2 * h);
      CHECK(g[i] == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("communication classes") {
  const ModelParams p = three_state();
  const StateSpace ss = build_state_space(p);
  const Partition split = communication_classes(vec({0.5, 0.0, 0.5}), ss);
  REQUIRE(split.size() == 2);
  CHECK(split[0] == std::vector<std::size_t>{0});
  CHECK(split[1] == std::vector<std::size_t>{2});
  CHECK(communication_classes(vec({0.2, 0.3, 0.5}), ss).size() == 1);
  CHECK(communication_classes(vec({0.0, 0.4, 0.6}), ss).size() == 1);

  // Order-free: the same partition of state vectors after shuffling the enumeration.
  const ModelParams q = oracle::two_class();
  const StateSpace base = build_state_space(q);
  std::vector<std::size_t> order(base.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 gen(4);
  std::bernoulli_distribution keep(0.6);
  for (int t = 0; t < 20; ++t) {
    std::shuffle(order.begin(), order.end(), gen);
    const StateSpace perm = permuted(base, order);
    Vec y = Vec::Zero(static_cast<Eigen::Index>(base.size()));
    for (auto& v : y) v = keep(gen) ? 1.0 : 0.0;
    if (y.sum() == 0.0) y[0] = 1.0;
    y /= y.sum();
    Vec yp(y.size());
    for (std::size_t i = 0; i < order.size(); ++i) yp[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(order[i])];
    auto as_sets = [](const Partition& part, const StateSpace& s) {
      std::set<std::set<std::vector<int>>> out;
      for (const auto& c : part) {
        std::set<std::vector<int>> cls;
        for (std::size_t i : c) cls.insert(s.states[i]);
        out.insert(cls);
      }
      return out;
    };
    CHECK(as_sets(communication_classes(y, base), base) == as_sets(communication_classes(yp, perm), perm));
  }
}

TEST_CASE("L on two states equals the golden-section Legendre oracle") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const ModelParams p = oracle::toy();
  const StateSpace ss = build_state_space(p);
  for (int t = 0; t < 40; ++t) {
    const Vec y = random_simplex(gen, 2);
    const double w = u(gen);
    const double a = p.alpha[0] * y[0], b = (p.delta[0] + p.gamma[0] * y[1]) * y[1];
    const RateEval ev = lagrangian(y, vec({-w, w}), ss, p);
    REQUIRE(ev.finite);
    CHECK(std::abs(ev.value - oracle::toy_legendre(a, b, w)) < 1e-7);
  }
}

TEST_CASE("L properties on random interior points of the two-class model") {
  std::mt19937_64 gen(6);
  const ModelParams p = oracle::two_class();
  const StateSpace ss = build_state_space(p);
  for (int t = 0; t < 40; ++t) {
    const Vec y = random_simplex(gen, ss.size());
    const Vec v = vector_field(y, ss, p);
    const RateEval at_v = lagrangian(y, v, ss, p);
    CHECK(at_v.finite);
    CHECK(std::abs(at_v.value) < 1e-9);
    REQUIRE(at_v.maximizer);
    CHECK(at_v.maximizer->values().cwiseAbs().maxCoeff() < 1e-6);

    const Vec z1 = random_tangent(gen, ss.size(), 0.5);
    const Vec z2 = random_tangent(gen, ss.size(), 0.5);
    const RateEval e1 = lagrangian(y, z1, ss, p);
    const RateEval e2 = lagrangian(y, z2, ss, p);
    const RateEval em = lagrangian(y, 0.5 * (z1 + z2), ss, p);
    for (const RateEval* e : {&e1, &e2, &em}) {
      REQUIRE(e->maximizer);
      CHECK(e->value > 0.0);
    }
    CHECK((z1 - grad_hamiltonian(y, e1.maximizer->values(), ss, p)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(e1.value == doctest::Approx(e1.maximizer->values().dot(z1) - hamiltonian(y, e1.maximizer->values(), ss, p)));
    CHECK(em.value <= 0.5 * (e1.value + e2.value) + 1e-8);
  }
}

TEST_CASE("L finiteness rules at the boundary") {
  const ModelParams p = three_state();
  const StateSpace ss = build_state_space(p);
  // Unbalanced classes.
  CHECK_FALSE(lagrangian(vec({0.5, 0.0, 0.5}), vec({-0.1, 0.0, 0.1}), ss, p).finite);
  // Balanced on every class, nothing moves at empty states: finite, no maximizer.
  const RateEval still = lagrangian(vec({0.5, 0.0, 0.5}), vec({0.0, 0.0, 0.0}), ss, p);
  CHECK(still.finite);
  CHECK_FALSE(still.maximizer);
  CHECK(still.value >= 0.0);
  // Mass leaving an empty state.
  CHECK_FALSE(lagrangian(vec({0.5, 0.0, 0.5}), vec({0.05, -0.1, 0.05}), ss, p).finite);
  // Entries below the clip count as zero.
  CHECK_FALSE(lagrangian(vec({0.5, 1e-14, 0.5 - 1e-14}), vec({-0.1, 0.0, 0.1}), ss, p).finite);
  // Support {0, 1} is one class; balanced flow within it is finite.
  const RateEval inner = lagrangian(vec({0.6, 0.4, 0.0}), vec({-0.1, 0.1, 0.0}), ss, p);
  CHECK(inner.finite);
  CHECK(std::isfinite(inner.value));
}

TEST_CASE("finiteness classifier agrees with the divergence probe on three-state cases") {
  const ModelParams p = three_state();
  const StateSpace ss = build_state_space(p);
  const std::vector<double> grid{-0.1, 0.0, 0.1};
  int cases = 0;
  for (int mask = 1; mask < 8; ++mask) {
    Vec y = Vec::Zero(3);
    const double w[3] = {0.5, 0.3, 0.2};
    for (int i = 0; i < 3; ++i)
      if (mask & (1 << i)) y[i] = w[i];
    y /= y.sum();
    for (double z0 : grid)
      for (double z1 : grid) {
        const Vec z = vec({z0, z1, -z0 - z1});
        bool off_support = false;
        for (int i = 0; i < 3; ++i) off_support |= y[i] == 0.0 && z[i] != 0.0;
        if (off_support) continue;
        const bool finite = lagrangian(y, z, ss, p).finite;
        CHECK_MESSAGE(finite == !oracle::probe_diverges(y, z, ss, p), "mask ", mask, " z ", z.transpose());
        ++cases;
      }
  }
  CHECK(cases > 20);
}

TEST_CASE("mass leaving an empty state diverges along the probe") {
  const ModelParams p = three_state();
  const StateSpace ss = build_state_space(p);
  const Vec y = vec({0.5, 0.0, 0.5});
  const Vec z = vec({0.05, -0.1, 0.05});
  CHECK(oracle::probe_diverges(y, z, ss, p));
  CHECK_FALSE(lagrangian(y, z, ss, p).finite);
}

TEST_CASE("iteration cap raises NumericalFailure with a lower bound") {
  const ModelParams p = oracle::two_class();
  const StateSpace ss = build_state_space(p);
  std::mt19937_64 gen(7);
  const Vec y = random_simplex(gen, ss.size());
  const Vec z = random_tangent(gen, ss.size(), 3.0);
  const double full = lagrangian(y, z, ss, p).value;
  LagrangianOptions o;
  o.max_iterations = 1;
  try {
    (void)lagrangian(y, z, ss, p, o);
    FAIL("expected NumericalFailure");
  } catch (const NumericalFailure& e) {
    CHECK(e.best_value() <= full + 1e-12);
    CHECK(e.best_value() >= 0.0);
  }
}

TEST_CASE("optimizer bound report") {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> scale(0.0, 10.0);
  const ModelParams p = oracle::two_class();
  const StateSpace ss = build_state_space(p);
  std::vector<BoundSample> suite, doubled, flows;
  for (int t = 0; t < 100; ++t) {
    const Vec y = random_simplex(gen, ss.size());
    const Vec z = random_tangent(gen, ss.size(), scale(gen));
    suite.push_back({y, z});
    if (t < 20) {
      doubled.push_back({y, 2.0 * z});
      flows.push_back({y, vector_field(y, ss, p)});
    }
  }
  const BoundReport rep = optimizer_bound_report(suite, ss, p);
  CHECK(std::isfinite(rep.max_ratio));
  CHECK(rep.max_ratio < 1e6);

  const BoundReport at_flow = optimizer_bound_report(flows, ss, p);
  for (double q : at_flow.max_quantity) CHECK(q <= 1.0 + static_cast<double>(ss.size()) * p.C);

  // Affine envelope: doubling z at most doubles the quantity plus a state-space constant.
  const BoundReport twice = optimizer_bound_report(doubled, ss, p);
  const double c = 1.0 + static_cast<double>(ss.size()) * p.C;
  for (std::size_t i = 0; i < doubled.size(); ++i) CHECK(twice.max_quantity[i] <= 2.0 * rep.max_quantity[i] + c);
}
