#include "lossnet/equilibria.hpp"
#include "lossnet/meanfield.hpp"
#include "lossnet/ratefn.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace lossnet;

namespace {

Vec random_simplex(std::mt19937_64& gen, std::size_t S) {
  std::exponential_distribution<double> e(1.0);
  Vec y(static_cast<Eigen::Index>(S));
  for (auto& v : y) v = e(gen);
  return y / y.sum();
}

const EquilibriumSet& two_class_equilibria() {
  static const EquilibriumSet set = [] {
    const ModelParams p = oracle::two_class();
    return solve_equilibria_generic(build_state_space(p), p, default_scan_grid(p));
  }();
  return set;
}

}  // namespace

TEST_CASE("vector field conserves mass and matches the single-class hand expansion") {
  std::mt19937_64 gen(1);
  const ModelParams toy = oracle::toy();
  const StateSpace tss = build_state_space(toy);
  const ModelParams p = oracle::two_class();
  const StateSpace ss = build_state_space(p);
  for (int t = 0; t < 50; ++t) {
    const Vec y = random_simplex(gen, ss.size());
    CHECK(std::abs(vector_field(y, ss, p).sum()) < 1e-13);
    const Vec x = random_simplex(gen, 2);
    const Vec v = vector_field(x, tss, toy);
    const double ref = toy.alpha[0] * x[0] - (toy.delta[0] + toy.gamma[0] * x[1]) * x[1];
    CHECK(v[1] == doctest::Approx(ref).epsilon(1e-13));
    CHECK(v[0] == doctest::Approx(-ref).epsilon(1e-13));
  }
}

TEST_CASE("vector field equals grad_lambda H at lambda = 0 on 100 random points") {
  std::mt19937_64 gen(2);
  for (const auto& p : {oracle::two_class(), oracle::toy()}) {
    const StateSpace ss = build_state_space(p);
    for (int t = 0; t < 100; ++t) {
      const Vec y = random_simplex(gen, ss.size());
      const Vec diff = vector_field(y, ss, p) - grad_hamiltonian(y, Vec::Zero(y.size()), ss, p);
      CHECK(diff.cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("equilibria are zeros of the vector field") {
  const ModelParams p = oracle::two_class();
  const StateSpace ss = build_state_space(p);
  for (const auto& e : two_class_equilibria().equilibria)
    CHECK(vector_field(e.nu.values(), ss, p).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("ODE: equilibrium stays put, nearby start returns, g decreases") {
  const ModelParams p = oracle::two_class();
  const StateSpace ss = build_state_space(p);
  const auto& eq = two_class_equilibria().equilibria;
  REQUIRE(eq.size() == 3);
  const Vec nu1 = eq[0].nu.values();

  OdeOptions o;
  o.record_every = 1000;
  const Trajectory still = integrate_ode(eq[0].nu, 10.0, ss, p, o);
  for (const auto& pt : still.points) CHECK(sup_distance(pt.values(), nu1) < 1e-6);

  Vec start = nu1;
  start[0] += 0.02;
  start[1] -= 0.02;
  o.record_every = 100;
  const Trajectory back = integrate_ode(Occupancy(start), 200.0, ss, p, o);
  CHECK(sup_distance(back.points.back().values(), nu1) < 1e-6);
  for (std::size_t i = 1; i < back.points.size(); ++i) {
    CHECK(back.times[i] > back.times[i - 1]);
    CHECK(lyapunov_g(back.points[i].values(), ss, p) <= lyapunov_g(back.points[i - 1].values(), ss, p) + 1e-7);
  }
}

TEST_CASE("g is nonincreasing along random interior trajectories") {
  std::mt19937_64 gen(3);
  const ModelParams p = oracle::two_class();
  const StateSpace ss = build_state_space(p);
  OdeOptions o;
  o.record_every = 10;
  for (int t = 0; t < 5; ++t) {
    const Trajectory tr = integrate_ode(Occupancy(random_simplex(gen, ss.size())), 5.0, ss, p, o);
    double prev = lyapunov_g(tr.points.front().values(), ss, p);
    for (const auto& pt : tr.points) {
      const double g = lyapunov_g(pt.values(), ss, p);
      CHECK(g <= prev + 1e-7);
      prev = g;
    }
  }
}

TEST_CASE("dissipation: sign, zero at equilibria, finite-difference agreement") {
  std::mt19937_64 gen(4);
  const ModelParams p = oracle::two_class();
  const StateSpace ss = build_state_space(p);
  for (const auto& e : two_class_equilibria().equilibria) CHECK(std::abs(dissipation(e.nu.values(), ss, p)) < 1e-8);
  for (int t = 0; t < 30; ++t) {
    const Vec y = random_simplex(gen, ss.size());
    const double d = dissipation(y, ss, p);
    CHECK(d < 0.0);
    const Vec v = vector_field(y, ss, p);
    const double h = 1e-6;
    const double fd = (lyapunov_g(y + h * v, ss, p) - lyapunov_g(y - h * v, ss, p)) / (2 * h);
    CHECK(std::abs(fd - d) < 1e-4 * std::max(1.0, std::abs(d)));
  }
  Vec boundary = Vec::Zero(static_cast<Eigen::Index>(ss.size()));
  boundary[0] = 1.0;
  CHECK_THROWS_AS(dissipation(boundary, ss, p), InvalidArgument);
}

TEST_CASE("g and phi differ by the stated constant at every equilibrium") {
  for (double delta : {0.01, 0.1}) {
    const ModelParams p = oracle::two_class(delta);
    const StateSpace ss = build_state_space(p);
    double constant = 0.0;
    for (int k = 0; k < 2; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      constant += p.alpha[ku] / p.gamma[ku] * (std::log(p.alpha[ku] / (p.gamma[ku] + p.delta[ku])) - 1.0);
    }
    const auto set = solve_equilibria_generic(ss, p, default_scan_grid(p));
    for (const auto& e : set.equilibria) CHECK(e.g - e.phi == doctest::Approx(constant).epsilon(1e-8));
  }
  const auto& eq = two_class_equilibria().equilibria;
  CHECK(eq[0].g - eq[1].g == doctest::Approx(eq[0].phi - eq[1].phi).epsilon(1e-8));
}

TEST_CASE("g by hand on the two-state model at (1/2, 1/2)") {
  const ModelParams p = oracle::toy();
  const StateSpace ss = build_state_space(p);
  Vec y(2);
  y << 0.5, 0.5;
  // Entropy part plus the class term with b = alpha + gamma/2 = 1.5 and service rate 2.
  const double u1 = 0.75, u0 = 0.5;
  const double ref = std::log(0.5) - 2.0 * ((u1 * std::log(u1) - u1) - (u0 * std::log(u0) - u0));
  CHECK(lyapunov_g(y, ss, p) == doctest::Approx(ref).epsilon(1e-14));
  Vec corner(2);
  corner << 1.0, 0.0;
  CHECK(std::isfinite(lyapunov_g(corner, ss, p)));
}

TEST_CASE("simplex projection") {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    Vec x(6);
    for (auto& v : x) v = nd(gen);
    for (double fl : {0.0, 1e-3, 0.1}) {
      const Vec y = project_to_simplex(x, fl);
      CHECK(y.sum() == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(y.minCoeff() >= fl - 1e-15);
      // Idempotent, and no feasible point on a random segment is closer to x.
      CHECK((project_to_simplex(y, fl) - y).cwiseAbs().maxCoeff() < 1e-14);
      Vec other = Vec::Constant(6, 1.0 / 6.0);
      for (double s : {0.1, 0.5, 0.9}) {
        const Vec w = (1 - s) * y + s * other;
        CHECK((x - y).norm() <= (x - w).norm() + 1e-12);
      }
    }
  }
  CHECK_THROWS_AS(project_to_simplex(Vec::Zero(4), 0.3), InvalidArgument);
}
