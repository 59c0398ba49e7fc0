#include "lossnet/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace lossnet {

namespace {

inline double at(const Vec& v, std::size_t i) { return v[static_cast<Eigen::Index>(i)]; }

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace

Vec effective_arrival(const Vec& y, const StateSpace& ss, const ModelParams& p) {
  Vec b(p.K);
  for (int k = 0; k < p.K; ++k) {
    double m = 0.0;
    for (std::size_t i = 0; i < ss.size(); ++i) m += ss.theta(i, k) * at(y, i);
    b[k] = p.alpha[static_cast<std::size_t>(k)] + p.gamma[static_cast<std::size_t>(k)] * m;
  }
  return b;
}

Vec vector_field(const Vec& y, const StateSpace& ss, const ModelParams& p) {
  const Vec b = effective_arrival(y, ss, p);
  Vec v = Vec::Zero(y.size());
  for (int k = 0; k < p.K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const double service = p.delta[ku] + p.gamma[ku];
    for (std::size_t i = 0; i < ss.size(); ++i) {
      const std::size_t up = ss.up[ku][i];
      if (up == kNoState) continue;
      // net flux along the edge i -> i + e_k
      const double flux = b[k] * at(y, i) - service * ss.theta(up, k) * at(y, up);
      v[static_cast<Eigen::Index>(i)] -= flux;
      v[static_cast<Eigen::Index>(up)] += flux;
    }
  }
  return v;
}

Vec project_to_simplex(const Vec& x, double floor) {
  const auto n = x.size();
  const double budget = 1.0 - floor * static_cast<double>(n);
  if (budget < 0.0) throw InvalidArgument("simplex floor too large for the state space");
  Vec u = x.array() - floor;
  std::vector<double> s(u.data(), u.data() + n);
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0, tau = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    cum += s[static_cast<std::size_t>(j)];
    const double t = (cum - budget) / static_cast<double>(j + 1);
    if (s[static_cast<std::size_t>(j)] - t > 0.0) tau = t;
  }
  Vec out = (u.array() - tau).max(0.0) + floor;
  return out;
}

Trajectory integrate_ode(const Occupancy& y0, double horizon, const StateSpace& ss, const ModelParams& p,
                         const OdeOptions& opts) {
  if (!(opts.step > 0.0) || !(horizon > 0.0)) throw InvalidArgument("ODE step and horizon must be positive");
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / opts.step - 1e-9));
  const double h = horizon / static_cast<double>(steps);
  const std::size_t every = std::max<std::size_t>(1, opts.record_every);

  Trajectory tr;
  tr.times.push_back(0.0);
  tr.points.push_back(y0);
  Vec y = y0.values();
  for (std::size_t s = 1; s <= steps; ++s) {
    const Vec k1 = vector_field(y, ss, p);
    const Vec k2 = vector_field(y + 0.5 * h * k1, ss, p);
    const Vec k3 = vector_field(y + 0.5 * h * k2, ss, p);
    const Vec k4 = vector_field(y + h * k3, ss, p);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!y.allFinite() || y.cwiseAbs().maxCoeff() > 2.0) {
      std::ostringstream os;
      os << "ODE diverged at t=" << static_cast<double>(s) * h;
      throw NumericalFailure(os.str(), static_cast<double>(s) * h);
    }
    y = y.cwiseMax(0.0);
    y /= y.sum();
    if (s % every == 0 || s == steps) {
      tr.times.push_back(static_cast<double>(s) * h);
      tr.points.emplace_back(y);
    }
  }
  return tr;
}

double lyapunov_g(const Vec& y, const StateSpace& ss, const ModelParams& p) {
  const Vec lf = log_factorial_weights(ss);
  double g = 0.0;
  for (std::size_t i = 0; i < ss.size(); ++i) g += xlogx(at(y, i)) + at(y, i) * at(lf, i);
  const Vec b = effective_arrival(y, ss, p);
  for (int k = 0; k < p.K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const double service = p.delta[ku] + p.gamma[ku];
    const double u1 = b[k] / service;
    const double u0 = p.alpha[ku] / service;
    g -= service / p.gamma[ku] * ((xlogx(u1) - u1) - (xlogx(u0) - u0));
  }
  return g;
}

double dissipation(const Vec& y, const StateSpace& ss, const ModelParams& p) {
  if (y.minCoeff() <= 0.0) throw InvalidArgument("dissipation is defined in the interior of the simplex only");
  const Vec b = effective_arrival(y, ss, p);
  double total = 0.0;
  for (int k = 0; k < p.K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const double service = p.delta[ku] + p.gamma[ku];
    for (std::size_t i = 0; i < ss.size(); ++i) {
      const std::size_t up = ss.up[ku][i];
      if (up == kNoState) continue;
      const double forward = b[k] * at(y, i);
      const double backward = service * ss.theta(up, k) * at(y, up);
      total += (forward - backward) * std::log(backward / forward);
    }
  }
  return total;
}

}  // namespace lossnet
