#include "lossnet/equilibria.hpp"

#include "lossnet/meanfield.hpp"
#include "lossnet/parallel.hpp"

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

namespace lossnet {

RhoVector::RhoVector(Vec rho) : rho_(std::move(rho)) {
  if (rho_.size() == 0) throw InvalidArgument("rho must be non-empty");
  for (Eigen::Index k = 0; k < rho_.size(); ++k)
    if (!(rho_[k] > 0.0) || !std::isfinite(rho_[k])) throw InvalidArgument("rho entries must be positive and finite");
}

std::string to_string(Stability s) {
  switch (s) {
    case Stability::kLocalMin: return "local-min";
    case Stability::kSaddle: return "saddle";
    case Stability::kLocalMax: return "local-max";
    case Stability::kDegenerate: return "degenerate";
  }
  return "degenerate";
}

namespace {

Vec log_weights(const RhoVector& rho, const StateSpace& ss) {
  if (rho.size() != ss.K) throw InvalidArgument("rho has the wrong length");
  const Vec lf = log_factorial_weights(ss);
  Vec lw(static_cast<Eigen::Index>(ss.size()));
  for (std::size_t i = 0; i < ss.size(); ++i) {
    double s = -lf[static_cast<Eigen::Index>(i)];
    for (int k = 0; k < ss.K; ++k) s += ss.theta(i, k) * std::log(rho[k]);
    lw[static_cast<Eigen::Index>(i)] = s;
  }
  return lw;
}

struct Moments {
  Vec nu;
  Vec mean;  // E[theta_k]
  Mat cov;   // Cov(theta_k, theta_j)
};

Moments moments(const RhoVector& rho, const StateSpace& ss) {
  Moments m;
  m.nu = erlang_nu(rho, ss).values();
  m.mean = Vec::Zero(ss.K);
  m.cov = Mat::Zero(ss.K, ss.K);
  for (std::size_t i = 0; i < ss.size(); ++i) {
    const double w = m.nu[static_cast<Eigen::Index>(i)];
    for (int k = 0; k < ss.K; ++k) m.mean[k] += w * ss.theta(i, k);
  }
  for (std::size_t i = 0; i < ss.size(); ++i) {
    const double w = m.nu[static_cast<Eigen::Index>(i)];
    for (int k = 0; k < ss.K; ++k)
      for (int j = 0; j < ss.K; ++j) m.cov(k, j) += w * (ss.theta(i, k) - m.mean[k]) * (ss.theta(i, j) - m.mean[j]);
  }
  return m;
}

Vec fixed_point_map(const Vec& mean, const ModelParams& p) {
  Vec r(p.K);
  for (int k = 0; k < p.K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    r[k] = (p.alpha[ku] + p.gamma[ku] * mean[k]) / (p.gamma[ku] + p.delta[ku]);
  }
  return r;
}

double sup_norm(const Vec& v) { return v.cwiseAbs().maxCoeff(); }

// Newton on G(u) = exp(u) - R(exp(u)) in log coordinates u = ln rho.
std::optional<Vec> newton_polish(Vec rho, const StateSpace& ss, const ModelParams& p, int max_iter, double tol) {
  Vec c(p.K);
  for (int k = 0; k < p.K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    c[k] = p.gamma[ku] / (p.gamma[ku] + p.delta[ku]);
  }
  auto residual_of = [&](const Vec& r, Moments* out) {
    Moments m = moments(RhoVector(r), ss);
    Vec res = r - fixed_point_map(m.mean, p);
    if (out) *out = std::move(m);
    return res;
  };
  Moments m;
  Vec res = residual_of(rho, &m);
  double norm = sup_norm(res);
  for (int it = 0; it < max_iter && norm >= tol; ++it) {
    Mat J = -(c.asDiagonal() * m.cov);
    J.diagonal() += rho;
    Vec du = J.fullPivLu().solve(-res);
    if (!du.allFinite()) return std::nullopt;
    const double big = sup_norm(du);
    if (big > 1.0) du /= big;
    double t = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 40; ++ls) {
      Vec trial = (rho.array().log() + t * du.array()).exp().matrix();
      if (!trial.allFinite() || trial.minCoeff() <= 0.0) {
        t *= 0.5;
        continue;
      }
      Moments tm;
      Vec tres = residual_of(trial, &tm);
      const double tnorm = sup_norm(tres);
      if (tnorm < norm || tnorm < tol) {
        rho = trial;
        res = tres;
        m = std::move(tm);
        norm = tnorm;
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) break;
  }
  if (norm < tol) return rho;
  return std::nullopt;
}

double relative_distance(const Vec& a, const Vec& b) {
  double d = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k)
    d = std::max(d, std::abs(a[k] - b[k]) / std::max(1.0, std::abs(a[k])));
  return d;
}

}  // namespace

double log_partition(const RhoVector& rho, const StateSpace& ss) {
  const Vec lw = log_weights(rho, ss);
  const double mx = lw.maxCoeff();
  return mx + std::log((lw.array() - mx).exp().sum());
}

Occupancy erlang_nu(const RhoVector& rho, const StateSpace& ss) {
  const Vec lw = log_weights(rho, ss);
  const double mx = lw.maxCoeff();
  Vec w = (lw.array() - mx).exp();
  w /= w.sum();
  return Occupancy(std::move(w));
}

Vec fixed_point_residual(const RhoVector& rho, const StateSpace& ss, const ModelParams& p) {
  const Moments m = moments(rho, ss);
  return rho.values() - fixed_point_map(m.mean, p);
}

ScanGrid default_scan_grid(const ModelParams& p) {
  ScanGrid g;
  g.lo.resize(p.K);
  g.hi.resize(p.K);
  const int per = std::max(2, static_cast<int>(std::lround(std::pow(64.0, 1.0 / p.K))));
  g.counts.assign(static_cast<std::size_t>(p.K), per);
  for (int k = 0; k < p.K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const double service = p.gamma[ku] + p.delta[ku];
    g.lo[k] = p.alpha[ku] / service;
    g.hi[k] = (p.alpha[ku] + p.gamma[ku] * static_cast<double>(p.C / p.A[ku])) / service;
  }
  return g;
}

EquilibriumSet solve_equilibria_generic(const StateSpace& ss, const ModelParams& p, const ScanGrid& grid) {
  if (grid.lo.size() != p.K || grid.hi.size() != p.K || grid.counts.size() != static_cast<std::size_t>(p.K))
    throw InvalidArgument("scan grid must have one range per class");
  std::size_t total = 1;
  for (int c : grid.counts) {
    if (c < 1) throw InvalidArgument("scan grid counts must be positive");
    total *= static_cast<std::size_t>(c);
  }
  for (int k = 0; k < p.K; ++k)
    if (!(grid.lo[k] > 0.0) || grid.hi[k] < grid.lo[k]) throw InvalidArgument("scan grid range must be positive");

  auto start_point = [&](std::size_t flat) {
    Vec r(p.K);
    for (int k = 0; k < p.K; ++k) {
      const int n = grid.counts[static_cast<std::size_t>(k)];
      const std::size_t i = flat % static_cast<std::size_t>(n);
      flat /= static_cast<std::size_t>(n);
      const double f = n == 1 ? 0.5 : static_cast<double>(i) / (n - 1);
      r[k] = std::exp(std::log(grid.lo[k]) + f * (std::log(grid.hi[k]) - std::log(grid.lo[k])));
    }
    return r;
  };

  // Each start contributes up to two candidates: the polished end of the
  // damped iteration (stable roots) and Newton straight from the start
  // (saddles, where the iteration is repelled).
  std::vector<std::vector<Vec>> found(total);
  parallel_for(total, grid.threads, [&](std::size_t s) {
    const Vec r0 = start_point(s);
    Vec r = r0;
    for (int it = 0; it < grid.damped_iterations; ++it) {
      const Moments m = moments(RhoVector(r), ss);
      const Vec next = (1.0 - grid.damping) * r + grid.damping * fixed_point_map(m.mean, p);
      const double step = sup_norm(next - r);
      r = next;
      if (step < 1e-13) break;
    }
    if (auto a = newton_polish(r, ss, p, grid.newton_iterations, grid.residual_tol)) found[s].push_back(*a);
    if (auto b = newton_polish(r0, ss, p, grid.newton_iterations, grid.residual_tol)) found[s].push_back(*b);
  });

  EquilibriumSet out;
  std::vector<Vec> roots;
  for (const auto& cands : found) {
    for (const Vec& r : cands) {
      bool dup = false;
      for (const Vec& q : roots) {
        const double d = relative_distance(q, r);
        if (d < grid.dedup_tol) {
          dup = true;
          break;
        }
        if (d < grid.near_tol) {
          std::ostringstream os;
          os << "two starts converged to roots " << d << " apart (possible near-degenerate pair)";
          out.warnings.push_back(os.str());
        }
      }
      if (!dup) roots.push_back(r);
    }
  }
  std::sort(roots.begin(), roots.end(), [](const Vec& a, const Vec& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
  });
  for (const Vec& r : roots) out.equilibria.push_back(classify(RhoVector(r), ss, p));
  return out;
}

double phi(const RhoVector& rho, const ModelParams& p, const StateSpace& ss) {
  double v = -log_partition(rho, ss);
  for (int k = 0; k < p.K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    v += (p.gamma[ku] + p.delta[ku]) / p.gamma[ku] * rho[k] - p.alpha[ku] / p.gamma[ku] * std::log(rho[k]);
  }
  return v;
}

Mat phi_hessian(const RhoVector& rho, const ModelParams& p, const StateSpace& ss, double rel_step) {
  const int K = p.K;
  Vec h(K);
  for (int k = 0; k < K; ++k) h[k] = rel_step * std::max(1.0, rho[k]);
  auto f = [&](int i, double di, int j, double dj) {
    Vec r = rho.values();
    r[i] += di;
    r[j] += dj;
    return phi(RhoVector(r), p, ss);
  };
  const double f0 = phi(rho, p, ss);
  Mat H(K, K);
  for (int i = 0; i < K; ++i) {
    H(i, i) = (f(i, h[i], i, 0.0) - 2.0 * f0 + f(i, -h[i], i, 0.0)) / (h[i] * h[i]);
    for (int j = i + 1; j < K; ++j) {
      const double v = (f(i, h[i], j, h[j]) - f(i, h[i], j, -h[j]) - f(i, -h[i], j, h[j]) + f(i, -h[i], j, -h[j])) /
                        (4.0 * h[i] * h[j]);
      H(i, j) = v;
      H(j, i) = v;
    }
  }
  return H;
}

Stability classify_eigenvalues(const Vec& ev, double threshold) {
  bool pos = false, neg = false;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev[i]) <= threshold) return Stability::kDegenerate;
    (ev[i] > 0.0 ? pos : neg) = true;
  }
  if (pos && neg) return Stability::kSaddle;
  return pos ? Stability::kLocalMin : Stability::kLocalMax;
}

Equilibrium classify(const RhoVector& rho, const StateSpace& ss, const ModelParams& p, double rel_step) {
  Equilibrium e;
  e.rho = rho;
  e.nu = erlang_nu(rho, ss);
  e.residual = sup_norm(fixed_point_residual(rho, ss, p));
  e.phi = phi(rho, p, ss);
  e.g = lyapunov_g(e.nu.values(), ss, p);
  e.hessian = phi_hessian(rho, p, ss, rel_step);
  Eigen::SelfAdjointEigenSolver<Mat> es(e.hessian);
  e.eigenvalues = es.eigenvalues();
  e.classification = classify_eigenvalues(e.eigenvalues);
  return e;
}

Vec expected_customers(const RhoVector& rho, const StateSpace& ss, const ModelParams& p) {
  const Vec nu = erlang_nu(rho, ss).values();
  Vec eq(p.K);
  for (int k = 0; k < p.K; ++k) {
    double blocked = 0.0;
    for (std::size_t i = 0; i < ss.size(); ++i)
      if (!ss.admits(k, i)) blocked += nu[static_cast<Eigen::Index>(i)];
    eq[k] = rho[k] * (1.0 - blocked);
  }
  return eq;
}

bool is_two_class_geometry(const ModelParams& p) { return p.K == 2 && p.A[0] == 1 && p.A[1] == p.C; }

namespace {

void require_two_class(const ModelParams& p) {
  p.validate();
  if (!is_two_class_geometry(p)) throw InvalidArgument("two-class formulas need K = 2 and A = (1, C)");
}

double full_node_weight(double rho1, int C) {
  return std::exp(C * std::log(rho1) - std::lgamma(C + 1.0));
}

}  // namespace

double two_class_rho2(double rho1, const ModelParams& p) {
  require_two_class(p);
  if (!(rho1 > 0.0)) throw InvalidArgument("rho_1 must be positive");
  const double a1 = p.alpha[0], a2 = p.alpha[1], g1 = p.gamma[0], g2 = p.gamma[1], d1 = p.delta[0], d2 = p.delta[1];
  const double f = full_node_weight(rho1, p.C);
  const double qa = g1 * (g2 + d2);
  const double qb = qa * f - a2 * g1 - g2 * (a1 / rho1 - d1);
  const double qc = a2 * g1 * f;  // the quadratic is qa r^2 + qb r - qc = 0
  const double disc = qb * qb + 4.0 * qa * qc;
  if (!(disc >= 0.0)) throw NumericalFailure("negative discriminant in the rho_2 quadratic", disc);
  const double sq = std::sqrt(disc);
  // pick the cancellation-free form of the positive root
  return qb <= 0.0 ? (-qb + sq) / (2.0 * qa) : 2.0 * qc / (qb + sq);
}

double two_class_h(double rho1, const ModelParams& p) {
  require_two_class(p);
  const double a1 = p.alpha[0], g1 = p.gamma[0], d1 = p.delta[0];
  if (d1 > 0.0 && std::abs(rho1 - a1 / d1) < 1e-9) throw InvalidArgument("rho_1 at the pole alpha_1/delta_1");
  if (!(a1 > d1 * rho1)) throw InvalidArgument("two_class_h needs alpha_1 > delta_1 rho_1");
  const double rho2 = two_class_rho2(rho1, p);
  double series = 0.0, term = 1.0;
  for (int i = 0; i <= p.C; ++i) {
    series += term;
    term *= rho1 / (i + 1);
  }
  const double f = full_node_weight(rho1, p.C);
  return series + rho2 - g1 * rho1 / (a1 - d1 * rho1) * (f + rho2);
}

HCurveScan scan_h_curve(const ModelParams& p, int points, double lo) {
  require_two_class(p);
  if (points < 3) throw InvalidArgument("h-curve scan needs at least 3 points");
  const double a1 = p.alpha[0], g1 = p.gamma[0], d1 = p.delta[0];
  const double hi = d1 > 0.0 ? 0.999 * a1 / d1 : 2.0 * (a1 + g1 * p.C) / g1;
  if (!(hi > lo)) throw InvalidArgument("empty h-curve scan range");

  HCurveScan s;
  s.rho1.resize(static_cast<std::size_t>(points));
  s.h.resize(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    const double x = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (points - 1));
    s.rho1[static_cast<std::size_t>(i)] = x;
    s.h[static_cast<std::size_t>(i)] = two_class_h(x, p);
  }
  auto h = [&](double x) { return two_class_h(x, p); };
  for (std::size_t i = 0; i + 1 < s.rho1.size(); ++i) {
    const double ha = s.h[i], hb = s.h[i + 1];
    if (ha == 0.0) {
      s.roots.push_back(s.rho1[i]);
    } else if (ha * hb < 0.0) {
      std::uintmax_t iters = 200;
      auto r = boost::math::tools::toms748_solve(h, s.rho1[i], s.rho1[i + 1], ha, hb,
                                                 boost::math::tools::eps_tolerance<double>(52), iters);
      s.roots.push_back(0.5 * (r.first + r.second));
    }
  }
  for (std::size_t i = 1; i + 1 < s.rho1.size(); ++i) {
    const bool is_min = s.h[i] < s.h[i - 1] && s.h[i] <= s.h[i + 1];
    const bool is_max = s.h[i] > s.h[i - 1] && s.h[i] >= s.h[i + 1];
    if (!is_min && !is_max) continue;
    const double sign = is_min ? 1.0 : -1.0;
    auto r = boost::math::tools::brent_find_minima([&](double x) { return sign * h(x); }, s.rho1[i - 1],
                                                   s.rho1[i + 1], 50);
    s.extrema.push_back({r.first, sign * r.second, is_min});
  }
  return s;
}

}  // namespace lossnet
