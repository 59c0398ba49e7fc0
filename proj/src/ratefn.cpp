#include "lossnet/ratefn.hpp"

#include "lossnet/transitions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace lossnet {

DualVector::DualVector(Vec lambda) : lambda_(std::move(lambda)) {
  if (lambda_.size() == 0) throw InvalidArgument("dual vector must be non-empty");
  lambda_.array() -= lambda_[0];
  lambda_[0] = 0.0;
}

namespace {

inline double at(const Vec& v, std::size_t i) { return v[static_cast<Eigen::Index>(i)]; }

void check_dual(const Vec& lambda, const StateSpace& ss) {
  if (static_cast<std::size_t>(lambda.size()) != ss.size()) throw InvalidArgument("lambda has the wrong length");
  if (lambda.cwiseAbs().maxCoeff() > kMaxDualMagnitude)
    throw InvalidArgument("|lambda_theta| > 500 is outside the supported range");
}

}  // namespace

double hamiltonian(const Vec& y, const Vec& lambda, const StateSpace& ss, const ModelParams& p) {
  check_dual(lambda, ss);
  const TransitionTable t = transition_table(ss, p, y);
  double h = 0.0;
  for (const auto& e : t.entries) {
    if (e.jump.null() || e.rate == 0.0) continue;
    h += e.rate * std::expm1(e.jump.dot(lambda));
  }
  return h;
}

Vec grad_hamiltonian(const Vec& y, const Vec& lambda, const StateSpace& ss, const ModelParams& p) {
  check_dual(lambda, ss);
  const TransitionTable t = transition_table(ss, p, y);
  Vec g = Vec::Zero(lambda.size());
  for (const auto& e : t.entries) {
    if (e.jump.null() || e.rate == 0.0) continue;
    const double w = e.rate * std::exp(e.jump.dot(lambda));
    for (std::uint8_t j = 0; j < e.jump.size; ++j) g[static_cast<Eigen::Index>(e.jump.idx[j])] += w * e.jump.coef[j];
  }
  return g;
}

Vec grad_hamiltonian_y(const Vec& y, const Vec& lambda, const StateSpace& ss, const ModelParams& p) {
  check_dual(lambda, ss);
  const std::size_t S = ss.size();
  Vec gy = Vec::Zero(y.size());
  auto add = [&](std::size_t i, double v) { gy[static_cast<Eigen::Index>(i)] += v; };
  for (int k = 0; k < p.K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const double a = p.alpha[ku], g = p.gamma[ku], d = p.delta[ku];
    double blocked_mass = 0.0;
    for (std::size_t i = 0; i < S; ++i)
      if (!ss.admits(k, i)) blocked_mass += at(y, i);

    double dep_sum = 0.0;  // sum_theta theta_k y_theta (e^{...} - 1) over departures
    for (std::size_t i = 0; i < S; ++i) {
      const std::size_t up = ss.up[ku][i];
      if (up != kNoState) add(i, a * std::expm1(at(lambda, up) - at(lambda, i)));
      const std::size_t dn = ss.down[ku][i];
      if (dn == kNoState) continue;
      const double th = ss.theta(i, k);
      const double e = std::expm1(at(lambda, dn) - at(lambda, i));
      add(i, (d + g * blocked_mass) * th * e);
      dep_sum += th * at(y, i) * e;
      for (std::size_t j = 0; j < S; ++j) {
        const std::size_t jup = ss.up[ku][j];
        if (jup == kNoState) continue;
        const double em =
            std::expm1(at(lambda, jup) - at(lambda, j) + at(lambda, dn) - at(lambda, i));
        add(i, th * g * at(y, j) * em);
        add(j, th * g * at(y, i) * em);
      }
    }
    for (std::size_t i = 0; i < S; ++i)
      if (!ss.admits(k, i)) add(i, g * dep_sum);
  }
  return gy;
}

Partition communication_classes(const Vec& y, const StateSpace& ss) {
  const std::size_t S = ss.size();
  std::vector<std::size_t> parent(S);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto root = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < S; ++i) {
    if (!(at(y, i) > 0.0)) continue;
    for (int k = 0; k < ss.K; ++k) {
      const std::size_t up = ss.up[static_cast<std::size_t>(k)][i];
      if (up == kNoState || !(at(y, up) > 0.0)) continue;
      const std::size_t a = root(i), b = root(up);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }
  Partition classes;
  std::vector<std::size_t> slot(S, kNoState);
  for (std::size_t i = 0; i < S; ++i) {
    if (!(at(y, i) > 0.0)) continue;
    const std::size_t r = root(i);
    if (slot[r] == kNoState) {
      slot[r] = classes.size();
      classes.emplace_back();
    }
    classes[slot[r]].push_back(i);
  }
  return classes;
}

namespace {

struct DualTerm {
  double rate;
  Jump jump;  // indices already mapped to free variables; -1 coefficient slots removed
};

// Concave objective f(x) = z.x - sum_j c_j (exp(d_j . x) - 1) + offset over
// the free dual coordinates.
struct DualProblem {
  Vec z;
  std::vector<DualTerm> terms;
  double offset = 0.0;

  double value(const Vec& x) const {
    double f = z.dot(x) + offset;
    for (const auto& t : terms) {
      const double s = t.jump.dot(x);
      if (s > 700.0) return -std::numeric_limits<double>::infinity();
      f -= t.rate * std::expm1(s);
    }
    return f;
  }

  void derivatives(const Vec& x, Vec& grad, Mat& neg_hess) const {
    grad = z;
    neg_hess.setZero(x.size(), x.size());
    for (const auto& t : terms) {
      const double w = t.rate * std::exp(t.jump.dot(x));
      for (std::uint8_t a = 0; a < t.jump.size; ++a) {
        const auto ia = static_cast<Eigen::Index>(t.jump.idx[a]);
        grad[ia] -= w * t.jump.coef[a];
        for (std::uint8_t b = 0; b < t.jump.size; ++b)
          neg_hess(ia, static_cast<Eigen::Index>(t.jump.idx[b])) += w * t.jump.coef[a] * t.jump.coef[b];
      }
    }
  }
};

}  // namespace

RateEval lagrangian(const Vec& y_in, const Vec& z, const StateSpace& ss, const ModelParams& p,
                    const LagrangianOptions& opts) {
  const std::size_t S = ss.size();
  if (static_cast<std::size_t>(y_in.size()) != S || static_cast<std::size_t>(z.size()) != S)
    throw InvalidArgument("lagrangian: y and z must have one entry per state");
  if (!(opts.tol > 0.0)) throw InvalidArgument("lagrangian: tol must be positive");

  Vec y = y_in;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y[i] < opts.boundary_clip) y[i] = 0.0;

  RateEval out;
  out.classes = communication_classes(y, ss);
  const auto infinite = [&] {
    out.finite = false;
    out.value = std::numeric_limits<double>::infinity();
    return out;
  };
  for (std::size_t i = 0; i < S; ++i)
    if (at(y, i) == 0.0 && std::abs(at(z, i)) > opts.tol) return infinite();
  for (const auto& cls : out.classes) {
    double s = 0.0;
    for (std::size_t i : cls) s += at(z, i);
    if (std::abs(s) > opts.tol) return infinite();
  }

  // Free coordinates: supported states other than the first of each class.
  std::vector<Eigen::Index> var(S, -1);
  std::vector<std::size_t> free_states;
  std::vector<std::size_t> class_of(S, kNoState);
  for (std::size_t c = 0; c < out.classes.size(); ++c) {
    for (std::size_t m = 0; m < out.classes[c].size(); ++m) {
      const std::size_t i = out.classes[c][m];
      class_of[i] = c;
      if (m == 0) continue;
      var[i] = static_cast<Eigen::Index>(free_states.size());
      free_states.push_back(i);
    }
  }
  const auto nfree = static_cast<Eigen::Index>(free_states.size());

  DualProblem prob;
  prob.z.resize(nfree);
  for (Eigen::Index v = 0; v < nfree; ++v) prob.z[v] = at(z, free_states[static_cast<std::size_t>(v)]);
  const TransitionTable table = transition_table(ss, p, y);
  for (const auto& e : table.entries) {
    if (e.jump.null() || !(e.rate > 0.0)) continue;
    bool into_empty = false;
    for (std::uint8_t j = 0; j < e.jump.size; ++j)
      if (e.jump.coef[j] > 0 && at(y, e.jump.idx[j]) == 0.0) into_empty = true;
    if (into_empty) {
      // lambda -> -infinity at the empty target: exp(.) - 1 -> -1
      prob.offset += e.rate;
      continue;
    }
    DualTerm t{e.rate, {}};
    for (std::uint8_t j = 0; j < e.jump.size; ++j) {
      const Eigen::Index v = var[e.jump.idx[j]];
      if (v >= 0) t.jump.add(static_cast<std::size_t>(v), e.jump.coef[j]);
    }
    if (t.jump.null()) {
      continue;  // exp(0) - 1 = 0
    }
    prob.terms.push_back(t);
  }

  Vec x = Vec::Zero(nfree);
  if (opts.initial && opts.initial->size() == static_cast<Eigen::Index>(S) && opts.initial->allFinite()) {
    for (Eigen::Index v = 0; v < nfree; ++v) {
      const std::size_t i = free_states[static_cast<std::size_t>(v)];
      const std::size_t rep = out.classes[class_of[i]].front();
      x[v] = at(*opts.initial, i) - at(*opts.initial, rep);
    }
    if (!std::isfinite(prob.value(x))) x.setZero();
  }

  Vec grad;
  Mat nh;
  double f = prob.value(x);
  int it = 0;
  double gnorm = 0.0;
  for (;; ++it) {
    prob.derivatives(x, grad, nh);
    gnorm = nfree > 0 ? grad.cwiseAbs().maxCoeff() : 0.0;
    if (gnorm < opts.grad_tol || it >= opts.max_iterations) break;

    Vec dir;
    Eigen::LDLT<Mat> ldlt(nh);
    if (ldlt.info() == Eigen::Success) dir = ldlt.solve(grad);
    double slope = dir.size() == nfree && dir.allFinite() ? grad.dot(dir) : -1.0;
    if (!(slope > 0.0)) {
      dir = grad;
      slope = grad.squaredNorm();
    }
    const double big = dir.cwiseAbs().maxCoeff();
    if (big > 20.0) {
      dir *= 20.0 / big;
      slope *= 20.0 / big;
    }
    double t = 1.0;
    bool moved = false;
    if (big <= 20.0) {
      // Close to the optimum the change in f drops below its rounding error;
      // the full Newton step is then judged by the gradient instead.
      const Vec trial = x + dir;
      const double ft = prob.value(trial);
      const double noise = 1e-12 * (1.0 + std::abs(f) + std::abs(prob.z.dot(x)));
      if (std::isfinite(ft) && ft >= f - noise && ft < f + 1e-4 * slope) {
        Vec g_trial;
        Mat h_trial;
        prob.derivatives(trial, g_trial, h_trial);
        if (g_trial.cwiseAbs().maxCoeff() < 0.5 * gnorm) {
          x = trial;
          f = ft;
          continue;
        }
      }
    }
    for (int ls = 0; ls < 60; ++ls) {
      const Vec trial = x + t * dir;
      const double ft = prob.value(trial);
      if (ft >= f + 1e-4 * t * slope) {
        x = trial;
        f = ft;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) {
      // No ascent at machine precision; accept if the gradient is tiny relative to the data.
      const double scale = 1.0 + z.cwiseAbs().maxCoeff();
      if (gnorm < 1e3 * opts.grad_tol * scale) break;
      std::ostringstream os;
      os << "lagrangian line search stalled with gradient norm " << gnorm;
      throw NumericalFailure(os.str(), f);
    }
  }
  if (gnorm >= opts.grad_tol) {
    const double scale = 1.0 + z.cwiseAbs().maxCoeff();
    if (!(gnorm < 1e3 * opts.grad_tol * scale)) {
      std::ostringstream os;
      os << "lagrangian did not converge in " << it << " iterations (gradient norm " << gnorm << ")";
      throw NumericalFailure(os.str(), f);
    }
  }

  out.value = std::max(f, 0.0);
  out.iterations = it;
  out.grad_norm = gnorm;
  if (out.classes.size() == 1 && out.classes.front().size() == S) {
    Vec lambda = Vec::Zero(static_cast<Eigen::Index>(S));
    for (Eigen::Index v = 0; v < nfree; ++v) lambda[static_cast<Eigen::Index>(free_states[static_cast<std::size_t>(v)])] = x[v];
    out.maximizer = DualVector(std::move(lambda));
  }
  return out;
}

BoundReport optimizer_bound_report(const std::vector<BoundSample>& samples, const StateSpace& ss,
                                   const ModelParams& p) {
  BoundReport rep;
  for (const auto& s : samples) {
    const RateEval ev = lagrangian(s.y, s.z, ss, p);
    if (!ev.finite || !ev.maximizer) throw InvalidArgument("bound report needs finite L at interior y");
    const Vec& lam = ev.maximizer->values();
    double qmax = 0.0;
    for (int k = 0; k < p.K; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      for (std::size_t i = 0; i < ss.size(); ++i) {
        const std::size_t up = ss.up[ku][i];
        if (up == kNoState) continue;
        const double a = at(lam, up) - at(lam, i);
        for (std::size_t j = 0; j < ss.size(); ++j) {
          const std::size_t dn = ss.down[ku][j];
          if (dn == kNoState) continue;
          const double b = at(lam, dn) - at(lam, j);
          const double q = std::exp(a) * at(s.y, i) + std::exp(b) * at(s.y, j) + std::exp(a + b) * at(s.y, i) * at(s.y, j);
          qmax = std::max(qmax, q);
        }
      }
    }
    const double r = qmax / (1.0 + s.z.cwiseAbs().sum());
    rep.max_quantity.push_back(qmax);
    rep.ratio.push_back(r);
    rep.max_ratio = std::max(rep.max_ratio, r);
  }
  return rep;
}

}  // namespace lossnet
