#include "lossnet/action.hpp"

#include "lossnet/parallel.hpp"
#include "lossnet/ratefn.hpp"
#include "lossnet/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

namespace lossnet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double tangent_sum_tol(std::size_t) { return 1e-9; }

}  // namespace

void PathGrid::validate(std::size_t states) const {
  if (knots.size() < 3) throw InvalidArgument("path needs at least 2 segments");
  if (!(dt > 0.0)) throw InvalidArgument("path spacing must be positive");
  if (floor < 0.0) throw InvalidArgument("path floor must be nonnegative");
  for (const auto& y : knots) {
    if (static_cast<std::size_t>(y.size()) != states) throw InvalidArgument("path knot has the wrong length");
    if (std::abs(y.sum() - 1.0) > tangent_sum_tol(states) || y.minCoeff() < -1e-12)
      throw InvalidArgument("path knot is not on the simplex");
  }
}

PathGrid straight_path(const Vec& y0, const Vec& y1, double T, int M) {
  if (M < 2 || !(T > 0.0)) throw InvalidArgument("straight path needs M >= 2 and T > 0");
  PathGrid path;
  path.dt = T / M;
  path.knots.reserve(static_cast<std::size_t>(M) + 1);
  for (int j = 0; j <= M; ++j) {
    const double s = static_cast<double>(j) / M;
    path.knots.push_back((1.0 - s) * y0 + s * y1);
  }
  path.knots.back() = y1;
  return path;
}

PathGrid path_from_trajectory(const Trajectory& tr) {
  if (tr.times.size() < 3) throw InvalidArgument("trajectory too short for a path");
  PathGrid path;
  path.dt = tr.times[1] - tr.times[0];
  for (std::size_t i = 1; i < tr.times.size(); ++i)
    if (std::abs(tr.times[i] - tr.times[i - 1] - path.dt) > 1e-9 * std::max(1.0, tr.times[i]))
      throw InvalidArgument("trajectory samples are not uniformly spaced");
  for (const auto& y : tr.points) path.knots.push_back(y.values());
  return path;
}

namespace {

/// Linear interpolation of a path onto M segments over the same horizon.
PathGrid resample(const PathGrid& src, int M) {
  PathGrid out;
  out.dt = src.horizon() / M;
  out.floor = src.floor;
  const int Ms = src.segments();
  for (int j = 0; j <= M; ++j) {
    const double pos = static_cast<double>(j) * Ms / M;
    const int lo = std::min(Ms - 1, static_cast<int>(std::floor(pos)));
    const double w = pos - lo;
    out.knots.push_back((1.0 - w) * src.knots[static_cast<std::size_t>(lo)] +
                        w * src.knots[static_cast<std::size_t>(lo) + 1]);
  }
  out.knots.front() = src.knots.front();
  out.knots.back() = src.knots.back();
  return out;
}

/// Path over [0, T] that rests at the start of `src` and then follows it.
PathGrid pad_front(const PathGrid& src, double T, int M) {
  const double extra = T - src.horizon();
  if (extra <= 0.0) return resample(src, M);
  PathGrid out;
  out.dt = T / M;
  for (int j = 0; j <= M; ++j) {
    const double t = j * out.dt - extra;
    if (t <= 0.0) {
      out.knots.push_back(src.knots.front());
      continue;
    }
    const double pos = t / src.dt;
    const int lo = std::min(src.segments() - 1, static_cast<int>(std::floor(pos)));
    const double w = std::min(1.0, pos - lo);
    out.knots.push_back((1.0 - w) * src.knots[static_cast<std::size_t>(lo)] +
                        w * src.knots[static_cast<std::size_t>(lo) + 1]);
  }
  out.knots.back() = src.knots.back();
  return out;
}

class ActionEvaluator {
 public:
  ActionEvaluator(const StateSpace& ss, const ModelParams& p) : ss_(ss), p_(p) {}

  /// dt * L on one segment; caches the dual maximizer as the next warm start.
  double segment(const Vec& a, const Vec& b, double dt, std::size_t j, Vec* lambda = nullptr) {
    if (warm_.size() <= j) warm_.resize(j + 1);
    const Vec mid = 0.5 * (a + b);
    const Vec z = (b - a) / dt;
    LagrangianOptions lo;
    if (warm_[j].size() > 0) lo.initial = &warm_[j];
    const RateEval ev = lagrangian(mid, z, ss_, p_, lo);
    if (!ev.finite) return kInf;
    if (ev.maximizer) {
      warm_[j] = ev.maximizer->values();
      if (lambda) *lambda = warm_[j];
    } else if (lambda) {
      lambda->resize(0);
    }
    return dt * ev.value;
  }

  double value(const PathGrid& path) {
    double total = 0.0;
    for (int j = 0; j < path.segments(); ++j) {
      const auto ju = static_cast<std::size_t>(j);
      total += segment(path.knots[ju], path.knots[ju + 1], path.dt, ju);
      if (!std::isfinite(total)) return kInf;
    }
    return total;
  }

  /// Action and its gradient with respect to the interior knots.
  double value_and_grad(const PathGrid& path, GradientMode mode, double fd_step, std::vector<Vec>& grad) {
    const int M = path.segments();
    const double dt = path.dt;
    grad.assign(static_cast<std::size_t>(M - 1), Vec::Zero(static_cast<Eigen::Index>(ss_.size())));
    std::vector<Vec> lam(static_cast<std::size_t>(M));
    double total = 0.0;
    bool envelope = mode == GradientMode::kEnvelope;
    for (int j = 0; j < M; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      total += segment(path.knots[ju], path.knots[ju + 1], dt, ju, &lam[ju]);
      if (!std::isfinite(total)) return kInf;
      if (lam[ju].size() == 0) envelope = false;
    }
    if (envelope) {
      for (int j = 0; j < M; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        const Vec mid = 0.5 * (path.knots[ju] + path.knots[ju + 1]);
        const Vec gy = grad_hamiltonian_y(mid, lam[ju], ss_, p_);
        // d/dy_{j+1}: +lambda - dt/2 dH/dy ; d/dy_j: -lambda - dt/2 dH/dy
        if (j + 1 <= M - 1) grad[ju] += lam[ju] - 0.5 * dt * gy;
        if (j >= 1) grad[ju - 1] += -lam[ju] - 0.5 * dt * gy;
      }
      return total;
    }
    const auto S = static_cast<Eigen::Index>(ss_.size());
    PathGrid work = path;
    for (int j = 1; j < M; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      for (Eigen::Index c = 0; c < S; ++c) {
        Vec dir = Vec::Constant(S, -1.0 / static_cast<double>(S));
        dir[c] += 1.0;
        const double h = std::min(fd_step, 0.5 * path.knots[ju].minCoeff());
        auto local = [&](double sign) {
          work.knots[ju] = path.knots[ju] + sign * h * dir;
          return segment(work.knots[ju - 1], work.knots[ju], dt, ju - 1) +
                 segment(work.knots[ju], work.knots[ju + 1], dt, ju);
        };
        const double fp = local(1.0);
        const double fm = local(-1.0);
        work.knots[ju] = path.knots[ju];
        grad[ju - 1][c] = (fp - fm) / (2.0 * h);
      }
    }
    return total;
  }

 private:
  const StateSpace& ss_;
  const ModelParams& p_;
  std::vector<Vec> warm_;
};

double safe_value(ActionEvaluator& ev, const PathGrid& path) {
  try {
    return ev.value(path);
  } catch (const NumericalFailure&) {
    return kInf;
  }
}

void project_interior(PathGrid& path, double floor) {
  path.floor = floor;
  for (std::size_t j = 1; j + 1 < path.knots.size(); ++j) path.knots[j] = project_to_simplex(path.knots[j], floor);
}

double dot_interior(const std::vector<Vec>& a, const PathGrid& d) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j].dot(d.knots[j + 1]);
  return s;
}

struct StageOutcome {
  double value;
  int iterations;
  bool converged;
};

/// Spectral projected gradient with a nonmonotone Armijo search.
StageOutcome spg_stage(PathGrid& path, ActionEvaluator& ev, const ActionOptions& opts) {
  const std::size_t interior = path.knots.size() - 2;
  std::vector<Vec> g;
  double f = ev.value_and_grad(path, opts.gradient, opts.fd_step, g);
  if (!std::isfinite(f)) throw NumericalFailure("action is infinite at the projected initial path", f);

  auto projected_step = [&](const PathGrid& x, const std::vector<Vec>& grad, double step) {
    PathGrid d = x;
    for (std::size_t j = 0; j < interior; ++j)
      d.knots[j + 1] = project_to_simplex(x.knots[j + 1] - step * grad[j], path.floor) - x.knots[j + 1];
    d.knots.front().setZero();
    d.knots.back().setZero();
    return d;
  };
  auto sup = [&](const PathGrid& d) {
    double m = 0.0;
    for (std::size_t j = 1; j + 1 < d.knots.size(); ++j) m = std::max(m, d.knots[j].cwiseAbs().maxCoeff());
    return m;
  };

  std::deque<double> recent{f};
  std::vector<double> history{f};
  double step = 0.0;
  {
    const double pg = sup(projected_step(path, g, 1.0));
    step = pg > 0.0 ? std::min(1.0, 1e-2 / pg) : 1.0;
  }
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    if (sup(projected_step(path, g, 1.0)) < opts.grad_tol) return {f, it, true};
    const std::size_t window = 25;
    if (history.size() > window) {
      const double old = history[history.size() - 1 - window];
      if (old - f <= opts.rel_tol * (std::abs(f) + 1e-10)) return {f, it, true};
    }

    const PathGrid d = projected_step(path, g, step);
    const double slope = dot_interior(g, d);
    if (!(slope < 0.0)) return {f, it, true};
    const double fref = *std::max_element(recent.begin(), recent.end());
    double t = 1.0;
    PathGrid trial = path;
    double ft = kInf;
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls) {
      for (std::size_t j = 1; j + 1 < trial.knots.size(); ++j) trial.knots[j] = path.knots[j] + t * d.knots[j];
      ft = safe_value(ev, trial);
      if (std::isfinite(ft) && ft <= fref + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) return {f, it, false};

    std::vector<Vec> gt;
    ft = ev.value_and_grad(trial, opts.gradient, opts.fd_step, gt);
    double ss_dot = 0.0, sy_dot = 0.0;
    for (std::size_t j = 0; j < interior; ++j) {
      const Vec s = trial.knots[j + 1] - path.knots[j + 1];
      Vec yv = gt[j] - g[j];
      yv.array() -= yv.mean();  // gradients are defined up to a constant per knot
      ss_dot += s.squaredNorm();
      sy_dot += s.dot(yv);
    }
    step = sy_dot > 0.0 ? std::clamp(ss_dot / sy_dot, 1e-12, 1e12) : 1e12;
    path = std::move(trial);
    g = std::move(gt);
    f = ft;
    history.push_back(f);
    recent.push_back(f);
    if (recent.size() > 10) recent.pop_front();
  }
  return {f, it, false};
}

PathGrid ode_arc_path(const Vec& y0, const Vec& y1, double T, int M, const StateSpace& ss, const ModelParams& p) {
  const int arc = M / 2;
  OdeOptions o;
  o.step = std::min(1e-2, T / M / 4.0);
  const double arc_time = T * arc / M;
  const auto per = static_cast<std::size_t>(std::llround(arc_time / arc / o.step));
  o.step = arc_time / arc / static_cast<double>(per);
  o.record_every = per;
  const Trajectory tr = integrate_ode(Occupancy(y0), arc_time, ss, p, o);
  PathGrid path;
  path.dt = T / M;
  for (int j = 0; j <= arc; ++j) path.knots.push_back(tr.points[static_cast<std::size_t>(j)].values());
  const Vec mid = path.knots.back();
  for (int j = arc + 1; j <= M; ++j) {
    const double s = static_cast<double>(j - arc) / (M - arc);
    path.knots.push_back((1.0 - s) * mid + s * y1);
  }
  path.knots.front() = y0;
  path.knots.back() = y1;
  return path;
}

ActionResult minimize_from(std::vector<std::pair<std::string, PathGrid>> candidates, int M,
                           const StateSpace& ss, const ModelParams& p, const ActionOptions& opts) {
  std::vector<double> floors;
  const double cap = 0.5 / static_cast<double>(ss.size());
  for (double f : opts.floors) floors.push_back(std::min(f, cap));
  if (floors.empty()) floors.push_back(0.0);

  std::vector<int> levels{M};
  if (opts.coarse_to_fine)
    while (levels.back() >= 32) levels.push_back((levels.back() + 1) / 2);
  std::reverse(levels.begin(), levels.end());

  ActionResult res;
  double best = kInf;
  for (auto& [name, cand] : candidates) {
    PathGrid c = resample(cand, levels.front());
    project_interior(c, floors.front());
    ActionEvaluator probe(ss, p);
    const double v = safe_value(probe, c);
    if (v < best) {
      best = v;
      res.path = std::move(c);
      res.initialization = name;
    }
  }
  if (!std::isfinite(best)) throw NumericalFailure("no initial path with finite action", kInf);

  for (std::size_t lv = 0; lv < levels.size(); ++lv) {
    if (lv > 0) res.path = resample(res.path, levels[lv]);
    ActionEvaluator ev(ss, p);
    const std::size_t first = lv == 0 ? 0 : floors.size() - 1;
    for (std::size_t s = first; s < floors.size(); ++s) {
      project_interior(res.path, floors[s]);
      const StageOutcome out = spg_stage(res.path, ev, opts);
      res.iterations += out.iterations;
      res.converged = out.converged;
      res.action = out.value;
    }
  }
  res.final_floor = floors.back();
  res.action = std::max(0.0, res.action);
  return res;
}

}  // namespace

double path_action(const PathGrid& path, const StateSpace& ss, const ModelParams& p) {
  path.validate(ss.size());
  ActionEvaluator ev(ss, p);
  return ev.value(path);
}

ActionResult minimize_action(const Vec& y0, const Vec& y1, double T, int M, const StateSpace& ss,
                             const ModelParams& p, const ActionOptions& opts) {
  if (!(T > 0.0)) throw InvalidArgument("minimize_action: T must be positive");
  if (M < 8) throw InvalidArgument("minimize_action: M must be at least 8");
  const auto S = static_cast<Eigen::Index>(ss.size());
  if (y0.size() != S || y1.size() != S) throw InvalidArgument("minimize_action: endpoint length mismatch");
  std::vector<std::pair<std::string, PathGrid>> cands;
  if (opts.initial) {
    PathGrid g = pad_front(*opts.initial, T, M);
    g.knots.front() = y0;
    g.knots.back() = y1;
    cands.emplace_back("given", std::move(g));
  }
  cands.emplace_back("straight", straight_path(y0, y1, T, M));
  try {
    cands.emplace_back("ode-arc", ode_arc_path(y0, y1, T, M, ss, p));
  } catch (const NumericalFailure&) {
  }
  return minimize_from(std::move(cands), M, ss, p, opts);
}

std::vector<ScheduleEntry> default_schedule() { return {{2.0, 80}, {5.0, 200}, {10.0, 400}, {20.0, 800}}; }

QuasipotentialResult quasipotential(const Vec& from, const Vec& to, const StateSpace& ss, const ModelParams& p,
                                    const std::vector<ScheduleEntry>& schedule, const ActionOptions& opts) {
  if (schedule.empty()) throw InvalidArgument("quasipotential: empty schedule");
  for (std::size_t i = 1; i < schedule.size(); ++i)
    if (!(schedule[i].T > schedule[i - 1].T)) throw InvalidArgument("quasipotential: schedule T must increase");
  QuasipotentialResult res;
  res.value = kInf;
  if (sup_distance(from, to) == 0.0) {
    res.value = 0.0;
    res.per_entry.assign(schedule.size(), 0.0);
    res.best.path = straight_path(from, to, schedule.front().T, std::max(2, schedule.front().M));
    return res;
  }
  std::optional<PathGrid> previous;
  for (const auto& e : schedule) {
    ActionOptions o = opts;
    if (previous) o.initial = &*previous;
    ActionResult r = minimize_action(from, to, e.T, e.M, ss, p, o);
    res.per_entry.push_back(r.action);
    if (res.per_entry.size() > 1 && r.action > res.per_entry[res.per_entry.size() - 2] + 1e-3) res.monotone = false;
    if (r.action < res.value) {
      res.value = r.action;
      res.best = r;
    }
    previous = r.path;
  }
  return res;
}

QuasipotentialMatrix quasipotential_matrix(const std::vector<Vec>& points, const StateSpace& ss,
                                           const ModelParams& p, const std::vector<ScheduleEntry>& schedule,
                                           unsigned threads, const ActionOptions& opts) {
  QuasipotentialMatrix qp;
  qp.points = points;
  const auto n = static_cast<Eigen::Index>(points.size());
  qp.phi = Mat::Zero(n, n);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) pairs.emplace_back(i, j);
  qp.records.resize(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t w) {
    const auto [i, j] = pairs[w];
    QuasipotentialResult r = quasipotential(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(j)],
                                            ss, p, schedule, opts);
    qp.phi(i, j) = r.value;
    qp.records[w] = {static_cast<int>(i), static_cast<int>(j), std::move(r)};
  });
  return qp;
}

Vec tree_formula(const Mat& phi) {
  const auto n = static_cast<int>(phi.rows());
  if (phi.cols() != phi.rows() || n < 1) throw InvalidArgument("tree_formula: phi must be square and non-empty");
  if (n > kMaxTreeVertices) throw InvalidArgument("tree_formula: more than 8 equilibria");
  if (!phi.allFinite() || phi.minCoeff() < 0.0) throw InvalidArgument("tree_formula: entries must be finite and >= 0");

  Vec W = Vec::Constant(n, kInf);
  std::vector<int> parent(static_cast<std::size_t>(n), -1);
  for (int root = 0; root < n; ++root) {
    std::vector<int> others;
    for (int v = 0; v < n; ++v)
      if (v != root) others.push_back(v);
    // Depth-first over parent assignments; acyclicity checked when complete.
    auto reaches_root = [&](int v) {
      for (int steps = 0; steps <= n; ++steps) {
        if (v == root) return true;
        v = parent[static_cast<std::size_t>(v)];
      }
      return false;
    };
    auto rec = [&](auto&& self, std::size_t pos, double acc) -> void {
      if (acc >= W[root]) return;
      if (pos == others.size()) {
        for (int v : others)
          if (!reaches_root(v)) return;
        W[root] = acc;
        return;
      }
      const int v = others[pos];
      for (int u = 0; u < n; ++u) {
        if (u == v) continue;
        parent[static_cast<std::size_t>(v)] = u;
        self(self, pos + 1, acc + phi(v, u));
      }
      parent[static_cast<std::size_t>(v)] = -1;
    };
    rec(rec, 0, 0.0);
  }
  return W.array() - W.minCoeff();
}

double balance_residual(const Mat& phi, const Vec& J) {
  const auto n = static_cast<int>(phi.rows());
  double worst = 0.0;
  for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
    double left = kInf, right = kInf;
    for (int a = 0; a < n; ++a) {
      if (!(mask >> a & 1u)) continue;
      for (int b = 0; b < n; ++b) {
        if (mask >> b & 1u) continue;
        left = std::min(left, J[a] + phi(a, b));
        right = std::min(right, J[b] + phi(b, a));
      }
    }
    worst = std::max(worst, std::abs(left - right));
  }
  return worst;
}

double invariant_deviation(const Vec& y, const QuasipotentialMatrix& qp, const Vec& J, const StateSpace& ss,
                           const ModelParams& p, const std::vector<ScheduleEntry>& schedule, double zero_tol,
                           const ActionOptions& opts) {
  const std::size_t n = qp.points.size();
  if (n == 0 || static_cast<std::size_t>(J.size()) != n) throw InvalidArgument("invariant_deviation: bad inputs");
  std::vector<bool> kept(n, true);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && kept[j] &&
          qp.phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) <= zero_tol) {
        kept[i] = false;
        break;
      }
  double best = kInf;
  for (std::size_t i = 0; i < n; ++i) {
    if (!kept[i]) continue;
    const double Ji = J[static_cast<Eigen::Index>(i)];
    if (Ji >= best) continue;
    best = std::min(best, Ji + quasipotential(qp.points[i], y, ss, p, schedule, opts).value);
  }
  return best;
}

bool ExitDomain::contains(const Vec& y, const StateSpace& ss, const ModelParams& p) const {
  if (kind == Kind::kBall) return sup_distance(y, center) < radius;
  return lyapunov_g(y, ss, p) < level;
}

std::vector<Vec> exit_boundary_mesh(const ExitDomain& domain, const StateSpace& ss, const ModelParams& p,
                                    int random_directions, std::uint64_t seed, int* unreachable) {
  const auto S = static_cast<Eigen::Index>(ss.size());
  if (domain.center.size() != S) throw InvalidArgument("exit domain center has the wrong length");
  if (domain.kind == ExitDomain::Kind::kBall && !(domain.radius > 0.0))
    throw InvalidArgument("exit ball radius must be positive");
  std::vector<Vec> dirs;
  for (Eigen::Index i = 0; i < S; ++i) {
    Vec d = Vec::Constant(S, -1.0 / static_cast<double>(S));
    d[i] += 1.0;
    d /= d.cwiseAbs().maxCoeff();
    dirs.push_back(d);
    dirs.push_back(-d);
  }
  CounterRng rng(seed, 0x6d657368ULL);
  for (int r = 0; r < random_directions; ++r) {
    Vec d(S);
    for (Eigen::Index i = 0; i < S; ++i) d[i] = rng.normal();
    d.array() -= d.mean();
    d /= d.cwiseAbs().maxCoeff();
    dirs.push_back(d);
  }

  std::vector<Vec> mesh;
  int missed = 0;
  const Vec& c = domain.center;
  for (const Vec& d : dirs) {
    // Largest t with c + t d still on the simplex.
    double tmax = kInf;
    for (Eigen::Index i = 0; i < S; ++i)
      if (d[i] < 0.0) tmax = std::min(tmax, c[i] / -d[i]);
    Vec point;
    if (domain.kind == ExitDomain::Kind::kBall) {
      if (domain.radius > tmax) {
        ++missed;
        continue;
      }
      point = c + domain.radius * d;
    } else {
      auto outside = [&](double t) { return lyapunov_g(c + t * d, ss, p) >= domain.level; };
      if (!outside(tmax)) {
        ++missed;
        continue;
      }
      double lo = 0.0, hi = tmax;
      for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        (outside(mid) ? hi : lo) = mid;
      }
      point = c + hi * d;
    }
    point = point.cwiseMax(0.0);
    point /= point.sum();
    bool dup = false;
    for (const auto& q : mesh)
      if (sup_distance(q, point) < 1e-12) dup = true;
    if (!dup) mesh.push_back(point);
  }
  if (unreachable) *unreachable = missed;
  return mesh;
}

ExitRateResult exit_rate_U(const Vec& equilibrium, const ExitDomain& domain, const StateSpace& ss,
                           const ModelParams& p, const ExitRateOptions& opts) {
  if (!domain.contains(equilibrium, ss, p)) throw InvalidArgument("exit domain does not contain the equilibrium");
  ExitRateResult res;
  res.mesh = exit_boundary_mesh(domain, ss, p, opts.random_directions, opts.seed, &res.unreachable);
  res.values.assign(res.mesh.size(), kInf);
  parallel_for(res.mesh.size(), opts.threads, [&](std::size_t i) {
    res.values[i] = quasipotential(equilibrium, res.mesh[i], ss, p, opts.schedule, opts.action).value;
  });
  res.U = kInf;
  for (std::size_t i = 0; i < res.mesh.size(); ++i)
    if (res.values[i] < res.U) {
      res.U = res.values[i];
      res.argmin = res.mesh[i];
    }
  return res;
}

Vec unstable_direction(const Vec& y, const StateSpace& ss, const ModelParams& p) {
  const auto S = static_cast<Eigen::Index>(ss.size());
  Mat J(S, S);
  for (Eigen::Index c = 0; c < S; ++c) {
    const double h = 1e-7 * std::max(1e-3, std::abs(y[c]));
    Vec yp = y, ym = y;
    yp[c] += h;
    ym[c] -= h;
    J.col(c) = (vector_field(yp, ss, p) - vector_field(ym, ss, p)) / (2.0 * h);
  }
  Eigen::EigenSolver<Mat> es(J);
  const auto& ev = es.eigenvalues();
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < S; ++i)
    if (ev[i].real() > ev[best].real()) best = i;
  if (!(ev[best].real() > 1e-9)) throw InvalidArgument("linearized flow has no unstable direction at this point");
  Vec d = es.eigenvectors().col(best).real();
  d.array() -= d.mean();
  Eigen::Index arg = 0;
  d.cwiseAbs().maxCoeff(&arg);
  d /= d[arg];
  return d;
}

}  // namespace lossnet
