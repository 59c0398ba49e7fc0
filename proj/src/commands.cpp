#include "lossnet/commands.hpp"

#include "lossnet/action.hpp"
#include "lossnet/equilibria.hpp"
#include "lossnet/io.hpp"
#include "lossnet/meanfield.hpp"
#include "lossnet/ratefn.hpp"
#include "lossnet/sim.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

namespace lossnet {

namespace {

class Session {
 public:
  Session(const RunConfig& cfg, const CommandContext& ctx, const std::string& command)
      : cfg_(cfg), ctx_(ctx), ss_(build_state_space(cfg.model)), prov_{cfg.hash(), command} {}

  const StateSpace& ss() const { return ss_; }
  const ModelParams& p() const { return cfg_.model; }
  const Provenance& prov() const { return prov_; }
  unsigned threads() const { return ctx_.threads; }

  void log(const std::string& msg) const {
    if (ctx_.log) *ctx_.log << msg << '\n';
  }

  const EquilibriumSet& equilibria() {
    if (!eq_) {
      ScanGrid grid = default_scan_grid(p());
      if (cfg_.equilibria.grid_counts) grid.counts = *cfg_.equilibria.grid_counts;
      grid.threads = threads();
      eq_ = solve_equilibria_generic(ss_, p(), grid);
      for (const auto& w : eq_->warnings) log("warning: " + w);
      if (eq_->equilibria.empty()) throw NumericalFailure("the equilibrium scan found no solution", 0.0);
    }
    return *eq_;
  }

  std::vector<std::size_t> stable_indices() {
    std::vector<std::size_t> idx;
    const auto& eqs = equilibria().equilibria;
    for (std::size_t i = 0; i < eqs.size(); ++i)
      if (eqs[i].classification == Stability::kLocalMin) idx.push_back(i);
    return idx;
  }

  Vec resolve(const PointSpec& ps) {
    const auto S = static_cast<Eigen::Index>(ss_.size());
    switch (ps.kind) {
      case PointSpec::Kind::kUniform:
        return uniform_occupancy(ss_).values();
      case PointSpec::Kind::kExplicit:
        if (ps.values.size() != S) throw ConfigError("point has " + std::to_string(ps.values.size()) +
                                                     " entries, the state space has " + std::to_string(S));
        if (ps.values.minCoeff() < 0.0) throw ConfigError("point has a negative entry");
        return Occupancy(ps.values).values();
      case PointSpec::Kind::kRho:
        if (ps.values.size() != p().K) throw ConfigError("rho point needs one load per class");
        return erlang_nu(RhoVector(ps.values), ss_).values();
      case PointSpec::Kind::kEquilibrium: {
        const auto& eqs = equilibria().equilibria;
        if (static_cast<std::size_t>(ps.equilibrium) >= eqs.size())
          throw ConfigError("equilibrium index " + std::to_string(ps.equilibrium) + " out of range (found " +
                            std::to_string(eqs.size()) + ")");
        return eqs[static_cast<std::size_t>(ps.equilibrium)].nu.values();
      }
    }
    throw ConfigError("unsupported point");
  }

  Vec default_center() {
    const auto st = stable_indices();
    if (st.empty()) throw NumericalFailure("no stable equilibrium to center on", 0.0);
    return equilibria().equilibria[st.front()].nu.values();
  }

  ExitDomain domain(const DomainSpec& d, const Vec& center) const {
    ExitDomain dom;
    dom.kind = d.kind;
    dom.center = center;
    dom.radius = d.radius;
    if (d.kind == ExitDomain::Kind::kSublevel)
      dom.level = d.level ? *d.level : lyapunov_g(center, ss_, p()) + d.offset.value_or(0.0);
    return dom;
  }

  ActionOptions action_options() const {
    ActionOptions o;
    o.floors = cfg_.action.floors;
    o.gradient = cfg_.action.gradient;
    return o;
  }

  std::vector<std::string> state_columns(const std::string& prefix = "y") const {
    std::vector<std::string> cols;
    for (std::size_t i = 0; i < ss_.size(); ++i) cols.push_back(state_label(ss_, i, prefix));
    return cols;
  }

  const RunConfig& cfg() const { return cfg_; }

 private:
  const RunConfig& cfg_;
  const CommandContext& ctx_;
  StateSpace ss_;
  Provenance prov_;
  std::optional<EquilibriumSet> eq_;
};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<double> as_vector(const Vec& v) { return {v.data(), v.data() + v.size()}; }

std::vector<double> concat(std::vector<double> a, const Vec& b) {
  a.insert(a.end(), b.data(), b.data() + b.size());
  return a;
}

void write_path_csv(const std::filesystem::path& file, Session& s, const std::vector<double>& times,
                    const std::vector<Vec>& points) {
  CsvWriter w(file, s.prov(), concat({"t"}, s.state_columns()));
  for (std::size_t i = 0; i < times.size(); ++i) w.row(concat({times[i]}, points[i]));
  w.close();
}

Vec logspace(double lo, double hi, int n) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = lo * std::pow(hi / lo, n == 1 ? 0.0 : static_cast<double>(i) / (n - 1));
  return v;
}

void write_equilibria(OutputTransaction& tx, Session& s) {
  const auto& set = s.equilibria();
  const int K = s.p().K;
  std::vector<std::string> cols{"index"};
  for (int k = 1; k <= K; ++k) cols.push_back("rho_" + std::to_string(k));
  cols.insert(cols.end(), {"residual", "phi", "g", "classification"});
  for (int k = 1; k <= K; ++k) cols.push_back("eigenvalue_" + std::to_string(k));
  for (int a = 1; a <= K; ++a)
    for (int b = 1; b <= K; ++b) cols.push_back("hessian_" + std::to_string(a) + std::to_string(b));
  for (int k = 1; k <= K; ++k) cols.push_back("EQ_" + std::to_string(k));
  CsvWriter w(tx.file("equilibria.csv"), s.prov(), cols);
  for (std::size_t i = 0; i < set.equilibria.size(); ++i) {
    const auto& e = set.equilibria[i];
    std::vector<std::string> row{std::to_string(i)};
    for (int k = 0; k < K; ++k) row.push_back(format_number(e.rho[k]));
    row.insert(row.end(), {format_number(e.residual), format_number(e.phi), format_number(e.g),
                           to_string(e.classification)});
    for (int k = 0; k < K; ++k) row.push_back(format_number(e.eigenvalues[k]));
    for (int a = 0; a < K; ++a)
      for (int b = 0; b < K; ++b) row.push_back(format_number(e.hessian(a, b)));
    const Vec eq = expected_customers(e.rho, s.ss(), s.p());
    for (int k = 0; k < K; ++k) row.push_back(format_number(eq[k]));
    w.row(row);
  }
  w.close();
}

void write_h_curve(OutputTransaction& tx, Session& s) {
  const auto& cfg = s.cfg().equilibria;
  const HCurveScan scan = scan_h_curve(s.p(), cfg.h_points, cfg.h_lo);
  {
    CsvWriter w(tx.file("h_curve.csv"), s.prov(), {"rho_1", "rho_2", "h"});
    for (std::size_t i = 0; i < scan.rho1.size(); ++i)
      w.row(std::vector<double>{scan.rho1[i], two_class_rho2(scan.rho1[i], s.p()), scan.h[i]});
    w.close();
  }
  SvgPlot plot;
  plot.title = "h along the class-2 solution branch";
  plot.x_label = "rho_1";
  plot.y_label = "h(rho_1)";
  plot.log_x = true;
  plot.symlog_y = cfg.symlog;
  plot.x = scan.rho1;
  plot.y = scan.h;
  {
    CsvWriter w(tx.file("h_landmarks.csv"), s.prov(), {"kind", "rho_1", "h"});
    for (double r : scan.roots) {
      w.row({"root", format_number(r), format_number(two_class_h(r, s.p()))});
      plot.markers.push_back({r, 0.0, "root"});
    }
    for (const auto& e : scan.extrema) {
      w.row({e.is_min ? "min" : "max", format_number(e.rho1), format_number(e.value)});
      std::ostringstream os;
      os << (e.is_min ? "min " : "max ") << std::setprecision(5) << e.value;
      plot.markers.push_back({e.rho1, e.value, os.str()});
    }
    w.close();
  }
  write_svg(tx.file("h_curve.svg"), s.prov(), plot);
}

void write_phi_grid(OutputTransaction& tx, Session& s) {
  const ModelParams& p = s.p();
  const int n = s.cfg().equilibria.phi_grid_points;
  const ScanGrid range = default_scan_grid(p);
  std::vector<Vec> axes;
  for (int k = 0; k < p.K; ++k) axes.push_back(logspace(0.5 * range.lo[k], 2.0 * range.hi[k], n));
  if (p.K == 1) {
    CsvWriter w(tx.file("phi_grid.csv"), s.prov(), {"rho_1", "phi"});
    for (int i = 0; i < n; ++i) {
      Vec r(1);
      r << axes[0][i];
      w.row(std::vector<double>{r[0], phi(RhoVector(r), p, s.ss())});
    }
    w.close();
  } else if (p.K == 2) {
    CsvWriter w(tx.file("phi_grid.csv"), s.prov(), {"rho_1", "rho_2", "phi"});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Vec r(2);
        r << axes[0][i], axes[1][j];
        w.row(std::vector<double>{r[0], r[1], phi(RhoVector(r), p, s.ss())});
      }
    w.close();
  } else {
    s.log("note: phi_grid.csv is only written for one or two classes");
  }
}

std::vector<RatePoint> read_rate_csv(const std::filesystem::path& path, std::size_t states) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read rate input " + path.string());
  std::string line;
  std::vector<std::string> header;
  std::vector<RatePoint> pts;
  auto split = [](const std::string& l) {
    std::vector<std::string> out;
    std::stringstream ss(l);
    std::string f;
    while (std::getline(ss, f, ',')) {
      while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.pop_back();
      out.push_back(f);
    }
    return out;
  };
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line == "\r") continue;
    const auto f = split(line);
    if (header.empty()) {
      header = f;
      if (header.size() != 2 * states) throw ConfigError("rate input needs 2*|Theta| columns (y then z)");
      continue;
    }
    if (f.size() != header.size()) throw ConfigError("rate input row has the wrong number of fields");
    RatePoint rp{Vec(static_cast<Eigen::Index>(states)), Vec(static_cast<Eigen::Index>(states))};
    for (std::size_t i = 0; i < states; ++i) {
      try {
        rp.y[static_cast<Eigen::Index>(i)] = std::stod(f[i]);
        rp.z[static_cast<Eigen::Index>(i)] = std::stod(f[states + i]);
      } catch (const std::exception&) {
        throw ConfigError("rate input has a non-numeric field");
      }
    }
    pts.push_back(rp);
  }
  return pts;
}

SimConfig sim_config(Session& s) {
  const auto& b = s.cfg().simulation;
  SimConfig sc;
  sc.n = b.n;
  sc.seed = s.cfg().seed;
  sc.horizon = b.horizon;
  sc.record_dt = b.record_dt;
  const Vec y0 = b.y0 ? s.resolve(*b.y0) : s.default_center();
  sc.y0 = b.snap_to_grid ? round_to_grid(y0, b.n) : y0;
  return sc;
}

}  // namespace

int cmd_equilibria(const RunConfig& cfg, const CommandContext& ctx) {
  OutputTransaction tx(ctx.out_dir);
  Session s(cfg, ctx, "equilibria");
  write_equilibria(tx, s);
  if (is_two_class_geometry(s.p()))
    write_h_curve(tx, s);
  else
    s.log("note: h_curve.csv and h_curve.svg need the two-class geometry A = (1, C)");
  write_phi_grid(tx, s);
  s.log("equilibria: " + std::to_string(s.equilibria().equilibria.size()) + " found");
  tx.commit();
  return kExitOk;
}

int cmd_ode(const RunConfig& cfg, const CommandContext& ctx) {
  OutputTransaction tx(ctx.out_dir);
  Session s(cfg, ctx, "ode");
  OdeOptions o;
  o.step = cfg.ode.step;
  o.record_every = static_cast<std::size_t>(cfg.ode.record_every);
  const Trajectory tr = integrate_ode(Occupancy(s.resolve(cfg.ode.y0)), cfg.ode.horizon, s.ss(), s.p(), o);
  CsvWriter w(tx.file("trajectory.csv"), s.prov(), concat({"t"}, s.state_columns()));
  CsvWriter lg(tx.file("lyapunov.csv"), s.prov(), {"t", "g"});
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    w.row(concat({tr.times[i]}, tr.points[i].values()));
    lg.row(std::vector<double>{tr.times[i], lyapunov_g(tr.points[i].values(), s.ss(), s.p())});
  }
  w.close();
  lg.close();
  tx.commit();
  return kExitOk;
}

int cmd_rate(const RunConfig& cfg, const CommandContext& ctx) {
  OutputTransaction tx(ctx.out_dir);
  Session s(cfg, ctx, "rate");
  std::vector<RatePoint> pts;
  if (cfg.rate.input) {
    const auto path = cfg.rate.input->is_absolute() ? *cfg.rate.input : cfg.base_dir / *cfg.rate.input;
    pts = read_rate_csv(path, s.ss().size());
  }
  pts.insert(pts.end(), cfg.rate.points.begin(), cfg.rate.points.end());
  if (pts.empty()) throw ConfigError("rate: no (y, z) points given");
  CsvWriter w(tx.file("rate.csv"), s.prov(),
              concat({"index", "L", "finite", "classes", "iterations", "grad_norm"}, s.state_columns("lambda")));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto S = static_cast<Eigen::Index>(s.ss().size());
    if (pts[i].y.size() != S || pts[i].z.size() != S) throw ConfigError("rate point has the wrong length");
    const RateEval ev = lagrangian(pts[i].y, pts[i].z, s.ss(), s.p());
    std::vector<std::string> row{std::to_string(i), format_number(ev.value), ev.finite ? "1" : "0",
                                 std::to_string(ev.classes.size()), std::to_string(ev.iterations),
                                 format_number(ev.grad_norm)};
    for (Eigen::Index j = 0; j < S; ++j) row.push_back(ev.maximizer ? format_number(ev.maximizer->values()[j]) : "nan");
    w.row(row);
  }
  w.close();
  tx.commit();
  return kExitOk;
}

int cmd_action(const RunConfig& cfg, const CommandContext& ctx) {
  OutputTransaction tx(ctx.out_dir);
  Session s(cfg, ctx, "action");
  if (!cfg.action.from || !cfg.action.to) throw ConfigError("action: both 'from' and 'to' are required");
  const Vec from = s.resolve(*cfg.action.from);
  const Vec to = s.resolve(*cfg.action.to);
  const QuasipotentialResult q = quasipotential(from, to, s.ss(), s.p(), cfg.action.schedule, s.action_options());
  if (!q.monotone) s.log("warning: minimized action increased with T by more than 1e-3");
  {
    CsvWriter w(tx.file("action.csv"), s.prov(), {"T", "M", "action", "best"});
    for (std::size_t i = 0; i < q.per_entry.size(); ++i)
      w.row({format_number(cfg.action.schedule[i].T), std::to_string(cfg.action.schedule[i].M),
             format_number(q.per_entry[i]), q.per_entry[i] == q.value ? "1" : "0"});
    w.close();
  }
  {
    CsvWriter w(tx.file("quasipotential.csv"), s.prov(),
                {"value", "monotone", "iterations", "converged", "initialization", "final_floor"});
    w.row({format_number(q.value), q.monotone ? "1" : "0", std::to_string(q.best.iterations),
           q.best.converged ? "1" : "0", q.best.initialization, format_number(q.best.final_floor)});
    w.close();
  }
  std::vector<double> times;
  for (int j = 0; j <= q.best.path.segments(); ++j) times.push_back(j * q.best.path.dt);
  write_path_csv(tx.file("path.csv"), s, times, q.best.path.knots);
  s.log("quasipotential: " + format_number(q.value));
  tx.commit();
  return kExitOk;
}

namespace {

void write_phi_and_J(OutputTransaction& tx, Session& s, const Mat& phi_m, const Vec& J) {
  {
    CsvWriter w(tx.file("phi_matrix.csv"), s.prov(), {"from", "to", "phi"});
    for (Eigen::Index i = 0; i < phi_m.rows(); ++i)
      for (Eigen::Index j = 0; j < phi_m.cols(); ++j)
        w.row({std::to_string(i), std::to_string(j), format_number(phi_m(i, j))});
    w.close();
  }
  const double bal = balance_residual(phi_m, J);
  CsvWriter w(tx.file("J.csv"), s.prov(), {"equilibrium", "J", "balance_residual"});
  for (Eigen::Index i = 0; i < J.size(); ++i) w.row({std::to_string(i), format_number(J[i]), format_number(bal)});
  w.close();
}

QuasipotentialMatrix equilibrium_matrix(Session& s) {
  std::vector<Vec> pts;
  for (const auto& e : s.equilibria().equilibria) pts.push_back(e.nu.values());
  return quasipotential_matrix(pts, s.ss(), s.p(), s.cfg().action.schedule, s.threads(), s.action_options());
}

void write_convergence(OutputTransaction& tx, Session& s, const QuasipotentialMatrix& qp) {
  CsvWriter w(tx.file("convergence.csv"), s.prov(),
              {"from", "to", "T", "M", "action", "monotone", "best_iterations", "best_converged", "initialization"});
  for (const auto& r : qp.records)
    for (std::size_t e = 0; e < r.result.per_entry.size(); ++e)
      w.row({std::to_string(r.from), std::to_string(r.to), format_number(s.cfg().action.schedule[e].T),
             std::to_string(s.cfg().action.schedule[e].M), format_number(r.result.per_entry[e]),
             r.result.monotone ? "1" : "0", std::to_string(r.result.best.iterations),
             r.result.best.converged ? "1" : "0", r.result.best.initialization});
  w.close();
}

}  // namespace

int cmd_tree(const RunConfig& cfg, const CommandContext& ctx) {
  OutputTransaction tx(ctx.out_dir);
  Session s(cfg, ctx, "tree");
  Mat phi_m;
  if (cfg.tree.phi) {
    phi_m = *cfg.tree.phi;
  } else {
    const QuasipotentialMatrix qp = equilibrium_matrix(s);
    phi_m = qp.phi;
    write_convergence(tx, s, qp);
  }
  write_phi_and_J(tx, s, phi_m, tree_formula(phi_m));
  tx.commit();
  return kExitOk;
}

int cmd_simulate(const RunConfig& cfg, const CommandContext& ctx) {
  OutputTransaction tx(ctx.out_dir);
  Session s(cfg, ctx, "simulate");
  const SimConfig sc = sim_config(s);
  const SimResult r = simulate(sc, s.ss(), s.p());
  std::vector<Vec> pts;
  for (const auto& y : r.trajectory.points) pts.push_back(y.values());
  write_path_csv(tx.file("trajectory.csv"), s, r.trajectory.times, pts);
  CsvWriter w(tx.file("sim_stats.csv"), s.prov(), {"n", "seed", "events", "null_events"});
  w.row({std::to_string(sc.n), std::to_string(sc.seed), std::to_string(r.stats.events),
         std::to_string(r.stats.null_events)});
  w.close();
  tx.commit();
  return kExitOk;
}

int cmd_exit_times(const RunConfig& cfg, const CommandContext& ctx) {
  OutputTransaction tx(ctx.out_dir);
  Session s(cfg, ctx, "exit-times");
  if (!cfg.simulation.domain) throw ConfigError("exit-times: simulation.domain is required");
  const SimConfig sc = sim_config(s);
  const DomainSpec& ds = *cfg.simulation.domain;
  const ExitDomain dom = s.domain(ds, ds.center ? s.resolve(*ds.center) : s.default_center());
  const auto runs = exit_time_replicas(sc, dom, cfg.simulation.replicas, s.ss(), s.p(), s.threads());
  int censored = 0;
  {
    CsvWriter w(tx.file("exit_times.csv"), s.prov(), concat({"replica", "time", "censored"}, s.state_columns("exit")));
    for (std::size_t r = 0; r < runs.size(); ++r) {
      censored += runs[r].censored ? 1 : 0;
      std::vector<std::string> row{std::to_string(r), format_number(runs[r].time), runs[r].censored ? "1" : "0"};
      for (Eigen::Index i = 0; i < runs[r].exit_state.size(); ++i) row.push_back(format_number(runs[r].exit_state[i]));
      w.row(row);
    }
    w.close();
  }
  const double median = exit_time_quantile(runs, 0.5);
  CsvWriter w(tx.file("exit_summary.csv"), s.prov(), {"n", "replicas", "censored", "median", "log_median_over_n"});
  w.row({std::to_string(sc.n), std::to_string(runs.size()), std::to_string(censored), format_number(median),
         format_number(std::log(median) / static_cast<double>(sc.n))});
  w.close();
  tx.commit();
  if (censored == static_cast<int>(runs.size())) {
    s.log("every replica was censored at the horizon");
    return kExitCensored;
  }
  return kExitOk;
}

int cmd_invariant(const RunConfig& cfg, const CommandContext& ctx) {
  OutputTransaction tx(ctx.out_dir);
  Session s(cfg, ctx, "invariant");
  const SimConfig sc = sim_config(s);
  const auto cells = empirical_invariant(sc, cfg.simulation.burn_in, s.ss(), s.p());
  CsvWriter w(tx.file("histogram.csv"), s.prov(), concat(s.state_columns(), {"mass"}));
  for (const auto& c : cells) {
    std::vector<double> row;
    for (long k : c.counts) row.push_back(static_cast<double>(k) / static_cast<double>(sc.n));
    row.push_back(c.mass);
    w.row(row);
  }
  w.close();
  tx.commit();
  return kExitOk;
}

int cmd_pipeline(const RunConfig& cfg, const CommandContext& ctx) {
  OutputTransaction tx(ctx.out_dir);
  Session s(cfg, ctx, "pipeline");
  auto stage = [&](const std::string& name, const std::function<void()>& fn) {
    s.log("stage " + name);
    try {
      fn();
    } catch (const NumericalFailure& e) {
      throw NumericalFailure("stage " + name + ": " + e.what(), e.best_value());
    } catch (const ConfigError& e) {
      throw ConfigError("stage " + name + ": " + e.what());
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("stage " + name + ": " + e.what());
    } catch (const Error& e) {
      throw Error("stage " + name + ": " + e.what());
    }
  };

  stage("equilibria", [&] { write_equilibria(tx, s); });
  const auto& eqs = s.equilibria().equilibria;
  QuasipotentialMatrix qp;
  stage("quasipotentials", [&] {
    if (cfg.pipeline.phi_override) {
      if (cfg.pipeline.phi_override->rows() != static_cast<Eigen::Index>(eqs.size()))
        throw ConfigError("phi_override must be " + std::to_string(eqs.size()) + "x" + std::to_string(eqs.size()));
      qp.phi = *cfg.pipeline.phi_override;
      for (const auto& e : eqs) qp.points.push_back(e.nu.values());
    } else {
      qp = equilibrium_matrix(s);
      write_convergence(tx, s, qp);
    }
  });
  Vec J;
  stage("tree", [&] {
    J = tree_formula(qp.phi);
    write_phi_and_J(tx, s, qp.phi, J);
  });
  stage("exit-rates", [&] {
    if (!cfg.pipeline.domain) {
      s.log("note: no pipeline.domain given; U.csv not written");
      return;
    }
    CsvWriter w(tx.file("U.csv"), s.prov(), concat({"equilibrium", "U", "mesh_points", "unreachable"}, s.state_columns("argmin")));
    for (std::size_t i : s.stable_indices()) {
      const Vec c = eqs[i].nu.values();
      ExitRateOptions o;
      o.random_directions = cfg.pipeline.random_directions;
      o.seed = cfg.seed;
      o.threads = s.threads();
      o.schedule = cfg.action.schedule;
      o.action = s.action_options();
      const ExitRateResult r = exit_rate_U(c, s.domain(*cfg.pipeline.domain, c), s.ss(), s.p(), o);
      std::vector<std::string> row{std::to_string(i), format_number(r.U), std::to_string(r.mesh.size()),
                                   std::to_string(r.unreachable)};
      for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(s.ss().size()); ++k)
        row.push_back(r.argmin.size() ? format_number(r.argmin[k]) : "nan");
      w.row(row);
    }
    w.close();
  });
  stage("J-points", [&] {
    if (cfg.pipeline.J_points.empty()) return;
    CsvWriter w(tx.file("J_points.csv"), s.prov(), concat(s.state_columns(), {"J"}));
    for (const auto& ps : cfg.pipeline.J_points) {
      const Vec y = s.resolve(ps);
      const double v = invariant_deviation(y, qp, J, s.ss(), s.p(), cfg.action.schedule, 1e-6, s.action_options());
      w.row(concat(as_vector(y), Vec::Constant(1, v)));
    }
    w.close();
  });
  tx.commit();
  return kExitOk;
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"equilibria", "ode",        "rate",      "action",  "tree",
                                              "simulate",   "exit-times", "invariant", "pipeline"};
  return names;
}

int run_command(const std::string& name, const RunConfig& cfg, const CommandContext& ctx) {
  static const std::map<std::string, int (*)(const RunConfig&, const CommandContext&)> table{
      {"equilibria", cmd_equilibria}, {"ode", cmd_ode},         {"rate", cmd_rate},
      {"action", cmd_action},         {"tree", cmd_tree},       {"simulate", cmd_simulate},
      {"exit-times", cmd_exit_times}, {"invariant", cmd_invariant}, {"pipeline", cmd_pipeline}};
  const auto it = table.find(name);
  if (it == table.end()) throw ConfigError("unknown command '" + name + "'");
  return it->second(cfg, ctx);
}

}  // namespace lossnet
