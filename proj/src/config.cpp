#include "lossnet/config.hpp"

#include "lossnet/io.hpp"

#include <json.hpp>

#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace lossnet {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError("config error at " + where + ": " + what);
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(where, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!ok.count(key)) fail(where, "unknown key '" + key + "'");
  }
}

std::string child(const std::string& where, const std::string& key) { return where + "." + key; }

double number(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where, "expected a number");
  return v.get<double>();
}

double positive(const json& v, const std::string& where) {
  const double x = number(v, where);
  if (!(x > 0.0)) fail(where, "must be positive");
  return x;
}

long integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) fail(where, "expected an integer");
  return v.get<long>();
}

bool boolean(const json& v, const std::string& where) {
  if (!v.is_boolean()) fail(where, "expected true or false");
  return v.get<bool>();
}

Vec vector_of(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) fail(where, "expected a non-empty array of numbers");
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = number(v[i], where);
  return out;
}

Mat matrix_of(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) fail(where, "expected a square array of arrays");
  const auto n = static_cast<Eigen::Index>(v.size());
  Mat m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec row = vector_of(v[static_cast<std::size_t>(i)], where);
    if (row.size() != n) fail(where, "matrix must be square");
    m.row(i) = row.transpose();
  }
  return m;
}

PointSpec point_of(const json& v, const std::string& where) {
  PointSpec ps;
  if (v.is_array()) {
    ps.kind = PointSpec::Kind::kExplicit;
    ps.values = vector_of(v, where);
    return ps;
  }
  if (v.is_string()) {
    if (v.get<std::string>() != "uniform") fail(where, "the only named point is \"uniform\"");
    ps.kind = PointSpec::Kind::kUniform;
    return ps;
  }
  check_keys(v, where, {"equilibrium", "rho"});
  if (v.size() != 1) fail(where, "give exactly one of 'equilibrium' or 'rho'");
  if (v.contains("equilibrium")) {
    ps.kind = PointSpec::Kind::kEquilibrium;
    const long i = integer(v["equilibrium"], child(where, "equilibrium"));
    if (i < 0) fail(where, "equilibrium index must be >= 0");
    ps.equilibrium = static_cast<int>(i);
  } else {
    ps.kind = PointSpec::Kind::kRho;
    ps.values = vector_of(v["rho"], child(where, "rho"));
  }
  return ps;
}

DomainSpec domain_of(const json& v, const std::string& where, bool allow_center) {
  if (allow_center)
    check_keys(v, where, {"kind", "center", "radius", "level", "offset"});
  else
    check_keys(v, where, {"kind", "radius", "level", "offset"});
  DomainSpec d;
  if (!v.contains("kind") || !v["kind"].is_string()) fail(where, "'kind' must be \"ball\" or \"sublevel\"");
  const std::string kind = v["kind"].get<std::string>();
  if (v.contains("center")) d.center = point_of(v["center"], child(where, "center"));
  if (kind == "ball") {
    d.kind = ExitDomain::Kind::kBall;
    if (!v.contains("radius")) fail(where, "ball domain needs 'radius'");
    if (v.contains("level") || v.contains("offset")) fail(where, "ball domain takes no 'level' or 'offset'");
    d.radius = positive(v["radius"], child(where, "radius"));
  } else if (kind == "sublevel") {
    d.kind = ExitDomain::Kind::kSublevel;
    if (v.contains("radius")) fail(where, "sublevel domain takes no 'radius'");
    if (v.contains("level") == v.contains("offset")) fail(where, "sublevel domain needs exactly one of 'level', 'offset'");
    if (v.contains("level")) d.level = number(v["level"], child(where, "level"));
    if (v.contains("offset")) d.offset = positive(v["offset"], child(where, "offset"));
  } else {
    fail(child(where, "kind"), "must be \"ball\" or \"sublevel\"");
  }
  return d;
}

std::vector<ScheduleEntry> schedule_of(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) fail(where, "expected a non-empty array of {T, M}");
  std::vector<ScheduleEntry> s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    check_keys(v[i], w, {"T", "M"});
    if (!v[i].contains("T") || !v[i].contains("M")) fail(w, "needs both 'T' and 'M'");
    const double T = positive(v[i]["T"], child(w, "T"));
    const long M = integer(v[i]["M"], child(w, "M"));
    if (M < 8) fail(child(w, "M"), "must be at least 8");
    if (!s.empty() && !(T > s.back().T)) fail(w, "T must increase along the schedule");
    s.push_back({T, static_cast<int>(M)});
  }
  return s;
}

ModelParams model_of(const json& v) {
  const std::string where = "model";
  check_keys(v, where, {"K", "C", "A", "alpha", "gamma", "delta"});
  for (const char* key : {"K", "C", "A", "alpha", "gamma", "delta"})
    if (!v.contains(key)) fail(where, std::string("missing '") + key + "'");
  ModelParams p;
  p.K = static_cast<int>(integer(v["K"], "model.K"));
  p.C = static_cast<int>(integer(v["C"], "model.C"));
  if (!v["A"].is_array()) fail("model.A", "expected an array of integers");
  for (std::size_t i = 0; i < v["A"].size(); ++i) p.A.push_back(static_cast<int>(integer(v["A"][i], "model.A")));
  auto reals = [&](const char* key) {
    const Vec x = vector_of(v[key], std::string("model.") + key);
    return std::vector<double>(x.data(), x.data() + x.size());
  };
  p.alpha = reals("alpha");
  p.gamma = reals("gamma");
  p.delta = reals("delta");
  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    fail(where, e.what());
  }
  return p;
}

}  // namespace

std::string RunConfig::hash() const { return fnv1a_hex(canonical + "#seed=" + std::to_string(seed)); }

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root, "root",
             {"model", "seed", "threads", "output_dir", "equilibria", "ode", "rate", "action", "tree", "simulation",
              "pipeline"});
  if (!root.contains("model")) fail("root", "missing 'model'");
  RunConfig cfg;
  cfg.base_dir = base_dir;
  cfg.model = model_of(root["model"]);
  if (root.contains("seed")) {
    const json& s = root["seed"];
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
      fail("seed", "expected a nonnegative 64-bit integer");
    cfg.seed = s.get<std::uint64_t>();
  }
  if (root.contains("threads")) {
    const long t = integer(root["threads"], "threads");
    if (t < 1 || t > 1024) fail("threads", "must be between 1 and 1024");
    cfg.threads = static_cast<unsigned>(t);
  }
  if (root.contains("output_dir")) {
    if (!root["output_dir"].is_string()) fail("output_dir", "expected a string");
    cfg.output_dir = root["output_dir"].get<std::string>();
  }

  if (root.contains("equilibria")) {
    const json& e = root["equilibria"];
    check_keys(e, "equilibria", {"grid_counts", "h_points", "h_lo", "symlog", "phi_grid_points"});
    if (e.contains("grid_counts")) {
      std::vector<int> counts;
      if (!e["grid_counts"].is_array()) fail("equilibria.grid_counts", "expected an array of integers");
      for (const auto& c : e["grid_counts"]) {
        const long n = integer(c, "equilibria.grid_counts");
        if (n < 1) fail("equilibria.grid_counts", "counts must be >= 1");
        counts.push_back(static_cast<int>(n));
      }
      if (static_cast<int>(counts.size()) != cfg.model.K) fail("equilibria.grid_counts", "needs one count per class");
      cfg.equilibria.grid_counts = counts;
    }
    if (e.contains("h_points")) {
      const long n = integer(e["h_points"], "equilibria.h_points");
      if (n < 10) fail("equilibria.h_points", "must be at least 10");
      cfg.equilibria.h_points = static_cast<int>(n);
    }
    if (e.contains("h_lo")) cfg.equilibria.h_lo = positive(e["h_lo"], "equilibria.h_lo");
    if (e.contains("symlog")) cfg.equilibria.symlog = boolean(e["symlog"], "equilibria.symlog");
    if (e.contains("phi_grid_points")) {
      const long n = integer(e["phi_grid_points"], "equilibria.phi_grid_points");
      if (n < 2) fail("equilibria.phi_grid_points", "must be at least 2");
      cfg.equilibria.phi_grid_points = static_cast<int>(n);
    }
  }

  if (root.contains("ode")) {
    const json& o = root["ode"];
    check_keys(o, "ode", {"y0", "horizon", "step", "record_every"});
    if (o.contains("y0")) cfg.ode.y0 = point_of(o["y0"], "ode.y0");
    if (o.contains("horizon")) cfg.ode.horizon = positive(o["horizon"], "ode.horizon");
    if (o.contains("step")) cfg.ode.step = positive(o["step"], "ode.step");
    if (o.contains("record_every")) {
      const long r = integer(o["record_every"], "ode.record_every");
      if (r < 1) fail("ode.record_every", "must be >= 1");
      cfg.ode.record_every = static_cast<int>(r);
    }
  }

  if (root.contains("rate")) {
    const json& r = root["rate"];
    check_keys(r, "rate", {"input", "points"});
    if (r.contains("input")) {
      if (!r["input"].is_string()) fail("rate.input", "expected a path string");
      cfg.rate.input = r["input"].get<std::string>();
    }
    if (r.contains("points")) {
      if (!r["points"].is_array()) fail("rate.points", "expected an array of {y, z}");
      for (std::size_t i = 0; i < r["points"].size(); ++i) {
        const std::string w = "rate.points[" + std::to_string(i) + "]";
        check_keys(r["points"][i], w, {"y", "z"});
        if (!r["points"][i].contains("y") || !r["points"][i].contains("z")) fail(w, "needs 'y' and 'z'");
        cfg.rate.points.push_back({vector_of(r["points"][i]["y"], w + ".y"), vector_of(r["points"][i]["z"], w + ".z")});
      }
    }
  }

  if (root.contains("action")) {
    const json& a = root["action"];
    check_keys(a, "action", {"from", "to", "schedule", "floors", "gradient"});
    if (a.contains("from")) cfg.action.from = point_of(a["from"], "action.from");
    if (a.contains("to")) cfg.action.to = point_of(a["to"], "action.to");
    if (a.contains("schedule")) cfg.action.schedule = schedule_of(a["schedule"], "action.schedule");
    if (a.contains("floors")) {
      const Vec f = vector_of(a["floors"], "action.floors");
      if (f.minCoeff() < 0.0) fail("action.floors", "floors must be nonnegative");
      cfg.action.floors.assign(f.data(), f.data() + f.size());
    }
    if (a.contains("gradient")) {
      const json& g = a["gradient"];
      if (g == "envelope")
        cfg.action.gradient = GradientMode::kEnvelope;
      else if (g == "finite-difference")
        cfg.action.gradient = GradientMode::kFiniteDifference;
      else
        fail("action.gradient", "must be \"envelope\" or \"finite-difference\"");
    }
  }

  if (root.contains("tree")) {
    check_keys(root["tree"], "tree", {"phi"});
    if (root["tree"].contains("phi")) cfg.tree.phi = matrix_of(root["tree"]["phi"], "tree.phi");
  }

  if (root.contains("simulation")) {
    const json& s = root["simulation"];
    check_keys(s, "simulation", {"n", "horizon", "record_dt", "y0", "snap_to_grid", "replicas", "domain", "burn_in"});
    if (s.contains("n")) {
      cfg.simulation.n = integer(s["n"], "simulation.n");
      if (cfg.simulation.n < 2) fail("simulation.n", "must be at least 2");
    }
    if (s.contains("horizon")) cfg.simulation.horizon = positive(s["horizon"], "simulation.horizon");
    if (s.contains("record_dt")) cfg.simulation.record_dt = positive(s["record_dt"], "simulation.record_dt");
    if (s.contains("y0")) cfg.simulation.y0 = point_of(s["y0"], "simulation.y0");
    if (s.contains("snap_to_grid")) cfg.simulation.snap_to_grid = boolean(s["snap_to_grid"], "simulation.snap_to_grid");
    if (s.contains("replicas")) {
      const long r = integer(s["replicas"], "simulation.replicas");
      if (r < 1) fail("simulation.replicas", "must be >= 1");
      cfg.simulation.replicas = static_cast<int>(r);
    }
    if (s.contains("domain")) cfg.simulation.domain = domain_of(s["domain"], "simulation.domain", true);
    if (s.contains("burn_in")) {
      cfg.simulation.burn_in = number(s["burn_in"], "simulation.burn_in");
      if (cfg.simulation.burn_in < 0.0) fail("simulation.burn_in", "must be nonnegative");
    }
  }

  if (root.contains("pipeline")) {
    const json& p = root["pipeline"];
    check_keys(p, "pipeline", {"phi_override", "domain", "random_directions", "J_points"});
    if (p.contains("phi_override")) cfg.pipeline.phi_override = matrix_of(p["phi_override"], "pipeline.phi_override");
    if (p.contains("domain")) cfg.pipeline.domain = domain_of(p["domain"], "pipeline.domain", false);
    if (p.contains("random_directions")) {
      const long r = integer(p["random_directions"], "pipeline.random_directions");
      if (r < 0) fail("pipeline.random_directions", "must be >= 0");
      cfg.pipeline.random_directions = static_cast<int>(r);
    }
    if (p.contains("J_points")) {
      if (!p["J_points"].is_array()) fail("pipeline.J_points", "expected an array of points");
      for (std::size_t i = 0; i < p["J_points"].size(); ++i)
        cfg.pipeline.J_points.push_back(point_of(p["J_points"][i], "pipeline.J_points[" + std::to_string(i) + "]"));
    }
  }

  json canon = root;
  canon.erase("seed");
  canon.erase("threads");
  canon.erase("output_dir");
  cfg.canonical = canon.dump();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

}  // namespace lossnet
