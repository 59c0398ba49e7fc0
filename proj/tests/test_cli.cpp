#include "oracles.hpp"

#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

const fs::path& scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("lossnet_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path p = scratch() / name;
  std::ofstream(p) << text;
  return p;
}

int run(const std::string& command, const fs::path& config, const fs::path& out, const std::string& extra = "") {
  const std::string line = std::string(LOSSNET_CLI) + " " + command + " --config '" + config.string() + "' --out '" +
                           out.string() + "' " + extra + " 2>/dev/null";
  const int status = std::system(line.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct Csv {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  return out;
}

Csv read_csv(const fs::path& p) {
  Csv c;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      c.comments.push_back(line);
    } else if (c.header.empty()) {
      c.header = split(line);
    } else {
      c.rows.push_back(split(line));
    }
  }
  return c;
}

const std::string kToyModel = R"("model": {"K": 1, "C": 1, "A": [1], "alpha": [1], "gamma": [1], "delta": [1]})";

const std::string kToySmall = "{" + kToyModel + R"(, "seed": 3,
  "ode": {"y0": [1, 0], "horizon": 2, "record_every": 100},
  "simulation": {"n": 20, "horizon": 5, "record_dt": 0.5, "replicas": 5,
                 "domain": {"kind": "ball", "radius": 0.15}, "burn_in": 1}})";

}  // namespace

TEST_CASE("strict configuration errors exit with code 2") {
  const fs::path out = scratch() / "bad";
  CHECK(run("equilibria", write_config("unknown.json", "{" + kToyModel + R"(, "sed": 1})"), out) == 2);
  CHECK(run("equilibria",
            write_config("nested.json", R"({"model": {"K": 1, "C": 1, "A": [1], "alpha": [1], "gamma": [1], "delta": [1], "beta": 2}})"),
            out) == 2);
  CHECK(run("equilibria",
            write_config("negative.json", R"({"model": {"K": 1, "C": 1, "A": [1], "alpha": [-1], "gamma": [1], "delta": [1]}})"),
            out) == 2);
  CHECK(run("equilibria", write_config("syntax.json", "{ \"model\": "), out) == 2);
  CHECK(run("equilibria", scratch() / "missing.json", out) == 2);
  CHECK(run("no-such-command", write_config("ok.json", "{" + kToyModel + "}"), out) == 2);
  CHECK(run("simulate", write_config("offgrid.json", "{" + kToyModel + R"(, "simulation": {"n": 7, "y0": [0.5, 0.5], "snap_to_grid": false}})"), out) == 2);
  CHECK_FALSE(fs::exists(out / "trajectory.csv"));
}

TEST_CASE("single-class equilibria row matches the bisection oracle") {
  const fs::path out = scratch() / "toy_eq";
  REQUIRE(run("equilibria", write_config("toy_eq.json", kToySmall), out) == 0);
  const Csv c = read_csv(out / "equilibria.csv");
  REQUIRE(c.rows.size() == 1);
  const auto p = oracle::toy();
  const double root = oracle::bisect(
      [&](double r) { return r - (p.alpha[0] + p.gamma[0] * r / (1.0 + r)) / (p.gamma[0] + p.delta[0]); }, 1e-6, 100.0);
  CHECK(std::stod(c.rows[0][1]) == doctest::Approx(root).epsilon(1e-10));
  CHECK(c.rows[0][5] == "local-min");
}

TEST_CASE("shipped two-class configs give 3 and 1 equilibria") {
  const fs::path out3 = scratch() / "two3", out1 = scratch() / "two1";
  REQUIRE(run("equilibria", fs::path(LOSSNET_CONFIG_DIR) / "two_class.json", out3) == 0);
  REQUIRE(run("equilibria", fs::path(LOSSNET_CONFIG_DIR) / "two_class_delta01.json", out1) == 0);
  CHECK(read_csv(out3 / "equilibria.csv").rows.size() == 3);
  CHECK(read_csv(out1 / "equilibria.csv").rows.size() == 1);
  for (const char* f : {"h_curve.csv", "h_landmarks.csv", "h_curve.svg", "phi_grid.csv"}) CHECK(fs::exists(out3 / f));
  const std::string svg = slurp(out3 / "h_curve.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
}

TEST_CASE("reruns are byte-identical and every CSV carries the header comment") {
  const fs::path cfg = write_config("rerun.json", kToySmall);
  for (const std::string cmd : {"equilibria", "ode", "simulate", "exit-times", "invariant"}) {
    const fs::path a = scratch() / ("rerun_a_" + cmd), b = scratch() / ("rerun_b_" + cmd);
    REQUIRE(run(cmd, cfg, a) == 0);
    REQUIRE(run(cmd, cfg, b, "--threads 2") == 0);
    int files = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
      ++files;
      const fs::path twin = b / entry.path().filename();
      REQUIRE(fs::exists(twin));
      CHECK_MESSAGE(slurp(entry.path()) == slurp(twin), entry.path().string());
      if (entry.path().extension() == ".csv") {
        const Csv c = read_csv(entry.path());
        REQUIRE(!c.comments.empty());
        CHECK(c.comments[0].rfind("# lossnet 0.1.0 command=" + cmd + " config_hash=", 0) == 0);
      }
    }
    CHECK(files > 0);
  }
  // A different seed changes the hash and the sample path.
  const fs::path c = scratch() / "reseeded";
  REQUIRE(run("simulate", cfg, c, "--seed 4") == 0);
  CHECK(read_csv(c / "trajectory.csv").comments[0] != read_csv(scratch() / "rerun_a_simulate" / "trajectory.csv").comments[0]);
}

TEST_CASE("trajectory layout: time, then one column per state") {
  const fs::path out = scratch() / "ode_layout";
  REQUIRE(run("ode", write_config("ode.json", kToySmall), out) == 0);
  const Csv t = read_csv(out / "trajectory.csv");
  CHECK(t.header == std::vector<std::string>{"t", "y_0", "y_1"});
  CHECK(t.rows.size() == 21);
  CHECK(read_csv(out / "lyapunov.csv").header == std::vector<std::string>{"t", "g"});
  CHECK(slurp(out / "trajectory.csv").find("\r\n") != std::string::npos);
}

TEST_CASE("failed runs leave no partial output") {
  const fs::path out = scratch() / "partial";
  // Equilibria succeed, then the action endpoint has the wrong length.
  const fs::path cfg = write_config("partial.json", "{" + kToyModel + R"(, "action": {"from": {"equilibrium": 0}, "to": [0.1, 0.2, 0.7]}})");
  CHECK(run("action", cfg, out) == 2);
  CHECK((!fs::exists(out) || fs::is_empty(out)));
  // A zero-radius pipeline domain is rejected before anything is written.
  const fs::path pipe = write_config("pipe_bad.json", "{" + kToyModel + R"(, "pipeline": {"domain": {"kind": "ball", "radius": 0.0}}})");
  CHECK(run("pipeline", pipe, out) != 0);
  CHECK((!fs::exists(out) || fs::is_empty(out)));
}

TEST_CASE("exit-times returns 4 when every replica is censored") {
  const fs::path out = scratch() / "censored";
  const fs::path cfg = write_config("censored.json", "{" + kToyModel + R"(, "simulation": {"n": 20, "horizon": 1, "replicas": 3,
      "domain": {"kind": "ball", "radius": 2}}})");
  CHECK(run("exit-times", cfg, out) == 4);
  const Csv c = read_csv(out / "exit_times.csv");
  REQUIRE(c.rows.size() == 3);
  for (const auto& r : c.rows) CHECK(r[2] == "1");
}

TEST_CASE("pipeline with an injected matrix reproduces the tree enumeration") {
  const std::vector<std::vector<double>> phi{{0, 1, 4}, {2, 0, 3}, {5, 1, 0}};
  const auto W = oracle::tree_weights_by_subsets(phi);
  const double wmin = *std::min_element(W.begin(), W.end());
  const fs::path cfg = write_config("inject.json", R"({
    "model": {"K": 2, "C": 20, "A": [1, 20], "alpha": [0.5, 9], "gamma": [1, 1], "delta": [0.01, 0.01]},
    "pipeline": {"phi_override": [[0, 1, 4], [2, 0, 3], [5, 1, 0]]}})");
  const fs::path out = scratch() / "inject";
  REQUIRE(run("pipeline", cfg, out) == 0);
  const Csv j = read_csv(out / "J.csv");
  REQUIRE(j.rows.size() == 3);
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(std::stod(j.rows[r][1]) == W[r] - wmin);
    CHECK(std::stod(j.rows[r][2]) < 1e-9);
  }
  CHECK(read_csv(out / "phi_matrix.csv").rows.size() == 9);
  CHECK_FALSE(fs::exists(out / "U.csv"));
}

TEST_CASE("single-class pipeline: J is zero at the unique equilibrium") {
  const fs::path cfg = write_config("toy_pipe.json", "{" + kToyModel + R"(,
    "action": {"schedule": [{"T": 2, "M": 80}]}})");
  const fs::path out = scratch() / "toy_pipe";
  REQUIRE(run("pipeline", cfg, out) == 0);
  const Csv j = read_csv(out / "J.csv");
  REQUIRE(j.rows.size() == 1);
  CHECK(std::stod(j.rows[0][1]) == 0.0);
}

TEST_CASE("cleanup") { fs::remove_all(scratch()); }
