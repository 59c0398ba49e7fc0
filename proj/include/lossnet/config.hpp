#pragma once

// Strict JSON run configuration. Unknown keys and wrong types are rejected
// with a ConfigError naming the offending path.

#include "lossnet/action.hpp"
#include "lossnet/model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lossnet {

class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// A point of the simplex given explicitly, as nu(rho), as the i-th sorted
/// equilibrium, or as the uniform distribution.
struct PointSpec {
  enum class Kind { kExplicit, kRho, kEquilibrium, kUniform };
  Kind kind = Kind::kUniform;
  Vec values;  ///< occupancy (explicit) or loads (rho)
  int equilibrium = 0;
};

struct DomainSpec {
  ExitDomain::Kind kind = ExitDomain::Kind::kBall;
  std::optional<PointSpec> center;  ///< defaults to the first stable equilibrium
  double radius = 0.0;
  std::optional<double> level;   ///< absolute sublevel of g
  std::optional<double> offset;  ///< level = g(center) + offset
};

struct EquilibriaBlock {
  std::optional<std::vector<int>> grid_counts;
  int h_points = 2000;
  double h_lo = 1e-3;
  bool symlog = true;
  int phi_grid_points = 60;
};

struct OdeBlock {
  PointSpec y0;
  double horizon = 20.0;
  double step = 1e-3;
  int record_every = 100;
};

struct RatePoint {
  Vec y;
  Vec z;
};

struct RateBlock {
  std::optional<std::filesystem::path> input;  ///< CSV with columns y_<state>..., z_<state>...
  std::vector<RatePoint> points;
};

struct ActionBlock {
  std::optional<PointSpec> from;
  std::optional<PointSpec> to;
  std::vector<ScheduleEntry> schedule = default_schedule();
  std::vector<double> floors{1e-2, 1e-4, 1e-6};
  GradientMode gradient = GradientMode::kEnvelope;
};

struct TreeBlock {
  std::optional<Mat> phi;
};

struct SimulationBlock {
  long n = 1000;
  double horizon = 10.0;
  double record_dt = 0.1;
  std::optional<PointSpec> y0;  ///< defaults to the first stable equilibrium
  bool snap_to_grid = true;     ///< round y0 to the nearest point with n*y integral
  int replicas = 50;
  std::optional<DomainSpec> domain;
  double burn_in = 0.0;
};

struct PipelineBlock {
  std::optional<Mat> phi_override;
  std::optional<DomainSpec> domain;  ///< centered at each stable equilibrium
  int random_directions = 64;
  std::vector<PointSpec> J_points;
};

struct RunConfig {
  ModelParams model;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::optional<std::filesystem::path> output_dir;
  EquilibriaBlock equilibria;
  OdeBlock ode;
  RateBlock rate;
  ActionBlock action;
  TreeBlock tree;
  SimulationBlock simulation;
  PipelineBlock pipeline;
  std::string canonical;  ///< normalized JSON text used for hashing
  std::filesystem::path base_dir;

  /// FNV-1a of the canonical text with the effective seed folded in.
  std::string hash() const;
};

RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);

}  // namespace lossnet
