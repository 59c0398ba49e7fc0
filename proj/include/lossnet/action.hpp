#pragma once

// Discretized trajectory action, its minimization over paths with fixed
// endpoints, quasipotentials, the in-tree formula for the equilibrium weights
// and exit-rate estimates for neighbourhoods of an equilibrium.

#include "lossnet/equilibria.hpp"
#include "lossnet/meanfield.hpp"
#include "lossnet/model.hpp"

#include <string>
#include <utility>
#include <vector>

namespace lossnet {

/// M+1 knots on the simplex at uniform spacing dt.
struct PathGrid {
  std::vector<Vec> knots;
  double dt = 0.0;
  double floor = 0.0;  ///< lower bound enforced on the interior knots

  int segments() const { return static_cast<int>(knots.size()) - 1; }
  double horizon() const { return dt * segments(); }
  /// Throws InvalidArgument if M < 2, dt <= 0 or a knot is off the simplex.
  void validate(std::size_t states) const;
};

/// Straight line from y0 to y1 with M segments over [0, T].
PathGrid straight_path(const Vec& y0, const Vec& y1, double T, int M);

/// Samples a trajectory at its recorded times; the recorded times must be uniform.
PathGrid path_from_trajectory(const Trajectory& tr);

/// Midpoint-rule action: sum_j dt * L((y_j + y_{j+1})/2, (y_{j+1} - y_j)/dt).
/// Returns +infinity if a segment has infinite L.
double path_action(const PathGrid& path, const StateSpace& ss, const ModelParams& p);

enum class GradientMode {
  kEnvelope,          ///< dL/dz = lambda*, dL/dy = -dH/dy at the dual maximizer
  kFiniteDifference,  ///< central differences along tangent coordinate directions
};

struct ActionOptions {
  std::vector<double> floors{1e-2, 1e-4, 1e-6};  ///< continuation; each capped at 0.5/|Theta|
  int max_iterations = 3000;                     ///< per stage
  double grad_tol = 1e-9;                        ///< projected-gradient sup norm
  double rel_tol = 1e-12;                        ///< relative action change over a 25-iteration window
  GradientMode gradient = GradientMode::kEnvelope;
  double fd_step = 1e-7;
  bool coarse_to_fine = true;  ///< solve on halved grids first, then interpolate
  const PathGrid* initial = nullptr;
};

struct ActionResult {
  PathGrid path;
  double action = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string initialization;  ///< "straight", "ode-arc" or "given"
  double final_floor = 0.0;
};

/// Projected spectral gradient descent on the interior knots; endpoints stay fixed.
ActionResult minimize_action(const Vec& y0, const Vec& y1, double T, int M, const StateSpace& ss,
                             const ModelParams& p, const ActionOptions& opts = {});

struct ScheduleEntry {
  double T;
  int M;
};

/// T in {2, 5, 10, 20} with M = 40 T.
std::vector<ScheduleEntry> default_schedule();

struct QuasipotentialResult {
  double value = 0.0;
  std::vector<double> per_entry;  ///< minimized action per schedule entry
  bool monotone = true;           ///< non-increasing in T up to 1e-3
  ActionResult best;
};

/// Minimum over the schedule of the minimized action from `from` to `to`.
QuasipotentialResult quasipotential(const Vec& from, const Vec& to, const StateSpace& ss, const ModelParams& p,
                                    const std::vector<ScheduleEntry>& schedule, const ActionOptions& opts = {});

struct QuasipotentialRecord {
  int from;
  int to;
  QuasipotentialResult result;
};

struct QuasipotentialMatrix {
  std::vector<Vec> points;  ///< the equilibrium occupancies nu(rho)
  Mat phi;                  ///< phi(i, j) = quasipotential from point i to point j
  std::vector<QuasipotentialRecord> records;  ///< optimizer metadata per ordered pair
  std::vector<std::pair<std::string, double>> boundary_values;
};

/// Pairwise quasipotentials between the given points (independent pairs in parallel).
QuasipotentialMatrix quasipotential_matrix(const std::vector<Vec>& points, const StateSpace& ss,
                                           const ModelParams& p, const std::vector<ScheduleEntry>& schedule,
                                           unsigned threads, const ActionOptions& opts = {});

inline constexpr int kMaxTreeVertices = 8;

/// In-tree weights: W(r) = min over in-trees rooted at r of the summed edge
/// entries phi(i, parent(i)); returns W - min W. Rejects more than 8 vertices.
Vec tree_formula(const Mat& phi);

/// Max over all bipartitions {A', A''} of the gap between
/// min_{a in A', b in A''} (J_a + phi(a, b)) and min (J_b + phi(b, a)).
double balance_residual(const Mat& phi, const Vec& J);

/// J(y) = min over kept equilibria of J_i + quasipotential(point_i, y). An
/// equilibrium i is skipped when phi(i, j) <= zero_tol for another kept j.
double invariant_deviation(const Vec& y, const QuasipotentialMatrix& qp, const Vec& J, const StateSpace& ss,
                           const ModelParams& p, const std::vector<ScheduleEntry>& schedule,
                           double zero_tol = 1e-6, const ActionOptions& opts = {});

/// Open neighbourhood of an equilibrium: a sup-norm ball or a strict sublevel set of g.
struct ExitDomain {
  enum class Kind { kBall, kSublevel };
  Kind kind = Kind::kBall;
  Vec center;
  double radius = 0.0;  ///< ball
  double level = 0.0;   ///< sublevel set {g < level}

  bool contains(const Vec& y, const StateSpace& ss, const ModelParams& p) const;
};

struct ExitRateOptions {
  int random_directions = 64;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::vector<ScheduleEntry> schedule = default_schedule();
  ActionOptions action;
};

struct ExitRateResult {
  double U = 0.0;
  Vec argmin;
  std::vector<Vec> mesh;
  std::vector<double> values;  ///< quasipotential per mesh point
  int unreachable = 0;         ///< mesh directions that leave the simplex before the boundary
};

/// Boundary points of D along 2|Theta| axis directions and random tangent directions.
std::vector<Vec> exit_boundary_mesh(const ExitDomain& domain, const StateSpace& ss, const ModelParams& p,
                                    int random_directions, std::uint64_t seed, int* unreachable = nullptr);

/// U = min over the boundary mesh of quasipotential(equilibrium, point).
/// Throws InvalidArgument if D does not contain the equilibrium.
ExitRateResult exit_rate_U(const Vec& equilibrium, const ExitDomain& domain, const StateSpace& ss,
                           const ModelParams& p, const ExitRateOptions& opts = {});

/// Tangent unit (sup-norm) direction of the fastest-growing mode of the
/// linearized mean-field ODE at y, from a finite-difference Jacobian.
Vec unstable_direction(const Vec& y, const StateSpace& ss, const ModelParams& p);

}  // namespace lossnet
