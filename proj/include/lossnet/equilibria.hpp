#pragma once

// Erlang product-form measures, the load fixed point whose solutions are the
// mean-field equilibria, the reduced potential phi and its classification.

#include "lossnet/model.hpp"

#include <string>
#include <vector>

namespace lossnet {

/// Erlang loads, one per class. All entries are positive.
class RhoVector {
 public:
  RhoVector() = default;
  explicit RhoVector(Vec rho);
  const Vec& values() const { return rho_; }
  double operator[](int k) const { return rho_[k]; }
  int size() const { return static_cast<int>(rho_.size()); }

 private:
  Vec rho_;
};

enum class Stability { kLocalMin, kSaddle, kLocalMax, kDegenerate };
std::string to_string(Stability s);

struct Equilibrium {
  RhoVector rho;
  Occupancy nu;
  double residual = 0.0;  ///< sup-norm of the fixed-point residual
  double phi = 0.0;
  double g = 0.0;
  Mat hessian;
  Vec eigenvalues;
  Stability classification = Stability::kDegenerate;
};

struct EquilibriumSet {
  std::vector<Equilibrium> equilibria;
  std::vector<std::string> warnings;
};

/// ln Z(rho), computed in log space.
double log_partition(const RhoVector& rho, const StateSpace& ss);

/// nu_theta(rho) = prod_k rho_k^theta_k / theta_k! / Z(rho).
Occupancy erlang_nu(const RhoVector& rho, const StateSpace& ss);

/// rho_k - (alpha_k + gamma_k E_nu[theta_k]) / (gamma_k + delta_k).
Vec fixed_point_residual(const RhoVector& rho, const StateSpace& ss, const ModelParams& p);

struct ScanGrid {
  Vec lo;  ///< per-class lower end of the log-spaced start grid
  Vec hi;
  std::vector<int> counts;
  double damping = 0.5;
  int damped_iterations = 300;
  int newton_iterations = 60;
  double residual_tol = 1e-10;
  double dedup_tol = 1e-6;
  double near_tol = 1e-4;
  unsigned threads = 1;
};

/// Start grid spanning the a-priori range of every solution:
/// alpha_k/(gamma_k+delta_k) <= rho_k <= (alpha_k + gamma_k*floor(C/A_k))/(gamma_k+delta_k).
/// Uses about 64 starts overall.
ScanGrid default_scan_grid(const ModelParams& p);

/// Multistart damped fixed-point iteration followed by Newton polish.
/// Returned equilibria are classified and sorted lexicographically by rho.
EquilibriumSet solve_equilibria_generic(const StateSpace& ss, const ModelParams& p, const ScanGrid& grid);

/// Reduced potential phi(rho) = -ln Z + sum_k ((gamma_k+delta_k)/gamma_k rho_k - alpha_k/gamma_k ln rho_k).
double phi(const RhoVector& rho, const ModelParams& p, const StateSpace& ss);

/// Central finite-difference Hessian of phi, step rel_step * max(1, rho_k).
Mat phi_hessian(const RhoVector& rho, const ModelParams& p, const StateSpace& ss, double rel_step = 1e-5);

Stability classify_eigenvalues(const Vec& eigenvalues, double threshold = 1e-8);

/// Builds the full Equilibrium record; rho must solve the fixed point.
Equilibrium classify(const RhoVector& rho, const StateSpace& ss, const ModelParams& p, double rel_step = 1e-5);

/// EQ_k = rho_k (1 - nu(theta cannot admit class k)).
Vec expected_customers(const RhoVector& rho, const StateSpace& ss, const ModelParams& p);

// Two-class geometry (A = (1, C)): class-2 customers fill a node.

bool is_two_class_geometry(const ModelParams& p);

/// Positive root of the quadratic that the class-2 equation imposes on rho_2.
double two_class_rho2(double rho1, const ModelParams& p);

/// h(rho_1, rho_2(rho_1)); its zeros are the rho_1 coordinates of the equilibria.
double two_class_h(double rho1, const ModelParams& p);

struct HCurveExtremum {
  double rho1;
  double value;
  bool is_min;
};

struct HCurveScan {
  std::vector<double> rho1;
  std::vector<double> h;
  std::vector<double> roots;
  std::vector<HCurveExtremum> extrema;
};

/// Log-spaced scan of h over [lo, 0.999*alpha_1/delta_1], with the roots
/// refined by bracketing and the local extrema by Brent minimization.
HCurveScan scan_h_curve(const ModelParams& p, int points = 2000, double lo = 1e-3);

}  // namespace lossnet
