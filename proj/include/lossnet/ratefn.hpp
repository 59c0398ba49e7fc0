#pragma once

// Local large-deviation machinery: the Hamiltonian H(y, lambda), its
// Legendre transform L(y, z) and the support-communication classes that
// decide when L is finite.

#include "lossnet/model.hpp"

#include <optional>
#include <vector>

namespace lossnet {

/// Dual variable over the states with lambda at the first state fixed to 0.
class DualVector {
 public:
  DualVector() = default;
  /// Shifts lambda so that its first coordinate is exactly zero.
  explicit DualVector(Vec lambda);
  const Vec& values() const { return lambda_; }

 private:
  Vec lambda_;
};

inline constexpr double kMaxDualMagnitude = 500.0;

/// H(y, lambda). Throws InvalidArgument if some |lambda_theta| > 500.
double hamiltonian(const Vec& y, const Vec& lambda, const StateSpace& ss, const ModelParams& p);

/// Gradient of H in lambda (full |Theta| vector, sums to zero).
Vec grad_hamiltonian(const Vec& y, const Vec& lambda, const StateSpace& ss, const ModelParams& p);

/// Gradient of H in y at fixed lambda.
Vec grad_hamiltonian_y(const Vec& y, const Vec& lambda, const StateSpace& ss, const ModelParams& p);

using Partition = std::vector<std::vector<std::size_t>>;

/// Classes of the states with y > 0, linked by +-e_k moves through the support.
/// Classes are listed by their smallest state index.
Partition communication_classes(const Vec& y, const StateSpace& ss);

struct LagrangianOptions {
  double tol = 1e-10;          ///< class-sum tolerance of the finiteness test
  double grad_tol = 1e-10;     ///< stop when the dual gradient sup-norm falls below this
  int max_iterations = 500;
  double boundary_clip = 1e-12;  ///< y entries below this count as zero
  /// Optional warm start (full |Theta| vector).
  const Vec* initial = nullptr;
};

struct RateEval {
  double value = 0.0;
  bool finite = true;
  std::optional<DualVector> maximizer;
  Partition classes;
  int iterations = 0;
  double grad_norm = 0.0;
};

/// L(y, z) = sup_lambda (lambda . z - H(y, lambda)) by damped Newton on the
/// concave dual. The value is +infinity when z moves mass at a state with
/// y = 0 or when z does not balance on every communication class. Dual
/// coordinates of unsupported states are sent to -infinity, so a maximizer is
/// returned only when y is interior. Throws NumericalFailure carrying the
/// best value found (a lower bound) when the iteration cap is hit.
RateEval lagrangian(const Vec& y, const Vec& z, const StateSpace& ss, const ModelParams& p,
                    const LagrangianOptions& opts = {});

struct BoundSample {
  Vec y;
  Vec z;
};

struct BoundReport {
  std::vector<double> max_quantity;  ///< per sample, max over (k, theta, theta')
  std::vector<double> ratio;         ///< per sample, max_quantity / (1 + sum |z|)
  double max_ratio = 0.0;
};

/// Evaluates, at the maximizer of each sample, the three exponential
/// quantities that stay affinely bounded in sum |z|.
BoundReport optimizer_bound_report(const std::vector<BoundSample>& samples, const StateSpace& ss,
                                   const ModelParams& p);

}  // namespace lossnet
