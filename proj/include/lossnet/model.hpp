#pragma once

// Model parameters, the node state space and probability vectors over it.
//
// A node holds theta = (theta_1, ..., theta_K) customers, with
// sum_k theta_k * A_k <= C. Every vector indexed by node state shares the
// lexicographic enumeration order produced by build_state_space().

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace lossnet {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, double best_value)
      : Error(what), best_value_(best_value) {}
  /// Best objective value reached before giving up.
  double best_value() const { return best_value_; }

 private:
  double best_value_;
};

struct ModelParams {
  int K = 0;
  int C = 0;
  std::vector<int> A;
  std::vector<double> alpha;
  std::vector<double> gamma;
  std::vector<double> delta;

  /// Throws InvalidArgument when a field violates the model constraints.
  void validate() const;
};

/// Marker for a neighbour that falls outside the state space.
inline constexpr std::size_t kNoState = std::numeric_limits<std::size_t>::max();

struct StateSpace {
  int K = 0;
  std::vector<std::vector<int>> states;
  std::map<std::vector<int>, std::size_t> index;
  /// up[k][i]: index of states[i] + e_k, or kNoState.
  std::vector<std::vector<std::size_t>> up;
  /// down[k][i]: index of states[i] - e_k, or kNoState.
  std::vector<std::vector<std::size_t>> down;

  std::size_t size() const { return states.size(); }
  int theta(std::size_t i, int k) const { return states[i][static_cast<std::size_t>(k)]; }
  /// True when a class-k customer can be admitted at a node in state i.
  bool admits(int k, std::size_t i) const { return up[static_cast<std::size_t>(k)][i] != kNoState; }
  std::size_t find(const std::vector<int>& theta) const;
};

inline constexpr std::size_t kDefaultStateCap = 10000;

StateSpace build_state_space(const ModelParams& params, std::size_t cap = kDefaultStateCap);

/// A point of the probability simplex over the state space.
class Occupancy {
 public:
  static constexpr double kRenormTolerance = 1e-9;

  Occupancy() = default;
  /// Renormalizes when |sum - 1| <= 1e-9, throws InvalidArgument otherwise.
  explicit Occupancy(Vec y);

  const Vec& values() const { return y_; }
  double operator[](std::size_t i) const { return y_[static_cast<Eigen::Index>(i)]; }
  std::size_t size() const { return static_cast<std::size_t>(y_.size()); }

 private:
  Vec y_;
};

/// Uniform distribution over the states, mostly for tests and defaults.
Occupancy uniform_occupancy(const StateSpace& ss);

/// A rate of change of occupancy; components sum to zero.
class TangentVector {
 public:
  static constexpr double kSumTolerance = 1e-10;

  TangentVector() = default;
  explicit TangentVector(Vec z);

  const Vec& values() const { return z_; }

 private:
  Vec z_;
};

/// sum_k ln(theta_k!) per state, used by the entropy terms.
Vec log_factorial_weights(const StateSpace& ss);

/// Sup-norm distance.
double sup_distance(const Vec& a, const Vec& b);

}  // namespace lossnet
