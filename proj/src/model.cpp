#include "lossnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lossnet {

void ModelParams::validate() const {
  if (K < 1) throw InvalidArgument("K must be a positive integer");
  const auto k = static_cast<std::size_t>(K);
  if (A.size() != k || alpha.size() != k || gamma.size() != k || delta.size() != k) {
    throw InvalidArgument("A, alpha, gamma and delta must all have length K");
  }
  if (C < 1) throw InvalidArgument("capacity C must be a positive integer");
  for (std::size_t i = 0; i < k; ++i) {
    if (A[i] < 1) throw InvalidArgument("A_k must be >= 1");
    if (!(alpha[i] > 0.0) || !std::isfinite(alpha[i])) throw InvalidArgument("alpha_k must be > 0");
    if (!(gamma[i] > 0.0) || !std::isfinite(gamma[i])) throw InvalidArgument("gamma_k must be > 0");
    if (!(delta[i] >= 0.0) || !std::isfinite(delta[i])) throw InvalidArgument("delta_k must be >= 0");
  }
  if (C < *std::min_element(A.begin(), A.end())) {
    throw InvalidArgument("C must be at least min_k A_k so that the state space has two states");
  }
}

std::size_t StateSpace::find(const std::vector<int>& theta) const {
  auto it = index.find(theta);
  return it == index.end() ? kNoState : it->second;
}

namespace {

void enumerate(const ModelParams& p, std::size_t k, int remaining, std::vector<int>& theta,
               std::vector<std::vector<int>>& out, std::size_t cap) {
  if (k == theta.size()) {
    out.push_back(theta);
    if (out.size() > cap) {
      std::ostringstream os;
      os << "state space exceeds the cap of " << cap << " states";
      throw InvalidArgument(os.str());
    }
    return;
  }
  const int a = p.A[k];
  for (int t = 0; t * a <= remaining; ++t) {
    theta[k] = t;
    enumerate(p, k + 1, remaining - t * a, theta, out, cap);
  }
  theta[k] = 0;
}

}  // namespace

StateSpace build_state_space(const ModelParams& params, std::size_t cap) {
  params.validate();
  StateSpace ss;
  ss.K = params.K;
  std::vector<int> theta(static_cast<std::size_t>(params.K), 0);
  enumerate(params, 0, params.C, theta, ss.states, cap);
  if (ss.states.size() < 2) throw InvalidArgument("state space must contain at least two states");

  for (std::size_t i = 0; i < ss.states.size(); ++i) ss.index.emplace(ss.states[i], i);

  const auto K = static_cast<std::size_t>(params.K);
  ss.up.assign(K, std::vector<std::size_t>(ss.size(), kNoState));
  ss.down.assign(K, std::vector<std::size_t>(ss.size(), kNoState));
  for (std::size_t i = 0; i < ss.size(); ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      std::vector<int> nb = ss.states[i];
      nb[k] += 1;
      ss.up[k][i] = ss.find(nb);
      if (ss.states[i][k] >= 1) {
        nb[k] -= 2;
        ss.down[k][i] = ss.find(nb);
      }
    }
  }
  return ss;
}

Occupancy::Occupancy(Vec y) : y_(std::move(y)) {
  if (y_.size() == 0) throw InvalidArgument("occupancy must be non-empty");
  for (Eigen::Index i = 0; i < y_.size(); ++i) {
    if (!std::isfinite(y_[i]) || y_[i] < -kRenormTolerance) {
      throw InvalidArgument("occupancy entries must be finite and nonnegative");
    }
    y_[i] = std::max(0.0, y_[i]);
  }
  const double s = y_.sum();
  if (std::abs(s - 1.0) > kRenormTolerance) {
    std::ostringstream os;
    os << "occupancy sums to " << s << ", not 1";
    throw InvalidArgument(os.str());
  }
  y_ /= s;
}

Occupancy uniform_occupancy(const StateSpace& ss) {
  return Occupancy(Vec::Constant(static_cast<Eigen::Index>(ss.size()), 1.0 / static_cast<double>(ss.size())));
}

TangentVector::TangentVector(Vec z) : z_(std::move(z)) {
  if (!z_.allFinite()) throw InvalidArgument("tangent vector entries must be finite");
  if (std::abs(z_.sum()) > kSumTolerance) throw InvalidArgument("tangent vector must sum to zero");
}

Vec log_factorial_weights(const StateSpace& ss) {
  Vec w(static_cast<Eigen::Index>(ss.size()));
  for (std::size_t i = 0; i < ss.size(); ++i) {
    double s = 0.0;
    for (int t : ss.states[i]) s += std::lgamma(static_cast<double>(t) + 1.0);
    w[static_cast<Eigen::Index>(i)] = s;
  }
  return w;
}

double sup_distance(const Vec& a, const Vec& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace lossnet
