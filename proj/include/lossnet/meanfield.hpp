#pragma once

// Mean-field drift of the occupancy process, its RK4 integration and the
// free-energy Lyapunov function.

#include "lossnet/model.hpp"

#include <vector>

namespace lossnet {

struct Trajectory {
  std::vector<double> times;
  std::vector<Occupancy> points;
};

/// b_k(y) = alpha_k + gamma_k * sum_theta theta_k y_theta.
Vec effective_arrival(const Vec& y, const StateSpace& ss, const ModelParams& p);

/// Drift V(y). Arrivals (exogenous or migrating) at a node without room for
/// the customer are lost, so they do not leave the blocked state.
Vec vector_field(const Vec& y, const StateSpace& ss, const ModelParams& p);

struct OdeOptions {
  double step = 1e-3;
  /// Keep every record_every-th step (the final point is always kept).
  std::size_t record_every = 1;
};

/// Fixed-step classical RK4, projecting back onto the simplex after each step.
/// Throws NumericalFailure if a coordinate leaves [-2, 2].
Trajectory integrate_ode(const Occupancy& y0, double horizon, const StateSpace& ss, const ModelParams& p,
                         const OdeOptions& opts = {});

/// Free-energy Lyapunov function; 0 ln 0 is taken as 0.
double lyapunov_g(const Vec& y, const StateSpace& ss, const ModelParams& p);

/// grad g . V in closed form, as a sum over edges (theta, theta + e_k) of
/// (inflow - outflow) * ln(outflow / inflow). Requires y strictly positive.
double dissipation(const Vec& y, const StateSpace& ss, const ModelParams& p);

/// Euclidean projection onto {y : y_i >= floor, sum y = 1}.
Vec project_to_simplex(const Vec& x, double floor = 0.0);

}  // namespace lossnet
