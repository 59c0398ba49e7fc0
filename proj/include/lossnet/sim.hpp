#pragma once

// Exact simulation of the occupancy chain on n nodes, exit times from a
// neighbourhood of an equilibrium and time-averaged occupancy histograms.

#include "lossnet/action.hpp"
#include "lossnet/meanfield.hpp"
#include "lossnet/model.hpp"

#include <cstdint>
#include <vector>

namespace lossnet {

struct SimConfig {
  long n = 0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;  ///< replica index; selects an independent random stream
  double horizon = 0.0;
  Vec y0;
  double record_dt = 0.0;

  /// Node counts n * y0. Throws InvalidArgument unless n >= 2, horizon and
  /// record_dt are positive and n * y0 is integral within 1e-9.
  std::vector<long> initial_counts(const StateSpace& ss) const;
};

enum class SimMethod {
  kAggregated,  ///< service completions per (state, class), then destination draw
  kTable,       ///< categorical draw over the full transition table (slow, reference)
};

struct SimStats {
  std::uint64_t events = 0;
  std::uint64_t null_events = 0;  ///< migrations into theta - e_k: no net change
};

struct SimResult {
  Trajectory trajectory;  ///< sampled at multiples of record_dt (state just before the next jump)
  SimStats stats;
};

SimResult simulate(const SimConfig& cfg, const StateSpace& ss, const ModelParams& p,
                   SimMethod method = SimMethod::kAggregated);

struct ExitResult {
  double time = 0.0;
  bool censored = false;  ///< true when the run reached max_horizon inside D
  Vec exit_state;         ///< first state outside D (or the state at the cap)
  SimStats stats;
};

/// First time the chain leaves D, checked after every jump. cfg.horizon is the cap.
ExitResult exit_time(const SimConfig& cfg, const ExitDomain& domain, const StateSpace& ss, const ModelParams& p);

/// Replica r uses stream r under cfg.seed; replicas run in parallel.
std::vector<ExitResult> exit_time_replicas(const SimConfig& cfg, const ExitDomain& domain, int replicas,
                                           const StateSpace& ss, const ModelParams& p, unsigned threads);

struct HistogramCell {
  std::vector<long> counts;  ///< node counts per state
  double mass = 0.0;
};

/// Time-weighted occupancy over (burn_in, horizon], normalized to mass 1.
/// Cells are sorted by their count vectors.
std::vector<HistogramCell> empirical_invariant(const SimConfig& cfg, double burn_in, const StateSpace& ss,
                                               const ModelParams& p);

/// Nearest point with n*y integral (largest-remainder rounding of n*y).
Vec round_to_grid(const Vec& y, long n);

/// Sample quantile (linear interpolation) of the exit times, censored runs
/// counted at their cap; returns +infinity if the quantile lands on a censored run.
double exit_time_quantile(const std::vector<ExitResult>& runs, double q);

}  // namespace lossnet
