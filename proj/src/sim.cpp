#include "lossnet/sim.hpp"

#include "lossnet/parallel.hpp"
#include "lossnet/rng.hpp"
#include "lossnet/transitions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace lossnet {

std::vector<long> SimConfig::initial_counts(const StateSpace& ss) const {
  if (n < 2) throw InvalidArgument("simulation needs n >= 2");
  if (!(horizon > 0.0)) throw InvalidArgument("simulation horizon must be positive");
  if (!(record_dt > 0.0)) throw InvalidArgument("record_dt must be positive");
  if (static_cast<std::size_t>(y0.size()) != ss.size()) throw InvalidArgument("y0 has the wrong length");
  std::vector<long> counts(ss.size());
  long total = 0;
  for (std::size_t i = 0; i < ss.size(); ++i) {
    const double scaled = static_cast<double>(n) * y0[static_cast<Eigen::Index>(i)];
    const double r = std::round(scaled);
    if (std::abs(scaled - r) > 1e-9 * std::max(1.0, static_cast<double>(n)) || r < 0.0)
      throw InvalidArgument("n * y0 must be a vector of nonnegative integers");
    counts[i] = static_cast<long>(r);
    total += counts[i];
  }
  if (total != n) throw InvalidArgument("n * y0 must sum to n");
  return counts;
}

namespace {

class Chain {
 public:
  Chain(const StateSpace& ss, const ModelParams& p, long n, std::vector<long> counts, CounterRng rng)
      : ss_(ss), p_(p), n_(n), counts_(std::move(counts)), rng_(rng), base_(ss.size(), 0.0) {
    for (std::size_t i = 0; i < ss.size(); ++i)
      for (int k = 0; k < p.K; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        if (ss.admits(k, i)) base_[i] += p.alpha[ku];
        base_[i] += ss.theta(i, k) * (p.delta[ku] + p.gamma[ku]);
      }
  }

  const std::vector<long>& counts() const { return counts_; }
  const SimStats& stats() const { return stats_; }

  Vec occupancy() const {
    Vec y(static_cast<Eigen::Index>(counts_.size()));
    for (std::size_t i = 0; i < counts_.size(); ++i)
      y[static_cast<Eigen::Index>(i)] = static_cast<double>(counts_[i]) / static_cast<double>(n_);
    return y;
  }

  /// Draws the holding time; `apply` then performs the jump.
  double holding_time(SimMethod method) {
    if (method == SimMethod::kTable) {
      table_ = build_table();
      rate_ = 0.0;
      for (const auto& e : table_.entries) rate_ += static_cast<double>(n_) * e.rate;
    } else {
      rate_ = 0.0;
      for (std::size_t i = 0; i < counts_.size(); ++i) rate_ += static_cast<double>(counts_[i]) * base_[i];
    }
    if (!(rate_ > 0.0)) return std::numeric_limits<double>::infinity();
    return rng_.exponential(rate_);
  }

  void apply(SimMethod method) {
    ++stats_.events;
    if (method == SimMethod::kTable) {
      apply_table();
    } else {
      apply_aggregated();
    }
  }

 private:
  TransitionTable build_table() const {
    try {
      return transition_table(ss_, p_, occupancy(), n_);
    } catch (const InvalidArgument& e) {
      std::ostringstream os;
      os << "negative transition rate (" << e.what() << ") at n=" << n_ << ", counts=[";
      for (std::size_t i = 0; i < counts_.size(); ++i) os << (i ? "," : "") << counts_[i];
      os << "]";
      throw Error(os.str());
    }
  }

  void apply_table() {
    double u = rng_.uniform() * rate_;
    const Transition* pick = &table_.entries.back();
    for (const auto& e : table_.entries) {
      u -= static_cast<double>(n_) * e.rate;
      if (u < 0.0) {
        pick = &e;
        break;
      }
    }
    if (pick->jump.null()) {
      ++stats_.null_events;
      return;
    }
    for (std::uint8_t j = 0; j < pick->jump.size; ++j) counts_[pick->jump.idx[j]] += pick->jump.coef[j];
  }

  void apply_aggregated() {
    double u = rng_.uniform() * rate_;
    std::size_t i = 0;
    for (; i + 1 < counts_.size(); ++i) {
      const double w = static_cast<double>(counts_[i]) * base_[i];
      if (u < w) break;
      u -= w;
    }
    // Within state i: pick the class and whether it is an arrival or a service completion.
    u /= static_cast<double>(counts_[i]);
    for (int k = 0; k < p_.K; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      if (ss_.admits(k, i)) {
        if (u < p_.alpha[ku]) {
          --counts_[i];
          ++counts_[ss_.up[ku][i]];
          return;
        }
        u -= p_.alpha[ku];
      }
      const double service = ss_.theta(i, k) * (p_.delta[ku] + p_.gamma[ku]);
      if (u < service || k + 1 == p_.K) {
        complete_service(i, k);
        return;
      }
      u -= service;
    }
  }

  void complete_service(std::size_t i, int k) {
    const auto ku = static_cast<std::size_t>(k);
    const std::size_t down = ss_.down[ku][i];
    if (rng_.uniform() * (p_.delta[ku] + p_.gamma[ku]) < p_.delta[ku]) {
      --counts_[i];
      ++counts_[down];
      return;
    }
    // Routed to one of the other n - 1 nodes, uniformly.
    long m = static_cast<long>(rng_.uniform() * static_cast<double>(n_ - 1));
    std::size_t j = 0;
    for (; j < counts_.size(); ++j) {
      const long w = counts_[j] - (j == i ? 1 : 0);
      if (m < w) break;
      m -= w;
    }
    if (j == counts_.size()) j = counts_.size() - 1;
    if (!ss_.admits(k, j)) {
      --counts_[i];
      ++counts_[down];
      return;
    }
    if (j == down) {
      ++stats_.null_events;
      return;
    }
    --counts_[i];
    ++counts_[down];
    --counts_[j];
    ++counts_[ss_.up[ku][j]];
  }

  const StateSpace& ss_;
  const ModelParams& p_;
  long n_;
  std::vector<long> counts_;
  CounterRng rng_;
  std::vector<double> base_;
  SimStats stats_;
  double rate_ = 0.0;
  TransitionTable table_;
};

}  // namespace

SimResult simulate(const SimConfig& cfg, const StateSpace& ss, const ModelParams& p, SimMethod method) {
  Chain chain(ss, p, cfg.n, cfg.initial_counts(ss), CounterRng(cfg.seed, cfg.stream));
  SimResult res;
  const auto records = static_cast<std::size_t>(std::floor(cfg.horizon / cfg.record_dt + 1e-9));
  std::size_t next = 0;
  double t = 0.0;
  while (next <= records) {
    const double tau = chain.holding_time(method);
    const double t_next = t + tau;
    const Vec y = chain.occupancy();
    while (next <= records && static_cast<double>(next) * cfg.record_dt < t_next) {
      res.trajectory.times.push_back(static_cast<double>(next) * cfg.record_dt);
      res.trajectory.points.emplace_back(y);
      ++next;
    }
    if (next > records) break;
    chain.apply(method);
    t = t_next;
  }
  res.stats = chain.stats();
  return res;
}

ExitResult exit_time(const SimConfig& cfg, const ExitDomain& domain, const StateSpace& ss, const ModelParams& p) {
  Chain chain(ss, p, cfg.n, cfg.initial_counts(ss), CounterRng(cfg.seed, cfg.stream));
  if (!domain.contains(chain.occupancy(), ss, p)) throw InvalidArgument("exit_time: y0 is not inside the domain");
  ExitResult res;
  double t = 0.0;
  for (;;) {
    const double tau = chain.holding_time(SimMethod::kAggregated);
    if (t + tau >= cfg.horizon) {
      res.time = cfg.horizon;
      res.censored = true;
      res.exit_state = chain.occupancy();
      break;
    }
    t += tau;
    chain.apply(SimMethod::kAggregated);
    Vec y = chain.occupancy();
    if (!domain.contains(y, ss, p)) {
      res.time = t;
      res.exit_state = std::move(y);
      break;
    }
  }
  res.stats = chain.stats();
  return res;
}

std::vector<ExitResult> exit_time_replicas(const SimConfig& cfg, const ExitDomain& domain, int replicas,
                                           const StateSpace& ss, const ModelParams& p, unsigned threads) {
  if (replicas < 1) throw InvalidArgument("need at least one replica");
  std::vector<ExitResult> out(static_cast<std::size_t>(replicas));
  parallel_for(out.size(), threads, [&](std::size_t r) {
    SimConfig c = cfg;
    c.stream = r;
    out[r] = exit_time(c, domain, ss, p);
  });
  return out;
}

std::vector<HistogramCell> empirical_invariant(const SimConfig& cfg, double burn_in, const StateSpace& ss,
                                               const ModelParams& p) {
  if (!(cfg.horizon > burn_in) || burn_in < 0.0) throw InvalidArgument("need 0 <= burn_in < horizon");
  Chain chain(ss, p, cfg.n, cfg.initial_counts(ss), CounterRng(cfg.seed, cfg.stream));
  std::map<std::vector<long>, double> time_in;
  double t = 0.0;
  while (t < cfg.horizon) {
    const double tau = chain.holding_time(SimMethod::kAggregated);
    const double lo = std::max(t, burn_in);
    const double hi = std::min(t + tau, cfg.horizon);
    if (hi > lo) time_in[chain.counts()] += hi - lo;
    t += tau;
    if (t < cfg.horizon) chain.apply(SimMethod::kAggregated);
  }
  const double total = cfg.horizon - burn_in;
  std::vector<HistogramCell> cells;
  cells.reserve(time_in.size());
  for (auto& [counts, w] : time_in) cells.push_back({counts, w / total});
  return cells;
}

Vec round_to_grid(const Vec& y, long n) {
  if (n < 1) throw InvalidArgument("grid size must be positive");
  const auto S = y.size();
  std::vector<long> counts(static_cast<std::size_t>(S));
  std::vector<std::pair<double, Eigen::Index>> rem;
  long used = 0;
  for (Eigen::Index i = 0; i < S; ++i) {
    const double scaled = std::max(0.0, y[i]) * static_cast<double>(n);
    counts[static_cast<std::size_t>(i)] = static_cast<long>(std::floor(scaled));
    used += counts[static_cast<std::size_t>(i)];
    rem.emplace_back(-(scaled - std::floor(scaled)), i);
  }
  std::stable_sort(rem.begin(), rem.end());
  for (std::size_t r = 0; used < n && r < rem.size(); ++r, ++used) ++counts[static_cast<std::size_t>(rem[r].second)];
  Vec out(S);
  for (Eigen::Index i = 0; i < S; ++i)
    out[i] = static_cast<double>(counts[static_cast<std::size_t>(i)]) / static_cast<double>(n);
  return out;
}

double exit_time_quantile(const std::vector<ExitResult>& runs, double q) {
  if (runs.empty() || !(q >= 0.0 && q <= 1.0)) throw InvalidArgument("bad quantile request");
  std::vector<std::pair<double, bool>> v;
  for (const auto& r : runs) v.emplace_back(r.time, r.censored);
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  if (v[lo].second || (pos > static_cast<double>(lo) && v[hi].second)) return std::numeric_limits<double>::infinity();
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * v[lo].first + w * v[hi].first;
}

}  // namespace lossnet
