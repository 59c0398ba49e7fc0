#include "lossnet/transitions.hpp"

#include <sstream>

namespace lossnet {

void Jump::add(std::size_t i, int c) {
  for (std::uint8_t j = 0; j < size; ++j) {
    if (idx[j] == i) {
      coef[j] += c;
      if (coef[j] == 0) {
        // drop the cancelled entry
        for (std::uint8_t m = j; m + 1 < size; ++m) {
          idx[m] = idx[m + 1];
          coef[m] = coef[m + 1];
        }
        --size;
      }
      return;
    }
  }
  idx[size] = i;
  coef[size] = c;
  ++size;
}

double Jump::dot(const Vec& v) const {
  double s = 0.0;
  for (std::uint8_t j = 0; j < size; ++j) s += coef[j] * v[static_cast<Eigen::Index>(idx[j])];
  return s;
}

double TransitionTable::total_rate() const {
  double s = 0.0;
  for (const auto& t : entries) s += t.rate;
  return s;
}

namespace {

double checked(double rate, const char* what) {
  if (rate >= 0.0) return rate;
  if (rate > -1e-13) return 0.0;
  std::ostringstream os;
  os << "negative " << what << " rate " << rate << " (is n*y integral?)";
  throw InvalidArgument(os.str());
}

}  // namespace

TransitionTable transition_table(const StateSpace& ss, const ModelParams& p, const Vec& y,
                                 std::optional<long> n) {
  if (static_cast<std::size_t>(y.size()) != ss.size()) throw InvalidArgument("occupancy has the wrong length");
  double scale = 1.0;  // n/(n-1)
  double self = 0.0;   // 1/(n-1)
  if (n) {
    if (*n < 2) throw InvalidArgument("n must be at least 2");
    scale = static_cast<double>(*n) / static_cast<double>(*n - 1);
    self = 1.0 / static_cast<double>(*n - 1);
  }

  TransitionTable table;
  const std::size_t S = ss.size();
  for (int k = 0; k < p.K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const double a = p.alpha[ku], g = p.gamma[ku], d = p.delta[ku];
    double blocked_mass = 0.0;
    for (std::size_t i = 0; i < S; ++i)
      if (!ss.admits(k, i)) blocked_mass += y[static_cast<Eigen::Index>(i)];

    for (std::size_t i = 0; i < S; ++i) {
      const double yi = y[static_cast<Eigen::Index>(i)];
      const std::size_t up = ss.up[ku][i];
      if (up != kNoState) {
        Transition t{TransitionKind::kArrival, k, i, kNoState, a * yi, {}};
        t.jump.add(up, 1);
        t.jump.add(i, -1);
        table.entries.push_back(t);
      }
      const std::size_t dn = ss.down[ku][i];
      if (dn == kNoState) continue;
      const double th = ss.theta(i, k);
      const double own_blocked = ss.admits(k, i) ? 0.0 : 1.0;
      Transition dep{TransitionKind::kDeparture, k, i, kNoState,
                     checked(yi * th * d + scale * yi * blocked_mass * th * g - self * yi * own_blocked * th * g,
                             "departure"),
                     {}};
      dep.jump.add(dn, 1);
      dep.jump.add(i, -1);
      table.entries.push_back(dep);

      for (std::size_t j = 0; j < S; ++j) {
        const std::size_t jup = ss.up[ku][j];
        if (jup == kNoState) continue;
        const double yj = y[static_cast<Eigen::Index>(j)];
        const double same = (i == j) ? 1.0 : 0.0;
        Transition mig{TransitionKind::kMigration, k, i, j,
                       checked(scale * yi * yj * th * g - self * yi * same * th * g, "migration"), {}};
        mig.jump.add(jup, 1);
        mig.jump.add(j, -1);
        mig.jump.add(dn, 1);
        mig.jump.add(i, -1);
        table.entries.push_back(mig);
      }
    }
  }
  return table;
}

}  // namespace lossnet
