#pragma once

// Jump table of the occupancy process.
//
// Rates are per node: the compensator intensity of each jump divided by n.
// With n absent the n -> infinity limit is returned, which is exactly the
// coefficient table of the Hamiltonian. Jumps are expressed as integer
// changes of the node counts n*y.

#include "lossnet/model.hpp"

#include <array>
#include <cstdint>
#include <optional>

namespace lossnet {

/// Sparse integer vector with at most four nonzeros.
struct Jump {
  std::uint8_t size = 0;
  std::array<std::size_t, 4> idx{};
  std::array<int, 4> coef{};

  void add(std::size_t i, int c);
  bool null() const { return size == 0; }
  double dot(const Vec& v) const;
};

enum class TransitionKind { kArrival, kDeparture, kMigration };

struct Transition {
  TransitionKind kind;
  int k;
  std::size_t from;         ///< node state losing a customer (or receiving, for arrivals)
  std::size_t to = kNoState;  ///< migration destination state before the move
  double rate;
  Jump jump;
};

struct TransitionTable {
  std::vector<Transition> entries;
  double total_rate() const;
};

/// Builds every jump with its per-node rate at occupancy y. Migration jumps
/// with a null net effect are included so the total matches the
/// compensators. For finite n the rates are exact only when n*y is integral.
TransitionTable transition_table(const StateSpace& ss, const ModelParams& p, const Vec& y,
                                 std::optional<long> n = std::nullopt);

}  // namespace lossnet
