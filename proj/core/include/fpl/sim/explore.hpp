#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fpl/sim/checkers.hpp"
#include "fpl/sim/engine.hpp"

namespace fpl::sim {

struct ExploreResult {
  std::uint64_t runs = 0;
  std::uint64_t violating = 0;    // runs with a checker violation
  std::uint64_t tick_limited = 0; // runs cut short by max_ticks
  std::optional<std::uint64_t> first_bad_seed;  // lowest violating or tick-limited seed
  std::vector<Verdict> first_bad_verdicts;

  bool ok() const { return violating == 0 && tick_limited == 0; }
};

// Runs seeds base, base+1, ..., base+k-1 and checks each trace. Runs are
// independent, so they may fan out over `threads` workers (0 picks the
// hardware concurrency) without changing any individual trace.
ExploreResult explore(const Scenario& scenario, std::uint64_t k, unsigned threads = 0);

}  // namespace fpl::sim
