#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fpl/sim/scenario.hpp"
#include "fpl/sim/trace.hpp"

namespace fpl::sim {

struct ClientSummary {
  std::string action;
  std::string kind;  // transfer, unlock, spend, ...
  std::string status;
  std::string detail;
  int round_trips = 0;
  int retransmits = 0;
  Tick start = 0;
  Tick elapsed = 0;
  int consolidations = 0;  // spend only
  std::int64_t spent = 0;  // spend only
};

struct RunResult {
  Trace trace;
  std::uint64_t seed = 0;
  Tick ticks = 0;
  bool quiescent = false;  // false means the tick limit cut the run short
  std::uint64_t messages = 0;
  std::uint64_t dropped = 0;
  std::uint64_t sequenced = 0;
  std::vector<ClientSummary> clients;

  const ClientSummary* client(const std::string& action) const;
};

// Runs the scenario to quiescence or max_ticks. The seed override replaces
// the scenario seed; everything else about the run is a function of both.
RunResult run(const Scenario& scenario, std::optional<std::uint64_t> seed = std::nullopt);

}  // namespace fpl::sim
