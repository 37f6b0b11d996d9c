#pragma once

#include <string>
#include <vector>

#include "fpl/sim/trace.hpp"

namespace fpl::sim {

struct Verdict {
  std::string checker;
  std::vector<std::string> violations;
  std::vector<std::string> notes;  // inconclusive findings, never failures

  bool ok() const { return violations.empty(); }
};

// Names of every registered checker, in report order.
const std::vector<std::string>& checker_names();

// One verdict per registered checker, in checker_names() order.
std::vector<Verdict> check_invariants(const Trace& trace);

bool all_ok(const std::vector<Verdict>& verdicts);

}  // namespace fpl::sim
