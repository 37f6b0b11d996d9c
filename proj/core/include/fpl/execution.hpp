#pragma once

#include <map>
#include <vector>

#include "fpl/types.hpp"

namespace fpl {

inline constexpr std::int64_t kGasFee = 1;

struct ExecOutput {
  Effects effects;
  std::vector<Object> written;  // new versions, in the order of effects.produced
};

// Deterministic toy instruction set. `objects` holds every input by id:
// owned and read-only inputs at the versions the transaction names, shared
// and commutative inputs at the versions the caller assigned.
//   Transfer  every owned non-gas input gets params.recipient as owner
//   Swap      the two non-gas inputs exchange owners
//   NoOp      versions move, contents stay
//   Mint      creates params.new_object at version 0
//   Credit    adds params.amount to the target (or records a commutative op)
//   Debit     subtracts params.amount from the target
// Every mutable input moves to version + 1 and the gas pays kGasFee.
Result<ExecOutput> execute(const Transaction& tx, const std::map<ObjectId, Object>& objects);

// Bumps every mutable input without touching contents; used when a
// sequenced transaction can no longer run (status kFailed).
ExecOutput execute_failed(const Transaction& tx, const std::map<ObjectId, Object>& objects, const Error& why);

// NoOp over the given objects under a synthetic transaction digest.
ExecOutput execute_noop(const Digest& tx_digest, const std::vector<Object>& objects);

}  // namespace fpl
