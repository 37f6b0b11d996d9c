#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "fpl/messages.hpp"

namespace fpl {

// Total-order stand-in for the consensus engine. Items are checked for
// validity on submission, deduplicated by content digest and numbered
// without gaps. While not live, valid submissions wait in arrival order.
class Sequencer {
 public:
  explicit Sequencer(std::shared_ptr<const Committee> committee) : committee_(std::move(committee)) {}

  // Sequence number of a newly ordered item, nullopt for a duplicate or
  // while held, kInvalidItem for an item that fails validity.
  Result<std::optional<std::uint64_t>> submit(SequencedPayload payload);

  // Switching back to live orders everything held, returning the new items.
  std::vector<std::uint64_t> set_live(bool live);
  bool live() const { return live_; }

  const std::vector<SequencedItem>& log() const { return log_; }
  const SequencedItem& at(std::uint64_t seq) const { return log_.at(seq - 1); }
  std::uint64_t size() const { return log_.size(); }

 private:
  std::uint64_t order(SequencedPayload payload);

  std::shared_ptr<const Committee> committee_;
  bool live_ = true;
  std::set<Digest> seen_;
  std::deque<SequencedPayload> held_;
  std::vector<SequencedItem> log_;  // seq numbers start at 1
};

// Structural and quorum validity of a sequencer item.
Result<Unit> check_item(const SequencedPayload& payload, const Committee& committee);

}  // namespace fpl
