#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fpl/types.hpp"

namespace fpl {

// Grow-only counter: the multiset of accepted credits, keyed by the
// certificate that carried them so re-delivery is harmless.
class GCounter {
 public:
  void add(const Digest& tx, std::int64_t amount) { accepted_.emplace(tx, amount); }
  std::int64_t value() const;
  std::size_t size() const { return accepted_.size(); }
  const std::map<Digest, std::int64_t>& accepted() const { return accepted_; }

  friend bool operator==(const GCounter&, const GCounter&) = default;

 private:
  std::map<Digest, std::int64_t> accepted_;
};

class USet {
 public:
  void add(const std::string& item) { items_.insert(item); }
  bool contains(const std::string& item) const { return items_.contains(item); }
  const std::set<std::string>& items() const { return items_; }

  friend bool operator==(const USet&, const USet&) = default;

 private:
  std::set<std::string> items_;
};

// Membership is additions minus tombstones; both sides only grow, so a
// removed item never comes back.
class PNSet {
 public:
  void add(const std::string& item) { additions_.add(item); }
  void remove(const std::string& item) { tombstones_.add(item); }
  bool contains(const std::string& item) const {
    return additions_.contains(item) && !tombstones_.contains(item);
  }
  std::set<std::string> members() const;
  const USet& additions() const { return additions_; }
  const USet& tombstones() const { return tombstones_; }

  friend bool operator==(const PNSet&, const PNSet&) = default;

 private:
  USet additions_;
  USet tombstones_;
};

// floor(max_credit * (f+1) / (2f+1)). Any finalized debit was charged at
// no fewer than f+1 honest validators, so the honest budgets together cover
// at most max_credit of finalized spend.
std::int64_t initial_budget(std::int64_t max_credit, const CommitteeParams& params);

// One validator's view of one bounded-counter version.
struct BoundedCounter {
  ObjectKey key;
  std::int64_t max_credit = 0;
  std::int64_t budget = 0;
  std::int64_t credit_held = 0;             // the half of each credit not added to budget
  std::set<Digest> charged;                 // debits already subtracted from budget
  std::map<Digest, Certificate> accepted;   // certificates executed against this version
  std::vector<Digest> accepted_log;         // append order of `accepted`
  bool frozen = false;                      // a consolidation vote was cast

  static BoundedCounter fresh(const ObjectKey& key, std::int64_t max_credit, const CommitteeParams& params);

  // Atomic subtract; restores and fails with kBudgetExhausted when the
  // budget would go negative. Idempotent per transaction.
  Result<Unit> try_debit(const Digest& tx, std::int64_t amount);
  // Adds floor(amount / 2) to the budget and holds the rest.
  void credit(std::int64_t amount);
};

struct CounterOp {
  Digest tx;
  TxKind kind = TxKind::kDebit;
  std::int64_t amount = 0;

  friend bool operator==(const CounterOp&, const CounterOp&) = default;
};

struct Consolidation {
  std::vector<CounterOp> executed;  // union of replies and sequenced ops, by digest
  std::int64_t credited = 0;
  std::int64_t debited = 0;
  std::int64_t outstanding = 0;     // max + credited - debited, before the replacement
  bool replacement_applied = false;
  std::int64_t new_max = 0;
  std::int64_t new_budget = 0;
};

// Counter consolidation from validator replies. Each reply lists the ops the
// validator saw on the current version but had not seen sequenced. Fewer
// than quorum replies is kInsufficientReplies. The replacement debit runs
// after the union when it fits in the outstanding value.
Result<Consolidation> consolidate(std::int64_t max_credit, const std::vector<std::vector<CounterOp>>& replies,
                                  const std::vector<CounterOp>& sequenced, const std::optional<CounterOp>& replacement,
                                  const CommitteeParams& params);

}  // namespace fpl
