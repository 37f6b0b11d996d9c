#include "fpl/commutative.hpp"

#include <algorithm>

namespace fpl {

std::int64_t GCounter::value() const {
  std::int64_t sum = 0;
  for (const auto& [tx, amount] : accepted_) sum += amount;
  return sum;
}

std::set<std::string> PNSet::members() const {
  std::set<std::string> out;
  for (const auto& item : additions_.items()) {
    if (!tombstones_.contains(item)) out.insert(item);
  }
  return out;
}

std::int64_t initial_budget(std::int64_t max_credit, const CommitteeParams& params) {
  if (max_credit <= 0) return 0;
  auto f = static_cast<std::int64_t>(params.f);
  return max_credit * (f + 1) / (2 * f + 1);
}

BoundedCounter BoundedCounter::fresh(const ObjectKey& key, std::int64_t max_credit, const CommitteeParams& params) {
  BoundedCounter c;
  c.key = key;
  c.max_credit = max_credit;
  c.budget = initial_budget(max_credit, params);
  return c;
}

Result<Unit> BoundedCounter::try_debit(const Digest& tx, std::int64_t amount) {
  if (charged.contains(tx)) return Unit{};
  budget -= amount;
  if (budget < 0) {
    budget += amount;
    return Error{ErrorCode::kBudgetExhausted, "budget " + std::to_string(budget) + " < " + std::to_string(amount)};
  }
  charged.insert(tx);
  return Unit{};
}

void BoundedCounter::credit(std::int64_t amount) {
  budget += amount / 2;
  credit_held += amount - amount / 2;
}

Result<Consolidation> consolidate(std::int64_t max_credit, const std::vector<std::vector<CounterOp>>& replies,
                                  const std::vector<CounterOp>& sequenced, const std::optional<CounterOp>& replacement,
                                  const CommitteeParams& params) {
  auto q = quorum(params);
  if (!q) return q.error();
  if (replies.size() < *q) {
    return Error{ErrorCode::kInsufficientReplies, std::to_string(replies.size()) + " replies"};
  }
  std::map<Digest, CounterOp> all;
  for (const auto& op : sequenced) all.emplace(op.tx, op);
  for (const auto& reply : replies) {
    for (const auto& op : reply) all.emplace(op.tx, op);
  }
  Consolidation out;
  for (const auto& [d, op] : all) {
    out.executed.push_back(op);
    if (op.kind == TxKind::kCredit) {
      out.credited += op.amount;
    } else {
      out.debited += op.amount;
    }
  }
  out.outstanding = max_credit + out.credited - out.debited;
  out.new_max = out.outstanding;
  if (replacement && !all.contains(replacement->tx)) {
    if (replacement->kind == TxKind::kCredit) {
      out.new_max += replacement->amount;
      out.replacement_applied = true;
    } else if (replacement->amount <= out.new_max) {
      out.new_max -= replacement->amount;
      out.replacement_applied = true;
    }
  }
  out.new_budget = initial_budget(out.new_max, params);
  return out;
}

}  // namespace fpl
