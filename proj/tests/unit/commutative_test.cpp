#include <gtest/gtest.h>

#include <random>

#include "fpl/commutative.hpp"
#include "support/harness.hpp"

namespace fpl {
namespace {

Digest tx(int i) { return sha256(std::string_view("tx" + std::to_string(i))); }
CounterOp debit(int i, std::int64_t amount) { return {tx(i), TxKind::kDebit, amount}; }
CounterOp credit(int i, std::int64_t amount) { return {tx(i), TxKind::kCredit, amount}; }

TEST(Crdt, GCounterIgnoresRedelivery) {
  GCounter g;
  g.add(tx(1), 5);
  g.add(tx(1), 5);
  g.add(tx(2), 3);
  EXPECT_EQ(g.value(), 8);
  EXPECT_EQ(g.size(), 2u);
}

TEST(Crdt, PNSetLawHoldsUnderRandomOps) {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 200; ++round) {
    PNSet s;
    std::set<std::string> added, removed;
    for (int i = 0; i < 30; ++i) {
      auto item = "x" + std::to_string(rng() % 8);
      if (rng() % 3 == 0) {
        s.remove(item);
        removed.insert(item);
      } else {
        s.add(item);
        added.insert(item);
      }
      for (int k = 0; k < 8; ++k) {
        auto x = "x" + std::to_string(k);
        ASSERT_EQ(s.contains(x), added.contains(x) && !removed.contains(x));
      }
    }
  }
}

TEST(Crdt, SetsConvergeRegardlessOfOrder) {
  std::vector<std::pair<bool, std::string>> ops = {{true, "a"}, {true, "b"}, {false, "a"}, {true, "c"}, {false, "d"}};
  PNSet forward, backward;
  for (const auto& [add, x] : ops) add ? forward.add(x) : forward.remove(x);
  for (auto it = ops.rbegin(); it != ops.rend(); ++it) it->first ? backward.add(it->second) : backward.remove(it->second);
  EXPECT_EQ(forward, backward);
  EXPECT_EQ(forward.members(), (std::set<std::string>{"b", "c"}));
}

TEST(BoundedCounter, InitialBudget) {
  EXPECT_EQ(initial_budget(100, {4, 1}), 66);
  EXPECT_EQ(initial_budget(0, {4, 1}), 0);
  EXPECT_EQ(initial_budget(21, {4, 1}), 14);
}

TEST(BoundedCounter, DebitAndRestore) {
  auto c = BoundedCounter::fresh({test::oid("c"), 0}, 100, {4, 1});
  EXPECT_EQ(c.budget, 66);
  ASSERT_TRUE(c.try_debit(tx(1), 10));
  EXPECT_EQ(c.budget, 56);
  ASSERT_TRUE(c.try_debit(tx(1), 10));  // idempotent
  EXPECT_EQ(c.budget, 56);

  c.budget = 5;
  EXPECT_EQ(c.try_debit(tx(2), 10).code(), ErrorCode::kBudgetExhausted);
  EXPECT_EQ(c.budget, 5);
}

TEST(BoundedCounter, ConcurrentDebitsOneRejected) {
  // Both serial orders of two 30-unit debits against 50.
  for (int order = 0; order < 2; ++order) {
    auto c = BoundedCounter::fresh({test::oid("c"), 0}, 0, {4, 1});
    c.budget = 50;
    int first = order == 0 ? 1 : 2, second = order == 0 ? 2 : 1;
    EXPECT_TRUE(c.try_debit(tx(first), 30));
    EXPECT_EQ(c.try_debit(tx(second), 30).code(), ErrorCode::kBudgetExhausted);
    EXPECT_EQ(c.budget, 20);
  }
}

TEST(BoundedCounter, CreditAddsHalf) {
  auto c = BoundedCounter::fresh({test::oid("c"), 0}, 0, {4, 1});
  c.credit(20);
  EXPECT_EQ(c.budget, 10);
  EXPECT_EQ(c.credit_held, 10);
  c.credit(5);
  EXPECT_EQ(c.budget, 12);
  EXPECT_EQ(c.credit_held, 13);
}

TEST(Consolidation, OutstandingFormsTheNewCounter) {
  std::vector<std::vector<CounterOp>> replies = {{debit(1, 25)}, {debit(1, 25), debit(2, 15)}, {}};
  auto r = consolidate(100, replies, {}, std::nullopt, {4, 1});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->debited, 40);
  EXPECT_EQ(r->new_max, 60);
  EXPECT_EQ(r->new_budget, initial_budget(60, {4, 1}));
  EXPECT_EQ(r->executed.size(), 2u);
}

TEST(Consolidation, EmptyRepliesKeepOutstanding) {
  auto r = consolidate(100, {{}, {}, {}}, {debit(1, 30)}, std::nullopt, {4, 1});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->new_max, 70);
  EXPECT_EQ(r->executed.size(), 1u);
}

TEST(Consolidation, ReplacementOnlyWhenItFits) {
  auto fits = consolidate(10, {{}, {}, {}}, {}, debit(9, 10), {4, 1});
  EXPECT_TRUE(fits->replacement_applied);
  EXPECT_EQ(fits->new_max, 0);
  auto too_big = consolidate(10, {{}, {}, {}}, {}, debit(9, 11), {4, 1});
  EXPECT_FALSE(too_big->replacement_applied);
  EXPECT_EQ(too_big->new_max, 10);
  auto with_credit = consolidate(10, {{credit(3, 6)}, {}, {}}, {}, std::nullopt, {4, 1});
  EXPECT_EQ(with_credit->new_max, 16);
}

TEST(Consolidation, NeedsQuorumOfReplies) {
  EXPECT_EQ(consolidate(100, {{}, {}}, {}, std::nullopt, {4, 1}).code(), ErrorCode::kInsufficientReplies);
}

// Validator-level: the budget is charged on signing, so with f+1 honest
// signatures per finalized debit the honest budgets bound total spend.
struct CounterNet : ::testing::Test {
  test::Net net{{4, 1}, {{3, Behavior::kInfiniteBudget}}};
  Object counter = net.counter("budget", 100);
  Object gas = net.owned("gas", "alice", 1000);

  Transaction debit_tx(std::int64_t amount, std::uint64_t salt) {
    Transaction t;
    t.kind = TxKind::kDebit;
    t.gas = net.view().latest_key(gas.key.id).value();
    t.inputs = {t.gas};
    t.commutative_inputs = {counter.key};
    t.params.target = counter.key.id;
    t.params.amount = amount;
    t.params.salt = salt;
    return sign_transaction(t, {test::user("alice")}, net.view());
  }
};

TEST_F(CounterNet, HonestBudgetsCapCertifiedDebits) {
  std::int64_t certified = 0;
  for (std::uint64_t i = 1; i <= 200; ++i) {
    auto t = debit_tx(1, i);
    // The gas object is locked by each signed debit, so rotate through
    // certify-and-execute to free it.
    auto c = net.certify(t, net.all());
    if (!c) break;
    certified += 1;
    for (ValidatorId v = 0; v < 4; ++v) {
      auto r = net.v(v).process_cert(*c);
      ASSERT_TRUE(r && r->effect);
      net.view().apply(r->effect->effects, r->effect->outputs);
    }
  }
  EXPECT_LE(certified, 100);
  EXPECT_EQ(certified, 66);
  EXPECT_EQ(net.v(3).counter(counter.key.id)->budget, 66);  // never charged
  for (ValidatorId v = 0; v < 3; ++v) EXPECT_EQ(net.v(v).counter(counter.key.id)->budget, 0);
}

TEST_F(CounterNet, MissingCounterIsReported) {
  auto t = debit_tx(1, 1);
  t.commutative_inputs = {{test::oid("nope"), 0}};
  t.params.target = test::oid("nope");
  t = sign_transaction(t, {test::user("alice")}, net.view());
  EXPECT_EQ(net.v(0).process_tx(t).code(), ErrorCode::kMissingObject);
}

}  // namespace
}  // namespace fpl
