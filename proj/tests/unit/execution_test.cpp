#include <gtest/gtest.h>

#include "fpl/execution.hpp"
#include "support/harness.hpp"

namespace fpl {
namespace {

Object owned(const std::string& label, const std::string& who, std::int64_t balance, Version v = 0) {
  Object o;
  o.key = {test::oid(label), v};
  o.owner = single_key_owner(test::user(who));
  o.balance = balance;
  return o;
}

std::map<ObjectId, Object> by_id(std::initializer_list<Object> objs) {
  std::map<ObjectId, Object> m;
  for (const auto& o : objs) m[o.key.id] = o;
  return m;
}

Transaction base(TxKind kind, std::vector<ObjectKey> others, const ObjectKey& gas) {
  Transaction tx;
  tx.kind = kind;
  tx.gas = gas;
  tx.inputs.push_back(gas);
  for (const auto& k : others) tx.inputs.push_back(k);
  return tx;
}

TEST(Execution, TransferMovesOwnershipAndChargesGas) {
  auto a = owned("A", "alice", 10, 3);
  auto g = owned("gas", "alice", 5);
  auto tx = base(TxKind::kTransfer, {a.key}, g.key);
  tx.params.recipient = single_key_owner(test::user("bob"));
  auto out = execute(tx, by_id({a, g}));
  ASSERT_TRUE(out);
  ASSERT_EQ(out->written.size(), 2u);
  for (const auto& o : out->written) {
    if (o.key.id == a.key.id) {
      EXPECT_EQ(o.key.version, 4u);
      EXPECT_EQ(o.owner, tx.params.recipient);
      EXPECT_EQ(o.balance, 10);
    } else {
      EXPECT_EQ(o.key.version, 1u);
      EXPECT_EQ(o.balance, 5 - kGasFee);
      EXPECT_EQ(o.owner, g.owner);
    }
  }
  EXPECT_EQ(out->effects.tx_digest, tx.digest());
  EXPECT_EQ(out->effects.consumed.size(), 2u);
  EXPECT_EQ(out->effects.status, ExecStatus::kSuccess);
}

TEST(Execution, SwapExchangesOwners) {
  auto a = owned("A", "alice", 1);
  auto b = owned("B", "bob", 2);
  auto g = owned("gas", "bob", 5);
  auto out = execute(base(TxKind::kSwap, {a.key, b.key}, g.key), by_id({a, b, g}));
  ASSERT_TRUE(out);
  for (const auto& o : out->written) {
    if (o.key.id == a.key.id) EXPECT_EQ(o.owner, b.owner);
    if (o.key.id == b.key.id) EXPECT_EQ(o.owner, a.owner);
  }
}

TEST(Execution, NoOpKeepsContents) {
  auto a = owned("A", "alice", 7, 2);
  auto out = execute_noop(sha256(std::string_view("n")), {a});
  ASSERT_EQ(out.written.size(), 1u);
  EXPECT_EQ(out.written[0].key.version, 3u);
  EXPECT_EQ(out.written[0].owner, a.owner);
  EXPECT_EQ(out.written[0].balance, a.balance);
}

TEST(Execution, DebitBelowZeroFails) {
  auto a = owned("A", "alice", 3);
  auto g = owned("gas", "alice", 5);
  auto tx = base(TxKind::kDebit, {a.key}, g.key);
  tx.params.target = a.key.id;
  tx.params.amount = 4;
  EXPECT_EQ(execute(tx, by_id({a, g})).code(), ErrorCode::kInsufficientBalance);
  auto failed = execute_failed(tx, by_id({a, g}), Error{ErrorCode::kInsufficientBalance, ""});
  EXPECT_EQ(failed.effects.status, ExecStatus::kFailed);
  for (const auto& o : failed.written) {
    if (o.key.id == a.key.id) EXPECT_EQ(o.balance, 3);
  }
}

TEST(Execution, EmptyGasIsRejected) {
  auto a = owned("A", "alice", 3);
  auto g = owned("gas", "alice", 0);
  EXPECT_EQ(execute(base(TxKind::kTransfer, {a.key}, g.key), by_id({a, g})).code(), ErrorCode::kInsufficientGas);
}

TEST(Execution, Deterministic) {
  auto a = owned("A", "alice", 10);
  auto g = owned("gas", "alice", 5);
  auto tx = base(TxKind::kTransfer, {a.key}, g.key);
  auto x = execute(tx, by_id({a, g}));
  auto y = execute(tx, by_id({a, g}));
  EXPECT_EQ(x->effects.digest(), y->effects.digest());
}

}  // namespace
}  // namespace fpl
