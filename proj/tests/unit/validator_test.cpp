#include <gtest/gtest.h>

#include "support/harness.hpp"

namespace fpl {
namespace {

using test::Net;

struct FastPath : ::testing::Test {
  Net net;
  Object a = net.owned("A", "alice", 10);
  Object gas = net.owned("gas", "alice", 50);
};

TEST_F(FastPath, LocksAndRefusesConflicts) {
  auto t1 = net.transfer({a.key}, gas.key, "bob", "alice", 1);
  auto t2 = net.transfer({a.key}, gas.key, "carol", "alice", 2);
  ASSERT_TRUE(net.v(0).process_tx(t1));
  EXPECT_EQ(net.v(0).process_tx(t2).code(), ErrorCode::kConflictingLock);
  // Re-signing the locked transaction is harmless and gives the same vote.
  auto again = net.v(0).process_tx(t1);
  ASSERT_TRUE(again);
  EXPECT_EQ(again->tx_digest, t1.digest());
  EXPECT_EQ(net.v(0).tables().locks.at(a.key).digest, t1.digest());
}

TEST_F(FastPath, RefusesWrongSigner) {
  auto tx = net.transfer({a.key}, gas.key, "bob", "mallory");
  EXPECT_EQ(net.v(0).process_tx(tx).code(), ErrorCode::kBadEvidence);
  EXPECT_TRUE(net.v(0).tables().locks.empty());
}

TEST_F(FastPath, RefusesWrongEpochAndUnknownObjects) {
  auto tx = net.transfer({a.key}, gas.key, "bob", "alice");
  auto old = tx;
  old.epoch = 3;
  old = sign_transaction(old, {test::user("alice")}, net.view());
  EXPECT_EQ(net.v(0).process_tx(old).code(), ErrorCode::kWrongEpoch);
  auto ghost = net.transfer({{test::oid("ghost"), 0}}, gas.key, "bob", "alice");
  EXPECT_EQ(net.v(0).process_tx(ghost).code(), ErrorCode::kMissingObject);
}

TEST_F(FastPath, CertificateExecutesIdenticallyEverywhere) {
  auto tx = net.transfer({a.key}, gas.key, "bob", "alice");
  auto cert = net.certify(tx, {0, 1, 2});
  ASSERT_TRUE(cert);
  std::vector<EffectSign> sigs;
  for (ValidatorId v = 0; v < 4; ++v) {
    auto r = net.v(v).process_cert(*cert);
    ASSERT_TRUE(r) << v;
    ASSERT_TRUE(r->effect) << v;
    EXPECT_TRUE(outputs_match(*r->effect));
    sigs.push_back(*r->effect);
  }
  for (const auto& s : sigs) EXPECT_EQ(s.effects.digest(), sigs[0].effects.digest());
  auto ec = assemble_effect_cert(sigs, *net.committee());
  ASSERT_TRUE(ec);
  EXPECT_TRUE(verify_effect_cert(*ec, *net.committee()));
  EXPECT_EQ(net.v(0).live_object(a.key.id)->key.version, 1u);
  EXPECT_EQ(net.v(0).live_object(a.key.id)->owner, single_key_owner(test::user("bob")));

  // Redelivery returns the recorded effects without running again.
  auto again = net.v(0).process_cert(*cert);
  ASSERT_TRUE(again && again->effect);
  EXPECT_EQ(again->effect->effects.digest(), sigs[0].effects.digest());
  EXPECT_EQ(net.v(0).live_object(a.key.id)->key.version, 1u);

  // The consumed version can no longer be spent.
  auto stale = net.transfer({a.key}, gas.key, "carol", "alice", 9);
  EXPECT_EQ(net.v(0).process_tx(stale).code(), ErrorCode::kStaleVersion);
}

TEST_F(FastPath, SubQuorumCertificateIsRefused) {
  auto tx = net.transfer({a.key}, gas.key, "bob", "alice");
  auto votes = net.votes(tx, {0, 1, 2});
  Certificate forged{tx, {votes[0].vote, votes[1].vote}};
  EXPECT_EQ(net.v(3).process_cert(forged).code(), ErrorCode::kInvalidCertificate);
}

TEST_F(FastPath, ConflictingTransactionsNeverBothCertify) {
  // Any two quorums share an honest validator, and it signs only one.
  auto t1 = net.transfer({a.key}, gas.key, "bob", "alice", 1);
  auto t2 = net.transfer({a.key}, gas.key, "carol", "alice", 2);
  auto v1 = net.votes(t1, {0, 1});
  auto v2 = net.votes(t2, {2, 3, 0, 1});
  EXPECT_EQ(v2.size(), 2u);
  EXPECT_FALSE(assemble_certificate(t2, v2, *net.committee()));
}

TEST(Behaviors, EquivocatorSignsConflicts) {
  Net net({4, 1}, {{0, Behavior::kEquivocator}});
  auto a = net.owned("A", "alice");
  auto g = net.owned("gas", "alice", 50);
  EXPECT_TRUE(net.v(0).process_tx(net.transfer({a.key}, g.key, "bob", "alice", 1)));
  EXPECT_TRUE(net.v(0).process_tx(net.transfer({a.key}, g.key, "carol", "alice", 2)));
}

TEST(Behaviors, StaleReplierDefersCertificates) {
  Net net({4, 1}, {{3, Behavior::kStaleReplier}});
  auto a = net.owned("A", "alice");
  auto g = net.owned("gas", "alice", 50);
  auto cert = net.certify(net.transfer({a.key}, g.key, "bob", "alice"), {0, 1, 2});
  ASSERT_TRUE(cert);
  auto r = net.v(3).process_cert(*cert);
  ASSERT_TRUE(r);
  EXPECT_FALSE(r->effect);
  EXPECT_EQ(r->deferred_reason, "withheld");
}

TEST(Epochs, ChangePausesSigningAndClearsLocks) {
  Net net;
  auto a = net.owned("A", "alice");
  auto b = net.owned("B", "alice");
  auto g = net.owned("gas", "alice", 50);
  auto g2 = net.owned("gas2", "alice", 50);
  auto tx = net.transfer({a.key}, g.key, "bob", "alice");
  auto cert = net.certify(tx, net.all());
  ASSERT_TRUE(cert);
  ASSERT_TRUE(net.v(0).process_cert(*cert));
  auto pending = net.transfer({b.key}, g2.key, "bob", "alice");
  ASSERT_TRUE(net.v(1).process_tx(pending));

  // v0 executed the certificate, so it must reach a checkpoint first.
  std::vector<std::vector<Certificate>> handed(4);
  for (ValidatorId v = 0; v < 4; ++v) handed[v] = net.v(v).begin_epoch_change();
  EXPECT_EQ(handed[0].size(), 1u);
  EXPECT_FALSE(net.v(0).end_of_epoch());
  EXPECT_EQ(net.v(2).process_tx(net.transfer({b.key}, g2.key, "carol", "alice", 5)).code(),
            ErrorCode::kEpochChanging);

  net.sequence(handed[0][0]);
  for (ValidatorId v = 0; v < 4; ++v) {
    EXPECT_EQ(net.v(v).live_object(a.key.id)->key.version, 1u) << v;
  }
  std::vector<EndOfEpoch> eoes;
  for (ValidatorId v = 0; v < 4; ++v) {
    auto eoe = net.v(v).end_of_epoch();
    ASSERT_TRUE(eoe) << v;
    eoes.push_back(*eoe);
  }
  for (const auto& eoe : eoes) net.sequence(eoe);
  for (ValidatorId v = 0; v < 4; ++v) {
    EXPECT_EQ(net.v(v).epoch(), 1u) << v;
    EXPECT_TRUE(net.v(v).tables().locks.empty()) << v;
    EXPECT_FALSE(net.v(v).epoch_changing());
  }
  // Epoch-0 transactions are dead; the same intent in epoch 1 signs.
  EXPECT_EQ(net.v(1).process_tx(pending).code(), ErrorCode::kWrongEpoch);
  auto fresh = pending;
  fresh.epoch = 1;
  fresh = sign_transaction(fresh, {test::user("alice")}, net.view());
  EXPECT_TRUE(net.v(1).process_tx(fresh));
}

}  // namespace
}  // namespace fpl
