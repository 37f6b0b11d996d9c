#include <gtest/gtest.h>

#include "support/harness.hpp"
#include "support/multi_unlock_oracle.hpp"

namespace fpl {
namespace {

using test::Net;

struct SplitLock : ::testing::Test {
  Net net;
  Object a = net.owned("A", "alice", 10);
  Object gas = net.owned("gas", "alice", 50);
  Object gas2 = net.owned("gas2", "alice", 50);
  Object ugas = net.owned("ugas", "alice", 50);
  Object mgas = net.owned("mallory-gas", "mallory", 50);
  Transaction t1 = net.transfer({a.key}, gas.key, "bob", "alice", 1);
  Transaction t2 = net.transfer({a.key}, gas2.key, "carol", "alice", 2);

  void SetUp() override {
    ASSERT_EQ(net.votes(t1, {0, 1}).size(), 2u);
    ASSERT_EQ(net.votes(t2, {2, 3}).size(), 2u);
  }

  std::int64_t balance(ValidatorId v, const Object& o) { return net.v(v).live_object(o.key.id)->balance; }
};

TEST_F(SplitLock, SingleUnlockReplacesWithNoOp) {
  auto rqt = net.unlock({a.key}, ugas.key, {"alice"});
  auto votes = net.unlock_votes(rqt, net.all());
  ASSERT_EQ(votes.size(), 4u);
  for (ValidatorId v = 0; v < 4; ++v) EXPECT_EQ(net.v(v).unlock_state(a.key), UnlockState::kUnlocked);
  // Unlocked versions refuse new signatures.
  EXPECT_EQ(net.v(0).process_tx(net.transfer({a.key}, gas2.key, "dave", "alice", 3)).code(),
            ErrorCode::kObjectUnlocked);

  auto ucert = assemble_unlock_cert({votes[0], votes[1], votes[2]}, *net.committee());
  ASSERT_TRUE(ucert);
  EXPECT_TRUE(ucert->no_commit());
  EXPECT_TRUE(verify_unlock_cert(*ucert, *net.committee()));
  auto results = net.sequence(*ucert);
  ASSERT_EQ(results.size(), 4u);
  for (ValidatorId v = 0; v < 4; ++v) {
    const Object* live = net.v(v).live_object(a.key.id);
    EXPECT_EQ(live->key.version, 1u);
    EXPECT_EQ(live->owner, a.owner);
    EXPECT_EQ(live->balance, a.balance);
    EXPECT_EQ(balance(v, ugas), 50 - kGasFee);
    EXPECT_EQ(results[v].outcome, SeqOutcome::kExecuted);
  }
  // Resequencing the same certificate is deduplicated by the sequencer.
  EXPECT_TRUE(net.sequence(*ucert).empty());
}

TEST_F(SplitLock, UnauthorizedRequestNeedsDelta) {
  auto rqt = net.unlock({a.key}, mgas.key, {"mallory"});
  for (ValidatorId v = 0; v < 4; ++v) {
    EXPECT_EQ(net.v(v).process_unlock_rqt(rqt).code(), ErrorCode::kBadEvidence);
  }
  net.set_time(101);
  auto votes = net.unlock_votes(rqt, net.all());
  EXPECT_EQ(votes.size(), 4u);
}

TEST_F(SplitLock, GasIsHeldForOneRequest) {
  auto r1 = net.unlock({a.key}, ugas.key, {"alice"}, UnlockProtocol::kSingle, {}, 1);
  auto r2 = net.unlock({a.key}, ugas.key, {"alice"}, UnlockProtocol::kSingle, {}, 2);
  ASSERT_TRUE(net.v(0).process_unlock_rqt(r1));
  EXPECT_EQ(net.v(0).process_unlock_rqt(r2).code(), ErrorCode::kBadGas);
  // Re-asking with the same request gets the same answer.
  EXPECT_TRUE(net.v(0).process_unlock_rqt(r1));
}

TEST_F(SplitLock, GasCannotBeAListedKey) {
  auto rqt = net.unlock({a.key, ugas.key}, ugas.key, {"alice"}, UnlockProtocol::kMulti);
  EXPECT_FALSE(net.v(0).process_unlock_rqt(rqt));
}

TEST_F(SplitLock, VoteWithholderStaysSilent) {
  Net w({4, 1}, {{2, Behavior::kVoteWithholder}});
  auto x = w.owned("A", "alice");
  auto ug = w.owned("ugas", "alice", 50);
  auto rqt = w.unlock({x.key}, ug.key, {"alice"});
  EXPECT_EQ(w.v(2).process_unlock_rqt(rqt).code(), ErrorCode::kIncomplete);
}

TEST(UnlockCarried, CertificateSeenByOneValidatorIsFinished) {
  Net net;
  auto a = net.owned("A", "alice", 10);
  auto gas = net.owned("gas", "alice", 50);
  auto ugas = net.owned("ugas", "alice", 50);
  auto tx = net.transfer({a.key}, gas.key, "bob", "alice");
  auto cert = net.certify(tx, net.all());
  ASSERT_TRUE(cert);
  ASSERT_TRUE(net.v(0).process_cert(*cert));

  auto rqt = net.unlock({a.key}, ugas.key, {"alice"});
  auto votes = net.unlock_votes(rqt, {0, 1, 2});
  ASSERT_EQ(votes.size(), 3u);
  EXPECT_EQ(votes[0].certs.size(), 1u);
  auto ucert = assemble_unlock_cert(votes, *net.committee());
  ASSERT_TRUE(ucert);
  ASSERT_EQ(ucert->certs.size(), 1u);

  // Dropping the carried certificate breaks the attested set.
  auto stripped = *ucert;
  stripped.certs.clear();
  EXPECT_EQ(verify_unlock_cert(stripped, *net.committee()).code(), ErrorCode::kInvalidUnlockCert);

  net.sequence(*ucert);
  for (ValidatorId v = 0; v < 4; ++v) {
    EXPECT_TRUE(net.v(v).tables().executed.contains(tx.digest())) << v;
    EXPECT_EQ(net.v(v).live_object(a.key.id)->owner, single_key_owner(test::user("bob"))) << v;
    EXPECT_EQ(net.v(v).live_object(ugas.key.id)->balance, 50 - kGasFee) << v;
  }
}

TEST(UnlockGas, IgnoredAfterCheckpointStillCharges) {
  Net net;
  auto a = net.owned("A", "alice", 10);
  auto gas = net.owned("gas", "alice", 50);
  auto ugas = net.owned("ugas", "alice", 50);
  auto tx = net.transfer({a.key}, gas.key, "bob", "alice");
  auto votes = net.votes(tx, net.all());
  auto c = assemble_certificate(tx, votes, *net.committee());
  ASSERT_TRUE(c);

  auto rqt = net.unlock({a.key}, ugas.key, {"alice"});
  auto uv = net.unlock_votes(rqt, {1, 2, 3});
  auto ucert = assemble_unlock_cert(uv, *net.committee());
  ASSERT_TRUE(ucert);
  net.sequence(*c);
  auto results = net.sequence(*ucert);
  ASSERT_EQ(results.size(), 4u);
  for (ValidatorId v = 0; v < 4; ++v) {
    EXPECT_EQ(results[v].outcome, SeqOutcome::kIgnored) << v;
    ASSERT_TRUE(results[v].gas) << v;
    EXPECT_EQ(net.v(v).live_object(ugas.key.id)->balance, 50 - kGasFee) << v;
    EXPECT_EQ(net.v(v).live_object(ugas.key.id)->key.version, 1u) << v;
  }
}

TEST(MultiUnlockOracle, AllVoteSubsetsOnFourValidators) {
  auto report = test::run_multi_unlock_oracle();
  EXPECT_EQ(report.cases, 16 * 5);
  EXPECT_EQ(report.mismatches, 0) << report.first_mismatch;
}

}  // namespace
}  // namespace fpl
