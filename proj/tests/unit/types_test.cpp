#include <gtest/gtest.h>

#include <bit>

#include "fpl/types.hpp"
#include "support/harness.hpp"

namespace fpl {
namespace {

TEST(Committee, QuorumSizes) {
  EXPECT_EQ(quorum({4, 1}).value(), 3u);
  EXPECT_EQ(quorum({7, 2}).value(), 5u);
  EXPECT_EQ(quorum({5, 1}).value(), 4u);
  EXPECT_EQ(quorum({1, 0}).value(), 1u);
  EXPECT_EQ(validity_threshold({4, 1}).value(), 2u);
}

TEST(Committee, RejectsTooSmall) {
  EXPECT_EQ(quorum({3, 1}).code(), ErrorCode::kMalformed);
  EXPECT_EQ(quorum({0, 0}).code(), ErrorCode::kMalformed);
  EXPECT_FALSE(Committee::make({6, 2}));
}

// Every pair of quorum-sized member sets meets in f+1 validators, checked by
// enumerating bitmasks.
TEST(Committee, QuorumIntersectionExhaustive) {
  for (std::uint32_t n = 1; n <= 10; ++n) {
    for (std::uint32_t f = 0; 3 * f + 1 <= n; ++f) {
      auto q = quorum({n, f}).value();
      std::vector<std::uint32_t> sets;
      for (std::uint32_t m = 0; m < (1u << n); ++m) {
        if (static_cast<std::uint32_t>(std::popcount(m)) == q) sets.push_back(m);
      }
      std::uint32_t worst = n;
      for (auto a : sets) {
        for (auto b : sets) worst = std::min<std::uint32_t>(worst, std::popcount(a & b));
      }
      EXPECT_GE(worst, f + 1) << "n=" << n << " f=" << f;
    }
  }
}

TEST(Certificate, NeedsQuorumOfDistinctValidSigners) {
  test::Net net;
  auto a = net.owned("A", "alice");
  auto g = net.owned("gas", "alice", 50);
  auto tx = net.transfer({a.key}, g.key, "bob", "alice");
  auto votes = net.votes(tx, {0, 1, 2});
  ASSERT_EQ(votes.size(), 3u);

  EXPECT_FALSE(assemble_certificate(tx, {votes[0], votes[1]}, *net.committee()));
  EXPECT_FALSE(assemble_certificate(tx, {votes[0], votes[0], votes[1]}, *net.committee()));
  auto cert = assemble_certificate(tx, votes, *net.committee());
  ASSERT_TRUE(cert);
  EXPECT_TRUE(verify_certificate(*cert, *net.committee()));

  auto forged = *cert;
  forged.signers[1].sig.value.bytes[0] ^= 1;
  EXPECT_FALSE(verify_certificate(forged, *net.committee()));

  auto other = *cert;
  other.tx.params.salt = 99;
  EXPECT_FALSE(verify_certificate(other, *net.committee()));
}

TEST(Encoding, TransactionRoundTrip) {
  test::Net net;
  auto a = net.owned("A", "alice");
  auto g = net.owned("gas", "alice", 50);
  auto tx = net.transfer({a.key}, g.key, "bob", "alice", 42);
  tx.shared_inputs.push_back(test::oid("S"));
  tx.params.item = "x";
  Encoder e;
  encode(e, tx);
  Decoder d(e.buffer());
  auto back = decode_transaction(d);
  EXPECT_TRUE(d.done());
  EXPECT_EQ(back, tx);
  EXPECT_EQ(back.digest(), tx.digest());
}

TEST(Encoding, TruncatedInputThrows) {
  Encoder e;
  e.u64(5).str("hello");
  auto bytes = e.buffer();
  bytes.pop_back();
  Decoder d(bytes);
  d.u64();
  EXPECT_THROW(d.str(), DecodeError);
}

TEST(Transaction, DigestIgnoresEvidence) {
  test::Net net;
  auto a = net.owned("A", "alice");
  auto g = net.owned("gas", "alice", 50);
  auto tx = net.transfer({a.key}, g.key, "bob", "alice");
  auto bare = tx;
  bare.evidence = {};
  EXPECT_EQ(tx.digest(), bare.digest());
  bare.params.salt += 1;
  EXPECT_NE(tx.digest(), bare.digest());
}

TEST(Transaction, StructureChecks) {
  Transaction tx;
  tx.gas = {test::oid("gas"), 0};
  EXPECT_EQ(tx.check_structure().code(), ErrorCode::kMalformed);  // gas not an input
  tx.inputs = {tx.gas, {test::oid("A"), 0}, {test::oid("A"), 1}};
  EXPECT_EQ(tx.check_structure().code(), ErrorCode::kMalformed);  // duplicate object
  tx.inputs = {tx.gas, {test::oid("A"), 0}};
  tx.kind = TxKind::kSwap;
  EXPECT_EQ(tx.check_structure().code(), ErrorCode::kMalformed);
  tx.kind = TxKind::kTransfer;
  EXPECT_TRUE(tx.check_structure());
}

}  // namespace
}  // namespace fpl
