#include <gtest/gtest.h>

#include "fpl/sequencer.hpp"
#include "support/harness.hpp"

namespace fpl {
namespace {

struct Seq : ::testing::Test {
  test::Net net;
  Object a = net.owned("A", "alice");
  Object gas = net.owned("gas", "alice", 50);
  Certificate cert = *net.certify(net.transfer({a.key}, gas.key, "bob", "alice"), {0, 1, 2});
  Sequencer seq{net.committee()};
};

TEST_F(Seq, NumbersWithoutGapsAndDeduplicates) {
  auto first = seq.submit(cert);
  ASSERT_TRUE(first);
  EXPECT_EQ(**first, 1u);
  auto dup = seq.submit(cert);
  ASSERT_TRUE(dup);
  EXPECT_FALSE(*dup);
  EXPECT_EQ(seq.size(), 1u);
}

TEST_F(Seq, RefusesInvalidItems) {
  auto bad = cert;
  bad.signers.pop_back();
  EXPECT_EQ(seq.submit(bad).code(), ErrorCode::kInvalidItem);
  EndOfEpoch eoe{2, 0, {}};
  eoe.sig = net.committee()->sign(1, eoe.message());
  EXPECT_EQ(seq.submit(eoe).code(), ErrorCode::kInvalidItem);
}

TEST_F(Seq, HoldsWhileDownAndReleasesInOrder) {
  seq.set_live(false);
  auto held = seq.submit(cert);
  ASSERT_TRUE(held);
  EXPECT_FALSE(*held);
  EndOfEpoch eoe{1, 0, {}};
  eoe.sig = net.committee()->sign(1, eoe.message());
  ASSERT_TRUE(seq.submit(eoe));
  EXPECT_EQ(seq.size(), 0u);
  auto released = seq.set_live(true);
  ASSERT_EQ(released.size(), 2u);
  EXPECT_EQ(seq.at(1).kind(), SeqKind::kCheckpointCert);
  EXPECT_EQ(seq.at(2).kind(), SeqKind::kEndOfEpoch);
}

}  // namespace
}  // namespace fpl
