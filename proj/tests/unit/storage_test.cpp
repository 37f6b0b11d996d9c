#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "fpl/storage.hpp"
#include "support/harness.hpp"

namespace fpl {
namespace {

std::filesystem::path temp_file(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("fpl-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove(p);
  return p;
}

Object obj(const std::string& label, Version v, std::int64_t balance) {
  Object o;
  o.key = {test::oid(label), v};
  o.owner = single_key_owner(test::user("alice"));
  o.balance = balance;
  return o;
}

Batch sample_batch() {
  Batch b;
  b.put_object(obj("A", 0, 5))
      .set_live(test::oid("A"), 0)
      .set_lock({test::oid("A"), 0}, LockEntry{LockKind::kTx, sha256(std::string_view("tx")), std::nullopt})
      .set_lock_time({test::oid("A"), 0}, 17)
      .set_unlock({test::oid("B"), 3}, UnlockState::kUnlocked);
  return b;
}

TEST(Storage, BatchRoundTrip) {
  auto b = sample_batch();
  auto bytes = encode_batch(b);
  auto back = decode_batch(bytes);
  EXPECT_EQ(encode_batch(back), bytes);
  EXPECT_EQ(back.ops().size(), b.ops().size());
}

TEST(Storage, AdvanceEpochDropsLocksAndUnlockMarks) {
  TableStore s;
  s.commit(sample_batch());
  ASSERT_EQ(s.tables().locks.size(), 1u);
  Batch b;
  b.advance_epoch(1);
  s.commit(b);
  EXPECT_EQ(s.tables().epoch, 1u);
  EXPECT_TRUE(s.tables().locks.empty());
  EXPECT_TRUE(s.tables().lock_times.empty());
  EXPECT_EQ(s.tables().unlock_state({test::oid("B"), 3}), UnlockState::kNone);
  EXPECT_EQ(s.tables().live.at(test::oid("A")), 0u);
}

TEST(Storage, WalReplayRebuildsTables) {
  auto path = temp_file("wal");
  {
    TableStore s(path);
    s.commit(sample_batch());
    Batch b;
    b.put_object(obj("A", 1, 4)).set_live(test::oid("A"), 1).erase_lock({test::oid("A"), 0});
    s.commit(b);
  }
  auto t = TableStore::replay(path);
  EXPECT_EQ(t.live.at(test::oid("A")), 1u);
  EXPECT_EQ(t.objects.size(), 2u);
  EXPECT_TRUE(t.locks.empty());
  EXPECT_EQ(t.unlock_state({test::oid("B"), 3}), UnlockState::kUnlocked);

  // A torn final record is ignored.
  {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out.write("\x40\x00\x00\x00garbage", 11);
  }
  auto torn = TableStore::replay(path);
  EXPECT_EQ(torn.live.at(test::oid("A")), 1u);
  std::filesystem::remove(path);
}

TEST(Storage, ValidatorStateSurvivesReplay) {
  auto path = temp_file("validator");
  auto committee = std::make_shared<const Committee>(Committee::make({4, 1}).value());
  ValidatorOptions o;
  o.wal_path = path;
  Validator v(0, committee, o);
  ObjectView view;
  view.add_term(single_key_term(test::user("alice")), {"alice"});
  auto a = obj("A", 0, 5);
  auto g = obj("gas", 0, 50);
  v.add_genesis(a);
  v.add_genesis(g);
  view.add(a);
  view.add(g);
  Transaction tx;
  tx.kind = TxKind::kTransfer;
  tx.gas = g.key;
  tx.inputs = {g.key, a.key};
  tx.params.recipient = single_key_owner(test::user("bob"));
  tx = sign_transaction(tx, {test::user("alice")}, view);
  ASSERT_TRUE(v.process_tx(tx));

  auto t = TableStore::replay(path);
  EXPECT_EQ(t.live, v.tables().live);
  EXPECT_EQ(t.locks.size(), v.tables().locks.size());
  EXPECT_EQ(t.objects.size(), v.tables().objects.size());
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace fpl
