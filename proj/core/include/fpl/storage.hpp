#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <variant>
#include <vector>

#include "fpl/types.hpp"

namespace fpl {

enum class LockKind : std::uint8_t { kTx = 0, kCert = 1, kUnlock = 2 };
enum class UnlockState : std::uint8_t { kNone = 0, kUnlocked = 1, kConfirmed = 2 };

std::string_view to_string(LockKind k);
std::string_view to_string(UnlockState s);

// kTx: locked by a signed transaction (digest). kCert: a certificate for
// that transaction has been seen. kUnlock: a gas object held for an unlock
// request (digest of the request).
struct LockEntry {
  LockKind kind = LockKind::kTx;
  Digest digest;
  std::optional<Certificate> cert;
};

struct Tables {
  std::map<ObjectKey, Object> objects;  // every version ever written
  std::map<ObjectId, Version> live;
  std::map<ObjectKey, LockEntry> locks;
  std::map<ObjectKey, UnlockState> unlock;
  std::map<ObjectKey, Tick> lock_times;
  std::map<Digest, Effects> executed;
  Epoch epoch = 0;

  const Object* live_object(const ObjectId& id) const;
  UnlockState unlock_state(const ObjectKey& k) const;
};

// A set of table writes applied all-or-nothing.
class Batch {
 public:
  struct PutObject { Object object; };
  struct EraseObject { ObjectKey key; };
  struct SetLive { ObjectId id; Version version; };
  struct SetLock { ObjectKey key; LockEntry entry; };
  struct EraseLock { ObjectKey key; };
  struct SetUnlock { ObjectKey key; UnlockState state; };
  struct SetLockTime { ObjectKey key; Tick tick; };
  struct PutExecuted { Digest tx; Effects effects; };
  struct EraseExecuted { Digest tx; };
  struct AdvanceEpoch { Epoch epoch; };  // also drops locks, lock times and Unlocked marks
  struct EraseLive { ObjectId id; };
  using Op = std::variant<PutObject, EraseObject, SetLive, SetLock, EraseLock, SetUnlock, SetLockTime, PutExecuted,
                          EraseExecuted, AdvanceEpoch, EraseLive>;

  Batch& put_object(Object o) { return push(PutObject{std::move(o)}); }
  Batch& erase_object(const ObjectKey& k) { return push(EraseObject{k}); }
  Batch& set_live(const ObjectId& id, Version v) { return push(SetLive{id, v}); }
  Batch& set_lock(const ObjectKey& k, LockEntry e) { return push(SetLock{k, std::move(e)}); }
  Batch& erase_lock(const ObjectKey& k) { return push(EraseLock{k}); }
  Batch& set_unlock(const ObjectKey& k, UnlockState s) { return push(SetUnlock{k, s}); }
  Batch& set_lock_time(const ObjectKey& k, Tick t) { return push(SetLockTime{k, t}); }
  Batch& put_executed(const Digest& d, Effects fx) { return push(PutExecuted{d, std::move(fx)}); }
  Batch& erase_executed(const Digest& d) { return push(EraseExecuted{d}); }
  Batch& advance_epoch(Epoch e) { return push(AdvanceEpoch{e}); }
  Batch& erase_live(const ObjectId& id) { return push(EraseLive{id}); }

  bool empty() const { return ops_.empty(); }
  const std::vector<Op>& ops() const { return ops_; }

 private:
  Batch& push(Op op) {
    ops_.push_back(std::move(op));
    return *this;
  }
  std::vector<Op> ops_;
};

Bytes encode_batch(const Batch& b);
Batch decode_batch(ByteView data);

// In-memory tables with atomic batch commit. With a write-ahead path, each
// batch is appended (length, bytes, digest) before it is applied, and
// replay() rebuilds the tables from the file.
class TableStore {
 public:
  TableStore() = default;
  explicit TableStore(const std::filesystem::path& wal_path);

  const Tables& tables() const { return tables_; }
  void commit(const Batch& b);

  static Tables replay(const std::filesystem::path& wal_path);

  // Canonical encoding of the tables, for cross-replica comparison.
  Bytes snapshot() const;
  Digest snapshot_digest() const;

 private:
  static void apply(Tables& t, const Batch& b);

  Tables tables_;
  std::optional<std::ofstream> wal_;
};

}  // namespace fpl
