#include "fpl/storage.hpp"

#include <stdexcept>

namespace fpl {

namespace {

void encode_effects(Encoder& e, const Effects& fx) { encode(e, fx); }

Effects decode_effects(Decoder& d) {
  Effects fx;
  fx.tx_digest = d.digest();
  auto status = d.u8();
  if (status > 1) throw DecodeError("bad status");
  fx.status = static_cast<ExecStatus>(status);
  fx.failure = d.str();
  auto n = d.u32();
  for (std::uint32_t i = 0; i < n; ++i) fx.consumed.push_back(decode_object_key(d));
  n = d.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    ObjectRef r;
    r.key = decode_object_key(d);
    r.state = d.digest();
    fx.produced.push_back(r);
  }
  n = d.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    CommutativeOp op;
    op.counter = decode_object_key(d);
    op.kind = static_cast<TxKind>(d.u8());
    op.amount = d.i64();
    op.item = d.str();
    fx.commutative.push_back(op);
  }
  return fx;
}

void encode_lock(Encoder& e, const LockEntry& l) {
  e.u8(static_cast<std::uint8_t>(l.kind)).digest(l.digest).boolean(l.cert.has_value());
  if (l.cert) encode(e, *l.cert);
}

LockEntry decode_lock(Decoder& d) {
  LockEntry l;
  auto kind = d.u8();
  if (kind > 2) throw DecodeError("bad lock kind");
  l.kind = static_cast<LockKind>(kind);
  l.digest = d.digest();
  if (d.boolean()) l.cert = decode_certificate(d);
  return l;
}

}  // namespace

std::string_view to_string(LockKind k) {
  switch (k) {
    case LockKind::kTx: return "LockedBy";
    case LockKind::kCert: return "Cert";
    case LockKind::kUnlock: return "UnlockGas";
  }
  return "?";
}

std::string_view to_string(UnlockState s) {
  switch (s) {
    case UnlockState::kNone: return "None";
    case UnlockState::kUnlocked: return "Unlocked";
    case UnlockState::kConfirmed: return "Confirmed";
  }
  return "?";
}

const Object* Tables::live_object(const ObjectId& id) const {
  auto it = live.find(id);
  if (it == live.end()) return nullptr;
  auto obj = objects.find(ObjectKey{id, it->second});
  return obj == objects.end() ? nullptr : &obj->second;
}

UnlockState Tables::unlock_state(const ObjectKey& k) const {
  auto it = unlock.find(k);
  return it == unlock.end() ? UnlockState::kNone : it->second;
}

Bytes encode_batch(const Batch& b) {
  Encoder e;
  e.u32(static_cast<std::uint32_t>(b.ops().size()));
  for (const auto& op : b.ops()) {
    e.u8(static_cast<std::uint8_t>(op.index()));
    std::visit(
        [&](const auto& o) {
          using T = std::decay_t<decltype(o)>;
          if constexpr (std::is_same_v<T, Batch::PutObject>) {
            encode(e, o.object);
          } else if constexpr (std::is_same_v<T, Batch::EraseObject> || std::is_same_v<T, Batch::EraseLock>) {
            encode(e, o.key);
          } else if constexpr (std::is_same_v<T, Batch::SetLive>) {
            e.digest(o.id.value).u64(o.version);
          } else if constexpr (std::is_same_v<T, Batch::SetLock>) {
            encode(e, o.key);
            encode_lock(e, o.entry);
          } else if constexpr (std::is_same_v<T, Batch::SetUnlock>) {
            encode(e, o.key);
            e.u8(static_cast<std::uint8_t>(o.state));
          } else if constexpr (std::is_same_v<T, Batch::SetLockTime>) {
            encode(e, o.key);
            e.i64(o.tick);
          } else if constexpr (std::is_same_v<T, Batch::PutExecuted>) {
            e.digest(o.tx);
            encode_effects(e, o.effects);
          } else if constexpr (std::is_same_v<T, Batch::EraseExecuted>) {
            e.digest(o.tx);
          } else if constexpr (std::is_same_v<T, Batch::EraseLive>) {
            e.digest(o.id.value);
          } else {
            e.u64(o.epoch);
          }
        },
        op);
  }
  return std::move(e).take();
}

Batch decode_batch(ByteView data) {
  Decoder d(data);
  Batch b;
  auto n = d.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    switch (d.u8()) {
      case 0: b.put_object(decode_object(d)); break;
      case 1: b.erase_object(decode_object_key(d)); break;
      case 2: {
        ObjectId id{d.digest()};
        b.set_live(id, d.u64());
        break;
      }
      case 3: {
        auto k = decode_object_key(d);
        b.set_lock(k, decode_lock(d));
        break;
      }
      case 4: b.erase_lock(decode_object_key(d)); break;
      case 5: {
        auto k = decode_object_key(d);
        auto s = d.u8();
        if (s > 2) throw DecodeError("bad unlock state");
        b.set_unlock(k, static_cast<UnlockState>(s));
        break;
      }
      case 6: {
        auto k = decode_object_key(d);
        b.set_lock_time(k, d.i64());
        break;
      }
      case 7: {
        auto tx = d.digest();
        b.put_executed(tx, decode_effects(d));
        break;
      }
      case 8: b.erase_executed(d.digest()); break;
      case 9: b.advance_epoch(d.u64()); break;
      case 10: b.erase_live(ObjectId{d.digest()}); break;
      default: throw DecodeError("unknown batch op");
    }
  }
  if (!d.done()) throw DecodeError("trailing bytes in batch");
  return b;
}

TableStore::TableStore(const std::filesystem::path& wal_path) {
  wal_.emplace(wal_path, std::ios::binary | std::ios::trunc);
  if (!*wal_) throw std::runtime_error("cannot open write-ahead file " + wal_path.string());
}

void TableStore::apply(Tables& t, const Batch& b) {
  for (const auto& op : b.ops()) {
    std::visit(
        [&](const auto& o) {
          using T = std::decay_t<decltype(o)>;
          if constexpr (std::is_same_v<T, Batch::PutObject>) {
            t.objects[o.object.key] = o.object;
          } else if constexpr (std::is_same_v<T, Batch::EraseObject>) {
            t.objects.erase(o.key);
          } else if constexpr (std::is_same_v<T, Batch::SetLive>) {
            t.live[o.id] = o.version;
          } else if constexpr (std::is_same_v<T, Batch::SetLock>) {
            t.locks[o.key] = o.entry;
          } else if constexpr (std::is_same_v<T, Batch::EraseLock>) {
            t.locks.erase(o.key);
          } else if constexpr (std::is_same_v<T, Batch::SetUnlock>) {
            t.unlock[o.key] = o.state;
          } else if constexpr (std::is_same_v<T, Batch::SetLockTime>) {
            t.lock_times.emplace(o.key, o.tick);
          } else if constexpr (std::is_same_v<T, Batch::PutExecuted>) {
            t.executed[o.tx] = o.effects;
          } else if constexpr (std::is_same_v<T, Batch::EraseExecuted>) {
            t.executed.erase(o.tx);
          } else if constexpr (std::is_same_v<T, Batch::EraseLive>) {
            t.live.erase(o.id);
          } else {
            t.epoch = o.epoch;
            t.locks.clear();
            t.lock_times.clear();
            std::erase_if(t.unlock, [](const auto& kv) { return kv.second == UnlockState::kUnlocked; });
          }
        },
        op);
  }
}

void TableStore::commit(const Batch& b) {
  if (b.empty()) return;
  if (wal_) {
    auto bytes = encode_batch(b);
    Encoder frame;
    frame.bytes(bytes).digest(sha256(bytes));
    const auto& buf = frame.buffer();
    wal_->write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    wal_->flush();
  }
  apply(tables_, b);
}

Tables TableStore::replay(const std::filesystem::path& wal_path) {
  std::ifstream in(wal_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read write-ahead file " + wal_path.string());
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Decoder d(data);
  Tables t;
  while (!d.done()) {
    Bytes record;
    Digest check;
    try {
      record = d.bytes();
      check = d.digest();
    } catch (const DecodeError&) {
      break;  // torn tail: the last batch never committed
    }
    if (sha256(record) != check) break;
    apply(t, decode_batch(record));
  }
  return t;
}

Bytes TableStore::snapshot() const {
  Encoder e;
  e.u64(tables_.epoch);
  e.u32(static_cast<std::uint32_t>(tables_.objects.size()));
  for (const auto& [k, o] : tables_.objects) encode(e, o);
  e.u32(static_cast<std::uint32_t>(tables_.live.size()));
  for (const auto& [id, v] : tables_.live) e.digest(id.value).u64(v);
  e.u32(static_cast<std::uint32_t>(tables_.locks.size()));
  for (const auto& [k, l] : tables_.locks) {
    encode(e, k);
    e.u8(static_cast<std::uint8_t>(l.kind)).digest(l.digest);
  }
  e.u32(static_cast<std::uint32_t>(tables_.unlock.size()));
  for (const auto& [k, s] : tables_.unlock) {
    encode(e, k);
    e.u8(static_cast<std::uint8_t>(s));
  }
  e.u32(static_cast<std::uint32_t>(tables_.executed.size()));
  for (const auto& [d, fx] : tables_.executed) e.digest(d).digest(fx.digest());
  return std::move(e).take();
}

Digest TableStore::snapshot_digest() const { return tagged_hash("fpl/snapshot", snapshot()); }

}  // namespace fpl
