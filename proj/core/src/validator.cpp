#include "fpl/validator.hpp"

#include <algorithm>

namespace fpl {

namespace {

std::vector<ObjectKey> sorted_unique(std::vector<ObjectKey> keys) {
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return keys;
}

std::set<ObjectId> input_ids(const Transaction& tx) {
  std::set<ObjectId> ids;
  for (const auto& k : tx.inputs) ids.insert(k.id);
  for (const auto& id : tx.shared_inputs) ids.insert(id);
  for (const auto& k : tx.commutative_inputs) ids.insert(k.id);
  return ids;
}

}  // namespace

std::string_view to_string(Behavior b) {
  switch (b) {
    case Behavior::kHonest: return "Honest";
    case Behavior::kEquivocator: return "Equivocator";
    case Behavior::kVoteWithholder: return "VoteWithholder";
    case Behavior::kStaleReplier: return "StaleReplier";
    case Behavior::kInfiniteBudget: return "InfiniteBudget";
  }
  return "?";
}

Result<Behavior> behavior_from_string(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(Behavior::kInfiniteBudget); ++i) {
    auto b = static_cast<Behavior>(i);
    if (to_string(b) == s) return b;
  }
  return Error{ErrorCode::kMalformed, "unknown behavior " + std::string(s)};
}

std::string_view to_string(SeqOutcome o) {
  switch (o) {
    case SeqOutcome::kExecuted: return "Executed";
    case SeqOutcome::kIgnored: return "Ignored";
    case SeqOutcome::kSkipped: return "Skipped";
    case SeqOutcome::kRecorded: return "Recorded";
  }
  return "?";
}

Validator::Validator(ValidatorId id, std::shared_ptr<const Committee> committee, ValidatorOptions options)
    : id_(id),
      committee_(std::move(committee)),
      options_(std::move(options)),
      store_(options_.wal_path ? TableStore(*options_.wal_path) : TableStore()) {}

void Validator::add_genesis(const Object& object) {
  Batch b;
  b.put_object(object).set_live(object.key.id, object.key.version);
  store_.commit(b);
  if (object.kind == ObjectKind::kCommutative) {
    auto& st = crdts_[object.key.id];
    st.kind = object.crdt;
    if (object.crdt == CrdtKind::kBoundedCounter) {
      st.bounded = BoundedCounter::fresh(object.key, object.balance, committee_->params());
    }
  }
}

void Validator::emit(ValidatorEvent ev) { events_.push_back(std::move(ev)); }

bool Validator::is_live(const ObjectKey& k) const {
  auto it = t().live.find(k.id);
  return it != t().live.end() && it->second == k.version;
}

std::vector<ObjectKey> Validator::owned_inputs(const Transaction& tx) const {
  std::vector<ObjectKey> out;
  for (const auto& k : tx.inputs) {
    auto it = t().objects.find(k);
    const Object* o = it != t().objects.end() ? &it->second : t().live_object(k.id);
    if (o && o->kind == ObjectKind::kReadOnly) continue;
    out.push_back(k);
  }
  return out;
}

std::map<ObjectId, Object> Validator::gather(const Transaction& tx, bool at_live_versions) const {
  std::map<ObjectId, Object> out;
  for (const auto& k : tx.inputs) {
    auto it = t().objects.find(k);
    if (it != t().objects.end()) {
      out.emplace(k.id, it->second);
    } else if (const auto* o = t().live_object(k.id); o && o->kind == ObjectKind::kReadOnly) {
      out.emplace(k.id, *o);
    }
  }
  for (const auto& id : tx.shared_inputs) {
    if (const auto* o = t().live_object(id)) out.emplace(id, *o);
  }
  for (const auto& k : tx.commutative_inputs) {
    if (at_live_versions) {
      if (const auto* o = t().live_object(k.id)) out.emplace(k.id, *o);
    } else if (auto it = t().objects.find(k); it != t().objects.end()) {
      out.emplace(k.id, it->second);
    }
  }
  return out;
}

Result<Unit> Validator::check_tx(const Transaction& tx, bool for_signing) const {
  if (tx.epoch != epoch()) return Error{ErrorCode::kWrongEpoch, "tx epoch " + std::to_string(tx.epoch)};
  auto structure = tx.check_structure();
  if (!structure) return structure;
  for (const auto& k : tx.inputs) {
    const Object* live = t().live_object(k.id);
    if (!live) return Error{ErrorCode::kMissingObject, k.to_string()};
    if (live->kind == ObjectKind::kShared || live->kind == ObjectKind::kCommutative) {
      return Error{ErrorCode::kMalformed, "shared or commutative object listed as owned input"};
    }
    if (live->kind == ObjectKind::kReadOnly) {
      if (live->key != k) return Error{ErrorCode::kStaleVersion, k.to_string()};
      continue;
    }
    if (live->key.version > k.version) return Error{ErrorCode::kStaleVersion, k.to_string()};
    if (live->key.version < k.version) return Error{ErrorCode::kMissingObject, k.to_string()};
    if (for_signing) {
      auto state = t().unlock_state(k);
      if (state == UnlockState::kUnlocked) return Error{ErrorCode::kObjectUnlocked, k.to_string()};
      if (state == UnlockState::kConfirmed) return Error{ErrorCode::kStaleVersion, k.to_string() + " confirmed"};
    }
  }
  for (const auto& id : tx.shared_inputs) {
    const Object* live = t().live_object(id);
    if (!live) return Error{ErrorCode::kMissingObject, "shared " + id.short_hex()};
    if (live->kind != ObjectKind::kShared) return Error{ErrorCode::kMalformed, "not a shared object"};
  }
  for (const auto& k : tx.commutative_inputs) {
    const Object* live = t().live_object(k.id);
    if (!live) return Error{ErrorCode::kMissingObject, "commutative " + k.to_string()};
    if (live->kind != ObjectKind::kCommutative) return Error{ErrorCode::kMalformed, "not a commutative object"};
    if (live->key.version != k.version) return Error{ErrorCode::kStaleVersion, k.to_string()};
    if (for_signing) {
      auto it = crdts_.find(k.id);
      if (it != crdts_.end() && it->second.bounded && it->second.bounded->frozen) {
        return Error{ErrorCode::kObjectUnlocked, "counter consolidating"};
      }
    }
  }
  if (tx.kind == TxKind::kMint && t().live.contains(tx.params.new_object)) {
    return Error{ErrorCode::kMalformed, "mint target exists"};
  }
  return Unit{};
}

Result<Unit> Validator::check_evidence(const Transaction& tx) const {
  auto included = input_ids(tx);
  auto message = evidence_message(tx);
  for (const auto& k : owned_inputs(tx)) {
    auto it = t().objects.find(k);
    if (it == t().objects.end()) return Error{ErrorCode::kMissingObject, k.to_string()};
    if (!it->second.owner) return Error{ErrorCode::kMalformed, "owned object without owner"};
    auto ok = check_owner_evidence(*it->second.owner, k.id, tx.evidence, message, included, now_,
                                   committee_->scheme(), options_.event_oracle);
    if (!ok) return Error{ErrorCode::kBadEvidence, std::string(to_string(ok.code())) + " for " + k.to_string()};
    if (!*ok) return Error{ErrorCode::kBadEvidence, "authenticator unsatisfied for " + k.to_string()};
  }
  return Unit{};
}

Result<CertSign> Validator::process_tx(const Transaction& tx) {
  auto d = tx.digest();
  auto reject = [&](Error e) -> Result<CertSign> {
    emit({"TxRejected", d, tx.inputs, {}, {}, std::string(to_string(e.code)) + ": " + e.detail});
    return e;
  };
  if (paused_) return reject({ErrorCode::kEpochChanging, "epoch change in progress"});
  if (options_.behavior == Behavior::kEquivocator) {
    auto structure = tx.check_structure();
    if (!structure) return reject(structure.error());
    emit({"CertSigned", d, tx.inputs, {}, {}, "equivocating", static_cast<std::int64_t>(tx.epoch)});
    return CertSign{d, committee_->sign(id_, d)};
  }
  if (auto ok = check_tx(tx, true); !ok) return reject(ok.error());
  if (auto ok = check_evidence(tx); !ok) return reject(ok.error());
  if (auto dry = execute(tx, gather(tx, true)); !dry) return reject(dry.error());

  auto owned = owned_inputs(tx);
  for (const auto& k : owned) {
    auto it = t().locks.find(k);
    if (it != t().locks.end() && (it->second.kind == LockKind::kUnlock || it->second.digest != d)) {
      return reject({ErrorCode::kConflictingLock, k.to_string() + " held by " + it->second.digest.short_hex()});
    }
  }
  if (tx.kind == TxKind::kDebit && options_.behavior != Behavior::kInfiniteBudget) {
    for (const auto& k : tx.commutative_inputs) {
      if (k.id != tx.params.target) continue;
      auto it = crdts_.find(k.id);
      if (it == crdts_.end() || !it->second.bounded) continue;
      auto& counter = *it->second.bounded;
      if (auto ok = counter.try_debit(d, tx.params.amount); !ok) return reject(ok.error());
      emit({"BudgetCharged", d, {k}, {}, {}, "", counter.budget});
    }
  }
  Batch b;
  for (const auto& k : owned) {
    if (!t().locks.contains(k)) b.set_lock(k, LockEntry{LockKind::kTx, d, std::nullopt});
    b.set_lock_time(k, now_);
  }
  store_.commit(b);
  emit({"CertSigned", d, tx.inputs, {}, {}, "", static_cast<std::int64_t>(tx.epoch)});
  return CertSign{d, committee_->sign(id_, d)};
}

void Validator::forward_checkpoint(const Certificate& cert) {
  if (forwarded_.insert(cert.tx_digest()).second) checkpoint_outbox_.push_back(cert);
}

EffectSign Validator::sign_effects(const Effects& fx) const {
  EffectSign s;
  s.effects = fx;
  s.vote = committee_->sign(id_, fx.digest());
  for (const auto& ref : fx.produced) {
    auto it = t().objects.find(ref.key);
    if (it != t().objects.end()) s.outputs.push_back(it->second);
  }
  return s;
}

Result<CertReply> Validator::process_cert(const Certificate& cert) {
  auto d = cert.tx_digest();
  if (!verify_certificate(cert, *committee_)) return Error{ErrorCode::kInvalidCertificate, d.short_hex()};
  if (cert.tx.epoch != epoch()) return Error{ErrorCode::kWrongEpoch, "certificate epoch"};
  if (auto ok = cert.tx.check_structure(); !ok) return ok.error();
  forward_checkpoint(cert);

  auto owned = owned_inputs(cert.tx);
  Batch b;
  for (const auto& k : owned) {
    auto it = t().locks.find(k);
    if (it == t().locks.end() || it->second.kind == LockKind::kTx) {
      b.set_lock(k, LockEntry{LockKind::kCert, d, cert});
    }
  }
  store_.commit(b);

  if (auto it = t().executed.find(d); it != t().executed.end()) return CertReply{sign_effects(it->second), ""};

  auto defer = [&](std::string why) -> Result<CertReply> {
    emit({"Deferred", d, cert.tx.inputs, {}, {}, why});
    return CertReply{std::nullopt, std::move(why)};
  };
  if (options_.behavior == Behavior::kStaleReplier) return defer("withheld");
  if (eoe_sent_) return defer("epoch ending");
  if (cert.tx.touches_shared()) return defer("shared input");
  for (const auto& k : owned) {
    auto state = t().unlock_state(k);
    if (state != UnlockState::kNone) return defer(std::string(to_string(state)) + " " + k.to_string());
  }
  for (const auto& k : cert.tx.commutative_inputs) {
    const Object* live = t().live_object(k.id);
    if (!live) return Error{ErrorCode::kMissingObject, "commutative " + k.to_string()};
    if (live->key.version != k.version || t().unlock_state(k) != UnlockState::kNone) {
      return defer("counter version " + k.to_string() + " closed");
    }
    auto it = crdts_.find(k.id);
    if (it != crdts_.end() && it->second.bounded && it->second.bounded->frozen) return defer("counter consolidating");
  }
  for (const auto& k : owned) {
    if (!present(k)) return defer("missing input " + k.to_string());
    if (!is_live(k)) return Error{ErrorCode::kStaleVersion, k.to_string()};
  }
  auto fx = run(cert.tx, true);
  if (!fx) return fx.error();
  executed_certs_.emplace(d, cert);
  // CRDT bookkeeping that needs the certificate itself.
  for (const auto& op : fx->commutative) {
    auto it = crdts_.find(op.counter.id);
    if (it == crdts_.end() || !it->second.bounded || it->second.bounded->key != op.counter) continue;
    auto& counter = *it->second.bounded;
    if (counter.accepted.emplace(d, cert).second) counter.accepted_log.push_back(d);
  }
  emit({"FastExec", d, fx->consumed, fx->produced, fx->digest(), ""});
  drain_parked();
  return CertReply{sign_effects(*fx), ""};
}

void Validator::persist_execution(const Digest& tx, const ExecOutput& out, const std::vector<Object>& pre,
                                  bool fast) {
  Batch b;
  for (const auto& o : out.written) b.put_object(o).set_live(o.key.id, o.key.version);
  b.put_executed(tx, out.effects);
  store_.commit(b);
  if (fast) {
    FastRecord rec;
    rec.pre_images = pre;
    for (const auto& o : out.written) rec.outputs.push_back(o.key);
    fast_[tx] = std::move(rec);
  }
}

Result<Effects> Validator::run(const Transaction& tx, bool fast) {
  auto objects = gather(tx, true);
  auto out = execute(tx, objects);
  if (!out) return out.error();
  std::vector<Object> pre;
  for (const auto& k : out->effects.consumed) {
    auto it = objects.find(k.id);
    if (it != objects.end()) pre.push_back(it->second);
  }
  persist_execution(out->effects.tx_digest, *out, pre, fast);
  apply_crdt(out->effects, !fast, std::nullopt);
  return out->effects;
}

Effects Validator::run_failed(const Transaction& tx, const Error& why) {
  auto out = execute_failed(tx, gather(tx, true), why);
  persist_execution(out.effects.tx_digest, out, {}, false);
  return out.effects;
}

Effects Validator::run_noop(const Digest& digest, const std::vector<ObjectKey>& keys) {
  std::vector<Object> objects;
  for (const auto& k : keys) {
    auto it = t().objects.find(k);
    if (it != t().objects.end()) objects.push_back(it->second);
  }
  auto out = execute_noop(digest, objects);
  persist_execution(digest, out, {}, false);
  return out.effects;
}

void Validator::apply_crdt(const Effects& fx, bool checkpointed, const std::optional<Certificate>&) {
  for (const auto& op : fx.commutative) {
    auto it = crdts_.find(op.counter.id);
    if (it == crdts_.end()) continue;
    auto& st = it->second;
    bool credit = op.kind == TxKind::kCredit;
    if (st.applied.insert(fx.tx_digest).second) {
      switch (st.kind) {
        case CrdtKind::kGCounter: st.g.add(fx.tx_digest, op.amount); break;
        case CrdtKind::kUSet: st.u.add(op.item); break;
        case CrdtKind::kPNSet: credit ? st.pn.add(op.item) : st.pn.remove(op.item); break;
        case CrdtKind::kBoundedCounter:
          if (credit && st.bounded && st.bounded->key == op.counter) st.bounded->credit(op.amount);
          break;
        default: break;
      }
    }
    if (checkpointed && st.applied_checkpoint.insert(fx.tx_digest).second) {
      switch (st.kind) {
        case CrdtKind::kGCounter: st.g_cp.add(fx.tx_digest, op.amount); break;
        case CrdtKind::kUSet: st.u_cp.add(op.item); break;
        case CrdtKind::kPNSet: credit ? st.pn_cp.add(op.item) : st.pn_cp.remove(op.item); break;
        case CrdtKind::kBoundedCounter:
          st.sequenced_ops[op.counter.version].push_back(CounterOp{fx.tx_digest, op.kind, op.amount});
          break;
        default: break;
      }
    }
  }
}

void Validator::undo(const Digest& tx) {
  auto it = fast_.find(tx);
  if (it == fast_.end()) return;
  const auto& rec = it->second;
  Batch b;
  std::set<ObjectId> restored;
  for (const auto& o : rec.pre_images) {
    b.set_live(o.key.id, o.key.version);
    restored.insert(o.key.id);
  }
  for (const auto& k : rec.outputs) {
    b.erase_object(k).erase_lock(k);
    if (!restored.contains(k.id)) b.erase_live(k.id);
  }
  b.erase_executed(tx);
  store_.commit(b);
  std::vector<ObjectKey> keys;
  for (const auto& o : rec.pre_images) keys.push_back(o.key);
  emit({"Undo", tx, keys, {}, {}, "", static_cast<std::int64_t>(rec.outputs.size())});
  for (auto& [id, st] : crdts_) {
    if (st.bounded) st.bounded->accepted.erase(tx);
  }
  executed_certs_.erase(tx);
  fast_.erase(it);
}

bool Validator::any_confirmed(const std::vector<ObjectKey>& keys) const {
  return std::any_of(keys.begin(), keys.end(),
                     [&](const ObjectKey& k) { return t().unlock_state(k) == UnlockState::kConfirmed; });
}

void Validator::confirm(const std::vector<ObjectKey>& keys) {
  Batch b;
  std::vector<ObjectKey> changed;
  for (const auto& k : keys) {
    if (t().unlock_state(k) == UnlockState::kConfirmed) continue;
    b.set_unlock(k, UnlockState::kConfirmed);
    changed.push_back(k);
  }
  store_.commit(b);
  if (!changed.empty()) emit({"UnlockDb", {}, changed, {}, {}, "Confirmed"});
  // Confirmed keys can no longer be undone.
  std::erase_if(fast_, [&](const auto& kv) {
    return std::any_of(kv.second.pre_images.begin(), kv.second.pre_images.end(), [&](const Object& o) {
      return t().unlock_state(o.key) == UnlockState::kConfirmed;
    });
  });
}

void Validator::note_sequenced(const Digest& tx) { sequenced_txs_.insert(tx); }

bool Validator::check_auto_unlock(const UnlockRqt& rqt, Tick now, Tick delta) const {
  for (const auto& k : rqt.keys) {
    auto it = t().lock_times.find(k);
    if (it == t().lock_times.end() || now - it->second < delta) return false;
  }
  return true;
}

Result<UnlockVote> Validator::process_unlock_rqt(const UnlockRqt& rqt) {
  auto d = rqt.digest();
  auto reject = [&](Error e) -> Result<UnlockVote> {
    emit({"UnlockRejected", d, rqt.keys, {}, {}, std::string(to_string(e.code)) + ": " + e.detail});
    return e;
  };
  if (options_.behavior == Behavior::kVoteWithholder) return Error{ErrorCode::kIncomplete, "withheld"};
  if (auto ok = rqt.check_structure(); !ok) return reject(ok.error());
  auto vote_with = [&](std::vector<Certificate> certs, std::string detail) {
    std::sort(certs.begin(), certs.end(),
              [](const Certificate& a, const Certificate& b) { return a.tx_digest() < b.tx_digest(); });
    UnlockVote v{rqt, std::move(certs), {}};
    v.vote = committee_->sign(id_, unlock_vote_message(d, v.carried()));
    emit({"UnlockVote", d, rqt.keys, {}, {}, std::move(detail), static_cast<std::int64_t>(v.certs.size())});
    return v;
  };
  if (options_.behavior == Behavior::kEquivocator) return vote_with({}, "equivocating");
  if (rqt.epoch != epoch()) return reject({ErrorCode::kWrongEpoch, "request epoch"});
  if (paused_) return reject({ErrorCode::kEpochChanging, "epoch change in progress"});

  bool consolidate = rqt.protocol == UnlockProtocol::kConsolidate;
  CrdtState* counter_state = nullptr;
  for (const auto& k : rqt.keys) {
    auto it = t().objects.find(k);
    if (it == t().objects.end()) return reject({ErrorCode::kMissingObject, k.to_string()});
    if (t().unlock_state(k) == UnlockState::kConfirmed) return reject({ErrorCode::kAlreadyConfirmed, k.to_string()});
    const Object& o = it->second;
    if (consolidate) {
      if (rqt.keys.size() != 1 || o.crdt != CrdtKind::kBoundedCounter) {
        return reject({ErrorCode::kMalformed, "consolidation lists one bounded counter"});
      }
      if (!is_live(k)) return reject({ErrorCode::kAlreadyConfirmed, "counter version " + k.to_string() + " closed"});
      counter_state = &crdts_.at(k.id);
    } else if (o.kind != ObjectKind::kOwned) {
      return reject({ErrorCode::kMalformed, "only owned objects can be unlocked"});
    }
  }

  // Fresh gas: live, owned by a signer of the request, unencumbered.
  std::set<ObjectId> included;
  for (const auto& k : rqt.keys) included.insert(k.id);
  included.insert(rqt.gas.id);
  {
    const Object* gas = is_live(rqt.gas) ? &t().objects.at(rqt.gas) : nullptr;
    if (!gas || gas->kind != ObjectKind::kOwned || !gas->owner) return reject({ErrorCode::kBadGas, "gas not live"});
    if (gas->balance < kGasFee) return reject({ErrorCode::kBadGas, "gas balance"});
    if (t().unlock_state(rqt.gas) != UnlockState::kNone) return reject({ErrorCode::kBadGas, "gas under unlock"});
    auto lock = t().locks.find(rqt.gas);
    if (lock != t().locks.end() && !(lock->second.kind == LockKind::kUnlock && lock->second.digest == d)) {
      return reject({ErrorCode::kBadGas, "gas locked"});
    }
    auto ok = check_owner_evidence(*gas->owner, rqt.gas.id, rqt.evidence, d, included, now_, committee_->scheme(),
                                   options_.event_oracle);
    if (!ok || !*ok) return reject({ErrorCode::kBadGas, "gas not authorized"});
  }

  bool authorized = true;
  for (const auto& k : rqt.keys) {
    const Object& o = t().objects.at(k);
    if (o.kind != ObjectKind::kOwned) continue;
    auto ok = o.owner ? check_owner_evidence(*o.owner, k.id, rqt.evidence, d, included, now_, committee_->scheme(),
                                             options_.event_oracle)
                      : Result<bool>(false);
    if (!ok || !*ok) {
      authorized = false;
      break;
    }
  }
  bool auto_unlock = false;
  if (!authorized) {
    if (!check_auto_unlock(rqt, now_, options_.delta)) {
      return reject({ErrorCode::kBadEvidence, "no valid evidence and delay not elapsed"});
    }
    auto_unlock = true;
  }

  std::vector<ObjectKey> replacement_locks;
  if (rqt.replacement) {
    const auto& r = *rqt.replacement;
    auto rd = r.digest();
    if (rqt.protocol == UnlockProtocol::kMulti) {
      for (const auto& k : owned_inputs(r)) {
        if (!std::binary_search(rqt.keys.begin(), rqt.keys.end(), k)) {
          return reject({ErrorCode::kMalformed, "replacement input " + k.to_string() + " not listed"});
        }
      }
      if (!r.shared_inputs.empty() || !r.commutative_inputs.empty()) {
        return reject({ErrorCode::kMalformed, "replacement must be owned-only"});
      }
    } else {
      bool targets_counter = std::any_of(r.commutative_inputs.begin(), r.commutative_inputs.end(),
                                         [&](const ObjectKey& k) { return k == rqt.keys.front(); });
      if (!targets_counter || (r.kind != TxKind::kDebit && r.kind != TxKind::kCredit) ||
          r.params.target != rqt.keys.front().id) {
        return reject({ErrorCode::kMalformed, "replacement must debit or credit the counter"});
      }
      for (const auto& k : owned_inputs(r)) {
        auto lock = t().locks.find(k);
        if (lock != t().locks.end() && (lock->second.kind == LockKind::kUnlock || lock->second.digest != rd)) {
          return reject({ErrorCode::kConflictingLock, "replacement input " + k.to_string()});
        }
        if (!is_live(k)) return reject({ErrorCode::kStaleVersion, "replacement input " + k.to_string()});
        replacement_locks.push_back(k);
      }
    }
    if (auto ok = check_evidence(r); !ok) return reject(ok.error());
  }

  std::vector<Certificate> certs;
  std::set<Digest> seen;
  if (consolidate) {
    for (const auto& dd : counter_state->bounded->accepted_log) {
      if (sequenced_txs_.contains(dd)) continue;
      auto it = counter_state->bounded->accepted.find(dd);
      if (it != counter_state->bounded->accepted.end() && seen.insert(dd).second) certs.push_back(it->second);
    }
  } else {
    for (const auto& k : rqt.keys) {
      auto it = t().locks.find(k);
      if (it != t().locks.end() && it->second.kind == LockKind::kCert && seen.insert(it->second.digest).second) {
        certs.push_back(*it->second.cert);
      }
    }
  }
  if (options_.behavior == Behavior::kStaleReplier) certs.clear();

  Batch b;
  b.set_lock(rqt.gas, LockEntry{LockKind::kUnlock, d, std::nullopt});
  std::vector<ObjectKey> unlocked;
  bool mark = rqt.protocol == UnlockProtocol::kSingle || (rqt.protocol == UnlockProtocol::kMulti && certs.empty());
  if (mark) {
    for (const auto& k : rqt.keys) {
      if (t().unlock_state(k) == UnlockState::kNone) {
        b.set_unlock(k, UnlockState::kUnlocked);
        unlocked.push_back(k);
      }
    }
  }
  for (const auto& k : replacement_locks) {
    if (!t().locks.contains(k)) b.set_lock(k, LockEntry{LockKind::kTx, rqt.replacement->digest(), std::nullopt});
  }
  store_.commit(b);
  if (!unlocked.empty()) emit({"UnlockDb", d, unlocked, {}, {}, "Unlocked"});
  if (consolidate) counter_state->bounded->frozen = true;
  return vote_with(std::move(certs), auto_unlock ? "auto" : "authorized");
}

std::vector<ObjectKey> Validator::required_keys(const SequencedItem& item) const {
  std::vector<ObjectKey> keys;
  auto add_tx = [&](const Transaction& tx) {
    for (const auto& k : tx.inputs) keys.push_back(k);
    for (const auto& k : tx.commutative_inputs) keys.push_back(k);
  };
  if (const auto* u = std::get_if<UnlockCert>(&item.payload)) {
    if (u->rqt.epoch != epoch()) return {};
    keys = u->rqt.keys;
    keys.push_back(u->rqt.gas);
    for (const auto& c : u->certs) add_tx(c.tx);
    if (u->rqt.replacement) add_tx(*u->rqt.replacement);
  } else if (const auto* c = std::get_if<Certificate>(&item.payload)) {
    if (c->tx.epoch != epoch()) return {};
    add_tx(c->tx);
  }
  // Read-only inputs never block: their version never moves.
  std::erase_if(keys, [&](const ObjectKey& k) {
    const Object* live = t().live_object(k.id);
    return live && live->kind == ObjectKind::kReadOnly;
  });
  return sorted_unique(std::move(keys));
}

void Validator::deliver(const SequencedItem& item) {
  parked_.push_back(item);
  drain_parked();
}

void Validator::drain_parked() {
  bool progress = true;
  while (progress) {
    progress = false;
    std::set<ObjectKey> blocked;
    bool earlier_parked = false;
    for (auto it = parked_.begin(); it != parked_.end(); ++it) {
      bool is_eoe = it->kind() == SeqKind::kEndOfEpoch;
      auto keys = required_keys(*it);
      bool wait = (is_eoe && earlier_parked) ||
                  std::any_of(keys.begin(), keys.end(),
                              [&](const ObjectKey& k) { return !present(k) || blocked.contains(k); });
      if (wait) {
        blocked.insert(keys.begin(), keys.end());
        earlier_parked = true;
        continue;
      }
      SequencedItem item = std::move(*it);
      parked_.erase(it);
      results_.push_back(handle(item));
      progress = true;
      break;
    }
  }
}

SeqResult Validator::handle(const SequencedItem& item) {
  if (const auto* u = std::get_if<UnlockCert>(&item.payload)) return process_unlock_cert(*u, item.seq);
  if (const auto* c = std::get_if<Certificate>(&item.payload)) return process_checkpoint_cert(*c, item.seq);
  return handle_end_of_epoch(std::get<EndOfEpoch>(item.payload), item.seq);
}

SeqResult Validator::process_checkpoint_cert(const Certificate& cert, std::uint64_t seq) {
  auto d = cert.tx_digest();
  SeqResult res{seq, SeqKind::kCheckpointCert, d, SeqOutcome::kSkipped, std::nullopt, {}, ""};
  auto skip = [&](std::string why) {
    res.detail = std::move(why);
    emit({"SeqSkip", d, cert.tx.inputs, {}, {}, res.detail, 0, seq});
    return res;
  };
  if (!verify_certificate(cert, *committee_)) return skip("invalid certificate");
  if (cert.tx.epoch != epoch()) return skip("stale epoch");
  note_sequenced(d);
  auto keys = owned_inputs(cert.tx);
  std::vector<ObjectKey> guarded = keys;
  for (const auto& k : cert.tx.commutative_inputs) {
    auto it = crdts_.find(k.id);
    if (it != crdts_.end() && it->second.kind == CrdtKind::kBoundedCounter) guarded.push_back(k);
  }
  auto done = t().executed.find(d);
  if (any_confirmed(guarded)) {
    if (done != t().executed.end()) res.executed.push_back(sign_effects(done->second));
    return skip(done != t().executed.end() ? "already final" : "key confirmed by another item");
  }
  if (done != t().executed.end()) {
    Effects fx = done->second;
    apply_crdt(fx, true, cert);
    confirm(keys);
    res.outcome = SeqOutcome::kExecuted;
    res.detail = "fast path result";
    res.executed.push_back(sign_effects(fx));
    emit({"SeqExec", d, fx.consumed, fx.produced, fx.digest(), res.detail, 0, seq});
    return res;
  }
  for (const auto& k : keys) {
    if (!is_live(k)) return skip("input " + k.to_string() + " consumed");
  }
  for (const auto& k : cert.tx.commutative_inputs) {
    const Object* live = t().live_object(k.id);
    if (!live || live->key.version != k.version) return skip("commutative version closed");
  }
  auto fx = run(cert.tx, false);
  Effects effects = fx ? *fx : run_failed(cert.tx, fx.error());
  confirm(keys);
  res.outcome = SeqOutcome::kExecuted;
  res.detail = fx ? "executed" : "failed: " + std::string(to_string(fx.code()));
  res.executed.push_back(sign_effects(effects));
  emit({"SeqExec", d, effects.consumed, effects.produced, effects.digest(), res.detail, 0, seq});
  return res;
}

void Validator::consume_unlock_gas(const UnlockRqt& rqt, SeqResult& res) {
  auto d = rqt.digest();
  const auto& g = rqt.gas;
  if (t().unlock_state(g) == UnlockState::kConfirmed || !is_live(g)) {
    emit({"GasSkipped", d, {g}, {}, {}, "gas version not live", 0, res.seq});
    return;
  }
  Object next = t().objects.at(g);
  Object before = next;
  next.key = g.next();
  next.balance -= kGasFee;
  ExecOutput out;
  out.effects.tx_digest = unlock_gas_digest(d);
  out.effects.consumed.push_back(g);
  out.effects.produced.push_back(ObjectRef{next.key, next.digest()});
  out.written.push_back(next);
  persist_execution(out.effects.tx_digest, out, {before}, false);
  confirm({g});
  res.gas = sign_effects(out.effects);
  emit({"GasConsumed", d, {g}, out.effects.produced, out.effects.digest(), "", 0, res.seq});
}

bool Validator::execute_carried(const Certificate& cert, SeqResult& res) {
  auto d = cert.tx_digest();
  auto keys = owned_inputs(cert.tx);
  note_sequenced(d);
  if (auto done = t().executed.find(d); done != t().executed.end()) {
    Effects fx = done->second;
    apply_crdt(fx, true, cert);
    confirm(keys);
    res.executed.push_back(sign_effects(fx));
    emit({"SeqExec", d, fx.consumed, fx.produced, fx.digest(), "carried, fast path result", 0, res.seq});
    return true;
  }
  auto not_live = [&](const ObjectKey& k) { return !is_live(k); };
  bool dead = any_confirmed(keys) || std::any_of(keys.begin(), keys.end(), not_live) ||
              std::any_of(cert.tx.commutative_inputs.begin(), cert.tx.commutative_inputs.end(), not_live);
  if (dead) {
    emit({"SeqSkip", d, cert.tx.inputs, {}, {}, "carried certificate dead", 0, res.seq});
    return false;
  }
  auto fx = run(cert.tx, false);
  Effects effects = fx ? *fx : run_failed(cert.tx, fx.error());
  confirm(keys);
  res.executed.push_back(sign_effects(effects));
  emit({"SeqExec", d, effects.consumed, effects.produced, effects.digest(), "carried", 0, res.seq});
  return true;
}

SeqResult Validator::process_unlock_cert(const UnlockCert& ucert, std::uint64_t seq) {
  const auto& rqt = ucert.rqt;
  auto d = rqt.digest();
  SeqResult res{seq, SeqKind::kUnlockCert, d, SeqOutcome::kSkipped, std::nullopt, {}, ""};
  if (rqt.epoch != epoch()) {
    res.detail = "stale epoch";
    emit({"SeqSkip", d, rqt.keys, {}, {}, res.detail, 0, seq});
    return res;
  }
  if (auto ok = verify_unlock_cert(ucert, *committee_); !ok) {
    res.detail = "invalid: " + ok.error().detail;
    emit({"SeqSkip", d, rqt.keys, {}, {}, res.detail, 0, seq});
    return res;
  }
  consume_unlock_gas(rqt, res);
  if (any_confirmed(rqt.keys)) {
    res.outcome = SeqOutcome::kIgnored;
    res.detail = "key already confirmed";
    emit({"SeqIgnored", d, rqt.keys, {}, {}, res.detail, 0, seq});
    return res;
  }
  res.outcome = SeqOutcome::kExecuted;
  if (rqt.protocol == UnlockProtocol::kConsolidate) {
    consolidate_counter(ucert, res);
    return res;
  }

  if (!ucert.certs.empty()) {
    std::vector<const Certificate*> ran;
    for (const auto& c : ucert.certs) {
      if (execute_carried(c, res)) ran.push_back(&c);
    }
    if (rqt.protocol == UnlockProtocol::kSingle) {
      // A listed key no executed carried certificate consumes takes the
      // no-commit path on its own.
      for (const auto& k : rqt.keys) {
        bool covered = std::any_of(ran.begin(), ran.end(), [&](const Certificate* c) {
          return std::find(c->tx.inputs.begin(), c->tx.inputs.end(), k) != c->tx.inputs.end();
        });
        if (covered || t().unlock_state(k) == UnlockState::kConfirmed) continue;
        for (auto it = fast_.begin(); it != fast_.end();) {
          auto next = std::next(it);
          bool touches = std::any_of(it->second.pre_images.begin(), it->second.pre_images.end(),
                                     [&](const Object& o) { return o.key == k; });
          if (touches) undo(it->first);
          it = next;
        }
        auto fx = run_noop(noop_digest(d, k), {k});
        confirm({k});
        res.executed.push_back(sign_effects(fx));
        emit({"SeqExec", fx.tx_digest, fx.consumed, fx.produced, fx.digest(), "noop", 0, seq});
      }
    }
    res.detail = "carried " + std::to_string(ucert.certs.size());
    emit({"SeqConfirm", d, rqt.keys, {}, {}, res.detail, 0, seq});
    return res;
  }

  // No-commit certificate: roll back at most one fast-path layer, then
  // replace the locked versions.
  std::vector<Digest> to_undo;
  for (const auto& [tx, rec] : fast_) {
    bool touches = std::any_of(rec.pre_images.begin(), rec.pre_images.end(), [&](const Object& o) {
      return std::binary_search(rqt.keys.begin(), rqt.keys.end(), o.key);
    });
    if (touches) to_undo.push_back(tx);
  }
  for (const auto& tx : to_undo) undo(tx);

  std::vector<ObjectKey> confirmed = rqt.keys;
  std::vector<ObjectKey> leftovers = rqt.keys;
  if (rqt.protocol == UnlockProtocol::kMulti && rqt.replacement) {
    const auto& r = *rqt.replacement;
    auto keys = owned_inputs(r);
    bool runnable = std::all_of(keys.begin(), keys.end(), [&](const ObjectKey& k) { return is_live(k); });
    Effects fx;
    if (runnable) {
      auto ran = run(r, false);
      fx = ran ? *ran : run_failed(r, ran.error());
    } else {
      fx = run_failed(r, Error{ErrorCode::kStaleVersion, "replacement inputs not live"});
    }
    note_sequenced(r.digest());
    res.executed.push_back(sign_effects(fx));
    emit({"SeqExec", fx.tx_digest, fx.consumed, fx.produced, fx.digest(), "replacement", 0, seq});
    std::erase_if(leftovers, [&](const ObjectKey& k) {
      return std::find(fx.consumed.begin(), fx.consumed.end(), k) != fx.consumed.end();
    });
    confirmed.insert(confirmed.end(), keys.begin(), keys.end());
  }
  for (const auto& k : leftovers) {
    if (!is_live(k)) continue;
    auto fx = run_noop(noop_digest(d, k), {k});
    res.executed.push_back(sign_effects(fx));
    emit({"SeqExec", fx.tx_digest, fx.consumed, fx.produced, fx.digest(), "noop", 0, seq});
  }
  confirm(sorted_unique(confirmed));
  res.detail = "no-commit";
  emit({"SeqConfirm", d, rqt.keys, {}, {}, res.detail, 0, seq});
  return res;
}

void Validator::consolidate_counter(const UnlockCert& ucert, SeqResult& res) {
  const auto& rqt = ucert.rqt;
  auto d = rqt.digest();
  const ObjectKey counter_key = rqt.keys.front();
  auto& st = crdts_.at(counter_key.id);

  std::map<Digest, CounterOp> carried_ops;
  for (const auto& c : ucert.certs) {
    for (const auto& k : c.tx.commutative_inputs) {
      if (k == counter_key && c.tx.params.target == k.id) {
        carried_ops.emplace(c.tx_digest(), CounterOp{c.tx_digest(), c.tx.kind, c.tx.params.amount});
      }
    }
    execute_carried(c, res);
  }
  std::vector<std::vector<CounterOp>> replies;
  for (const auto& v : ucert.votes) {
    std::vector<CounterOp> reply;
    for (const auto& cd : v.carried) {
      if (auto it = carried_ops.find(cd); it != carried_ops.end()) reply.push_back(it->second);
    }
    replies.push_back(std::move(reply));
  }
  // Certificates carried but already dead (never executed) are not counted.
  auto& sequenced = st.sequenced_ops[counter_key.version];
  std::set<Digest> counted;
  for (const auto& op : sequenced) counted.insert(op.tx);
  for (auto& reply : replies) {
    std::erase_if(reply, [&](const CounterOp& op) { return !counted.contains(op.tx); });
  }
  // Fast-path debits against this version that the consolidation does not
  // count can never finalize; roll them back so every validator agrees.
  std::vector<Digest> uncounted;
  for (const auto& [tx, rec] : fast_) {
    if (counted.contains(tx)) continue;
    auto fx = t().executed.find(tx);
    if (fx == t().executed.end()) continue;
    bool debits = std::any_of(fx->second.commutative.begin(), fx->second.commutative.end(),
                              [&](const CommutativeOp& op) { return op.counter == counter_key; });
    if (debits) uncounted.push_back(tx);
  }
  for (const auto& tx : uncounted) undo(tx);

  const Object counter_obj = t().objects.at(counter_key);
  std::optional<CounterOp> replacement_op;
  const auto& r = *rqt.replacement;
  auto rkeys = owned_inputs(r);
  bool runnable = !t().executed.contains(r.digest()) &&
                  std::all_of(rkeys.begin(), rkeys.end(), [&](const ObjectKey& k) {
                    return is_live(k) && t().unlock_state(k) != UnlockState::kConfirmed;
                  });
  if (runnable) replacement_op = CounterOp{r.digest(), r.kind, r.params.amount};
  auto plan = consolidate(counter_obj.balance, replies, sequenced, replacement_op, committee_->params());
  if (!plan) {
    emit({"SeqSkip", d, rqt.keys, {}, {}, "consolidation: " + plan.error().detail, 0, res.seq});
    return;
  }
  if (plan->replacement_applied) {
    auto ran = run(r, false);
    Effects fx = ran ? *ran : run_failed(r, ran.error());
    note_sequenced(r.digest());
    confirm(rkeys);
    res.executed.push_back(sign_effects(fx));
    emit({"SeqExec", fx.tx_digest, fx.consumed, fx.produced, fx.digest(), "replacement", 0, res.seq});
  }

  Object next = counter_obj;
  next.key = counter_key.next();
  next.balance = plan->new_max;
  ExecOutput out;
  out.effects.tx_digest = consolidation_digest(d);
  out.effects.consumed.push_back(counter_key);
  out.effects.produced.push_back(ObjectRef{next.key, next.digest()});
  out.written.push_back(next);
  persist_execution(out.effects.tx_digest, out, {counter_obj}, false);
  confirm({counter_key});
  st.bounded = BoundedCounter::fresh(next.key, plan->new_max, committee_->params());
  res.executed.push_back(sign_effects(out.effects));
  res.detail = "consolidated";
  emit({"Consolidated", d, {counter_key}, out.effects.produced, out.effects.digest(),
        "outstanding=" + std::to_string(plan->outstanding) + " budget=" + std::to_string(plan->new_budget),
        plan->new_max, res.seq});
}

SeqResult Validator::handle_end_of_epoch(const EndOfEpoch& eoe, std::uint64_t seq) {
  SeqResult res{seq, SeqKind::kEndOfEpoch, eoe.message(), SeqOutcome::kSkipped, std::nullopt, {}, ""};
  if (eoe.sig.signer != eoe.validator || !committee_->verify(eoe.sig, eoe.message())) {
    res.detail = "bad signature";
    return res;
  }
  if (eoe.epoch != epoch()) {
    res.detail = "stale epoch";
    return res;
  }
  auto& votes = eoe_votes_[eoe.epoch];
  votes.insert(eoe.validator);
  res.outcome = SeqOutcome::kRecorded;
  res.detail = std::to_string(votes.size()) + " end-of-epoch";
  if (votes.size() < committee_->quorum()) return res;

  Epoch next = epoch() + 1;
  Batch b;
  b.advance_epoch(next);
  store_.commit(b);
  paused_ = false;
  eoe_sent_ = false;
  executed_certs_.clear();
  fast_.clear();
  for (auto& [id, st] : crdts_) {
    if (st.bounded) st.bounded->frozen = false;
  }
  emit({"EpochAdvanced", {}, {}, {}, {}, "", static_cast<std::int64_t>(next), seq});
  return res;
}

std::vector<Certificate> Validator::begin_epoch_change() {
  paused_ = true;
  std::vector<Certificate> pending;
  for (const auto& [d, cert] : executed_certs_) {
    if (!sequenced_txs_.contains(d)) pending.push_back(cert);
  }
  emit({"EpochChangeBegun", {}, {}, {}, {}, "", static_cast<std::int64_t>(pending.size())});
  return pending;
}

std::optional<EndOfEpoch> Validator::end_of_epoch() {
  if (!paused_ || eoe_sent_) return std::nullopt;
  for (const auto& [d, cert] : executed_certs_) {
    if (!sequenced_txs_.contains(d)) return std::nullopt;
  }
  eoe_sent_ = true;
  EndOfEpoch eoe{id_, epoch(), {}};
  eoe.sig = committee_->sign(id_, eoe.message());
  emit({"EndOfEpochSent", {}, {}, {}, {}, "", static_cast<std::int64_t>(eoe.epoch)});
  return eoe;
}

std::vector<Certificate> Validator::take_checkpoint_outbox() { return std::exchange(checkpoint_outbox_, {}); }
std::vector<SeqResult> Validator::take_sequenced_results() { return std::exchange(results_, {}); }
std::vector<ValidatorEvent> Validator::take_events() { return std::exchange(events_, {}); }

const BoundedCounter* Validator::counter(const ObjectId& id) const {
  auto it = crdts_.find(id);
  return it == crdts_.end() || !it->second.bounded ? nullptr : &*it->second.bounded;
}

const GCounter* Validator::gcounter(const ObjectId& id, bool checkpointed) const {
  auto it = crdts_.find(id);
  if (it == crdts_.end() || it->second.kind != CrdtKind::kGCounter) return nullptr;
  return checkpointed ? &it->second.g_cp : &it->second.g;
}

const USet* Validator::uset(const ObjectId& id, bool checkpointed) const {
  auto it = crdts_.find(id);
  if (it == crdts_.end() || it->second.kind != CrdtKind::kUSet) return nullptr;
  return checkpointed ? &it->second.u_cp : &it->second.u;
}

const PNSet* Validator::pnset(const ObjectId& id, bool checkpointed) const {
  auto it = crdts_.find(id);
  if (it == crdts_.end() || it->second.kind != CrdtKind::kPNSet) return nullptr;
  return checkpointed ? &it->second.pn_cp : &it->second.pn;
}

}  // namespace fpl
