#include "fpl/client.hpp"

#include <algorithm>

namespace fpl {

namespace {

bool retryable(ErrorCode c) {
  return c == ErrorCode::kEpochChanging || c == ErrorCode::kMissingObject || c == ErrorCode::kIncomplete;
}

bool lock_class(ErrorCode c) { return c == ErrorCode::kConflictingLock || c == ErrorCode::kObjectUnlocked; }

// Most frequent code, ties to the lowest enumerator.
std::pair<ErrorCode, std::size_t> most_common(const std::map<ValidatorId, ErrorCode>& errors) {
  std::map<ErrorCode, std::size_t> counts;
  for (const auto& [v, c] : errors) ++counts[c];
  std::pair<ErrorCode, std::size_t> best{ErrorCode::kMalformed, 0};
  for (const auto& [c, k] : counts) {
    if (k > best.second) best = {c, k};
  }
  return best;
}

std::set<ObjectId> tx_ids(const Transaction& tx) {
  std::set<ObjectId> ids;
  for (const auto& k : tx.inputs) ids.insert(k.id);
  for (const auto& id : tx.shared_inputs) ids.insert(id);
  for (const auto& k : tx.commutative_inputs) ids.insert(k.id);
  return ids;
}

void prove_owned(EvidenceBuilder& b, const ObjectKey& k, const ObjectView& view, const AuthContext& ctx) {
  const Object* o = view.at(k);
  if (!o || o->kind != ObjectKind::kOwned || !o->owner) return;
  if (const AuthTerm* term = view.term(*o->owner)) b.prove(k.id, *term, ctx);
}

}  // namespace

void ObjectView::add(const Object& o) {
  seen_[o.key] = o;
  auto it = latest_.find(o.key.id);
  if (it == latest_.end() || it->second.key.version <= o.key.version) latest_[o.key.id] = o;
}

void ObjectView::apply(const Effects&, const std::vector<Object>& outputs) {
  for (const auto& o : outputs) add(o);
}

const Object* ObjectView::latest(const ObjectId& id) const {
  auto it = latest_.find(id);
  return it == latest_.end() ? nullptr : &it->second;
}

const Object* ObjectView::at(const ObjectKey& k) const {
  auto it = seen_.find(k);
  return it == seen_.end() ? latest(k.id) : &it->second;
}

std::optional<ObjectKey> ObjectView::latest_key(const ObjectId& id) const {
  const Object* o = latest(id);
  if (!o) return std::nullopt;
  return o->key;
}

void ObjectView::add_term(const AuthTerm& term, std::set<std::string> holders) {
  terms_[node_hash(term)] = {term, std::move(holders)};
}

const AuthTerm* ObjectView::term(const AuthCommitment& c) const {
  auto it = terms_.find(c.root);
  return it == terms_.end() ? nullptr : &it->second.first;
}

const std::set<std::string>* ObjectView::holders(const AuthCommitment& c) const {
  auto it = terms_.find(c.root);
  return it == terms_.end() ? nullptr : &it->second.second;
}

Transaction sign_transaction(Transaction tx, const std::vector<PublicKey>& signers, const ObjectView& view,
                             Tick local_time) {
  EvidenceBuilder b;
  b.message = evidence_message(tx);
  for (const auto& pk : signers) b.sign_as(pk);
  auto ctx = b.context(tx_ids(tx), local_time);
  for (const auto& k : tx.inputs) prove_owned(b, k, view, ctx);
  tx.evidence = std::move(b.evidence);
  return tx;
}

UnlockRqt sign_unlock(UnlockRqt rqt, const std::vector<PublicKey>& signers, const ObjectView& view,
                      Tick local_time) {
  EvidenceBuilder b;
  b.message = rqt.digest();
  for (const auto& pk : signers) b.sign_as(pk);
  std::set<ObjectId> included;
  for (const auto& k : rqt.keys) included.insert(k.id);
  included.insert(rqt.gas.id);
  auto ctx = b.context(included, local_time);
  prove_owned(b, rqt.gas, view, ctx);
  for (const auto& k : rqt.keys) prove_owned(b, k, view, ctx);
  rqt.evidence = std::move(b.evidence);
  return rqt;
}

Transaction retry_after_unlock(const Transaction& tx, const std::vector<EffectCert>& unlock) {
  std::map<ObjectKey, ObjectKey> moved;
  for (const auto& cert : unlock) {
    for (const auto& c : cert.effects.consumed) {
      for (const auto& p : cert.effects.produced) {
        if (p.key.id == c.id) moved[c] = p.key;
      }
    }
  }
  auto bump = [&](ObjectKey& k) {
    // Follow chains: an unlock can move a key more than once (undo, then NoOp).
    for (auto it = moved.find(k); it != moved.end(); it = moved.find(k)) k = it->second;
  };
  Transaction out = tx;
  for (auto& k : out.inputs) bump(k);
  for (auto& k : out.commutative_inputs) bump(k);
  bump(out.gas);
  out.evidence = {};
  return out;
}

std::string_view to_string(DriverStatus s) {
  switch (s) {
    case DriverStatus::kPending: return "Pending";
    case DriverStatus::kFinalized: return "Finalized";
    case DriverStatus::kLocked: return "Locked";
    case DriverStatus::kRejected: return "Rejected";
    case DriverStatus::kSuperseded: return "Superseded";
    case DriverStatus::kUnauthorized: return "Unauthorized";
    case DriverStatus::kSupersededByCheckpoint: return "SupersededByCheckpoint";
  }
  return "?";
}

std::vector<ValidatorId> Driver::everyone() const {
  std::vector<ValidatorId> out;
  for (ValidatorId v = 0; v < committee_->size(); ++v) out.push_back(v);
  return out;
}

void Driver::finalize_effects(const EffectCert& cert, const std::vector<Object>& outputs) {
  certs_.push_back(cert);
  if (view_) view_->apply(cert.effects, outputs);
}

std::optional<std::pair<EffectCert, std::vector<Object>>> EffectPool::add(ValidatorId, const EffectSign& s,
                                                                          const Committee& committee) {
  if (!outputs_match(s)) return std::nullopt;
  auto d = s.effects.digest();
  if (!committee.verify(s.vote, d)) return std::nullopt;
  auto& group = by_effects_[d];
  bool fresh = group.size() < committee.quorum();
  group.emplace(s.vote.signer, s);
  if (!fresh || group.size() < committee.quorum()) return std::nullopt;
  std::vector<EffectSign> votes;
  for (const auto& [v, sign] : group) votes.push_back(sign);
  auto cert = assemble_effect_cert(votes, committee);
  if (!cert) return std::nullopt;
  return std::make_pair(*cert, s.outputs);
}

FastPathDriver::FastPathDriver(std::shared_ptr<const Committee> committee, ObjectView* view, Transaction tx,
                               DriverOptions options)
    : Driver(std::move(committee), view, std::move(options)), tx_(std::move(tx)), digest_(tx_.digest()) {}

std::vector<ClientSend> FastPathDriver::start(Tick) {
  round_trips_ = 1;
  return {ClientSend{tx_, options_.targets.empty() ? everyone() : options_.targets}};
}

std::vector<ClientSend> FastPathDriver::on_tx_reply(ValidatorId from, const Result<CertSign>& r) {
  if (phase_ != Phase::kSigning) return {};
  if (r) {
    if (r->tx_digest != digest_) return {};
    votes_[from] = *r;
    errors_.erase(from);
    if (votes_.size() >= committee_->quorum()) return certify();
    if (targets_exhausted()) {
      phase_ = Phase::kDone;
      finish(DriverStatus::kLocked, std::to_string(votes_.size()) + " votes");
    }
    return {};
  }
  if (retryable(r.code()) || votes_.contains(from)) return {};
  errors_[from] = r.code();

  std::map<ValidatorId, ErrorCode> validity;
  for (const auto& [v, c] : errors_) {
    if (!lock_class(c)) validity.emplace(v, c);
  }
  auto [code, count] = most_common(validity);
  if (count >= committee_->validity()) {
    rejection_ = code;
    phase_ = Phase::kDone;
    finish(DriverStatus::kRejected, std::string(to_string(code)));
    return {};
  }
  const auto n = committee_->size();
  const auto q = committee_->quorum();
  bool exhausted = targets_exhausted();
  if (errors_.size() > n - q || exhausted) {
    rejection_ = most_common(errors_).first;
    bool locked = std::any_of(errors_.begin(), errors_.end(), [](const auto& e) { return lock_class(e.second); });
    phase_ = Phase::kDone;
    if (locked || exhausted) {
      finish(DriverStatus::kLocked, std::to_string(votes_.size()) + " votes");
    } else {
      finish(DriverStatus::kRejected, std::string(to_string(*rejection_)));
    }
  }
  return {};
}

bool FastPathDriver::targets_exhausted() const {
  // A wallet that only reached a minority of validators can never finish.
  if (options_.targets.empty() || options_.targets.size() >= committee_->quorum()) return false;
  return std::all_of(options_.targets.begin(), options_.targets.end(),
                     [&](ValidatorId v) { return votes_.contains(v) || errors_.contains(v); });
}

std::vector<ClientSend> FastPathDriver::certify() {
  std::vector<CertSign> votes;
  for (const auto& [v, s] : votes_) votes.push_back(s);
  cert_ = assemble_certificate(tx_, votes, *committee_);
  if (!cert_) {
    phase_ = Phase::kDone;
    finish(DriverStatus::kRejected, "certificate did not verify");
    return {};
  }
  phase_ = Phase::kCertifying;
  round_trips_ = 2;
  return {ClientSend{*cert_, options_.cert_targets.empty() ? everyone() : options_.cert_targets}};
}

void FastPathDriver::add_effect(ValidatorId from, const EffectSign& s) {
  if (phase_ == Phase::kDone || s.effects.tx_digest != digest_) return;
  if (auto done = pool_.add(from, s, *committee_)) {
    finalize_effects(done->first, done->second);
    phase_ = Phase::kDone;
    finish(DriverStatus::kFinalized, done->first.effects.status == ExecStatus::kSuccess
                                         ? std::string("success")
                                         : "failed: " + done->first.effects.failure);
  }
}

std::vector<ClientSend> FastPathDriver::on_cert_reply(ValidatorId from, const Result<CertReply>& r) {
  if (phase_ != Phase::kCertifying) return {};
  if (!r) {
    if (retryable(r.code())) return {};
    cert_errors_[from] = r.code();
    auto [code, count] = most_common(cert_errors_);
    if (count >= committee_->validity()) {
      phase_ = Phase::kDone;
      finish(DriverStatus::kSuperseded, std::string(to_string(code)));
    }
    return {};
  }
  answered_.insert(from);
  if (r->effect) add_effect(from, *r->effect);
  return {};
}

std::vector<ClientSend> FastPathDriver::on_seq_result(ValidatorId from, const SeqResult& r) {
  if (phase_ == Phase::kDone || r.item != digest_) return {};
  bool ours = false;
  for (const auto& s : r.executed) {
    if (s.effects.tx_digest == digest_) {
      ours = true;
      add_effect(from, s);
    }
  }
  if (!ours && r.outcome == SeqOutcome::kSkipped) {
    skipped_.insert(from);
    if (skipped_.size() >= committee_->validity()) {
      phase_ = Phase::kDone;
      finish(DriverStatus::kSuperseded, r.detail);
    }
  }
  return {};
}

std::vector<ClientSend> FastPathDriver::on_effect(ValidatorId from, const EffectSign& s) {
  add_effect(from, s);
  return {};
}

std::vector<ClientSend> FastPathDriver::on_timeout(Tick) {
  std::vector<ValidatorId> silent;
  if (phase_ == Phase::kSigning) {
    for (auto v : options_.targets.empty() ? everyone() : options_.targets) {
      if (!votes_.contains(v) && !errors_.contains(v)) silent.push_back(v);
    }
    if (silent.empty()) return {};
    ++retransmits_;
    return {ClientSend{tx_, silent}};
  }
  if (phase_ == Phase::kCertifying) {
    for (auto v : options_.cert_targets.empty() ? everyone() : options_.cert_targets) {
      if (!answered_.contains(v) && !cert_errors_.contains(v) && !skipped_.contains(v)) silent.push_back(v);
    }
    if (silent.empty()) return {};
    ++retransmits_;
    return {ClientSend{*cert_, silent}};
  }
  return {};
}

UnlockDriver::UnlockDriver(std::shared_ptr<const Committee> committee, ObjectView* view, UnlockRqt rqt,
                           DriverOptions options)
    : Driver(std::move(committee), view, std::move(options)), rqt_(std::move(rqt)), digest_(rqt_.digest()) {}

std::vector<ClientSend> UnlockDriver::start(Tick) {
  round_trips_ = 1;
  return {ClientSend{rqt_, options_.targets.empty() ? everyone() : options_.targets}};
}

std::vector<ClientSend> UnlockDriver::on_unlock_reply(ValidatorId from, const Result<UnlockVote>& r) {
  if (phase_ != Phase::kVoting) return {};
  if (r) {
    if (r->rqt.digest() != digest_) return {};
    votes_[from] = *r;
    errors_.erase(from);
    if (votes_.size() < committee_->quorum()) return {};
    std::vector<UnlockVote> votes;
    for (const auto& [v, vote] : votes_) votes.push_back(vote);
    auto cert = assemble_unlock_cert(votes, *committee_);
    if (!cert) return {};  // some votes did not verify; wait for more
    ucert_ = std::move(cert).value();
    phase_ = Phase::kSequencing;
    round_trips_ = 2;
    return {ClientSend{*ucert_, {}}};
  }
  if (retryable(r.code()) || votes_.contains(from)) return {};
  errors_[from] = r.code();
  std::size_t confirmed = std::count_if(errors_.begin(), errors_.end(),
                                        [](const auto& e) { return e.second == ErrorCode::kAlreadyConfirmed; });
  if (confirmed >= committee_->validity()) {
    phase_ = Phase::kDone;
    finish(DriverStatus::kSupersededByCheckpoint, "already confirmed");
  } else if (errors_.size() > committee_->size() - committee_->quorum()) {
    phase_ = Phase::kDone;
    finish(DriverStatus::kUnauthorized, std::string(to_string(most_common(errors_).first)));
  }
  return {};
}

std::vector<ClientSend> UnlockDriver::on_seq_result(ValidatorId from, const SeqResult& r) {
  if (phase_ == Phase::kDone || r.item != digest_ || results_.contains(from)) return {};
  results_[from] = r;
  Encoder e;
  e.u8(static_cast<std::uint8_t>(r.outcome)).boolean(r.gas.has_value());
  if (r.gas) e.digest(r.gas->effects.digest());
  for (const auto& s : r.executed) e.digest(s.effects.digest());
  auto fingerprint = e.hash("fpl/client/seq-outcome");
  auto& group = result_groups_[fingerprint];
  group.insert(from);
  if (group.size() < committee_->quorum()) return {};

  // Every effect in the agreed outcome has a quorum of signatures.
  std::vector<const EffectSign*> sample;
  if (r.gas) sample.push_back(&*r.gas);
  for (const auto& s : r.executed) sample.push_back(&s);
  for (const EffectSign* s : sample) {
    auto d = s->effects.digest();
    std::vector<EffectSign> votes;
    for (auto v : group) {
      const auto& other = results_.at(v);
      if (other.gas && other.gas->effects.digest() == d) votes.push_back(*other.gas);
      for (const auto& x : other.executed) {
        if (x.effects.digest() == d) votes.push_back(x);
      }
    }
    auto cert = assemble_effect_cert(votes, *committee_);
    if (cert && outputs_match(*s)) finalize_effects(*cert, s->outputs);
  }
  outcome_ = r.outcome;
  phase_ = Phase::kDone;
  switch (r.outcome) {
    case SeqOutcome::kExecuted: finish(DriverStatus::kFinalized, r.detail); break;
    case SeqOutcome::kIgnored: finish(DriverStatus::kSupersededByCheckpoint, r.detail); break;
    default: finish(DriverStatus::kRejected, r.detail); break;
  }
  return {};
}

std::vector<ClientSend> UnlockDriver::on_timeout(Tick) {
  if (phase_ != Phase::kVoting) return {};
  std::vector<ValidatorId> silent;
  for (auto v : options_.targets.empty() ? everyone() : options_.targets) {
    if (!votes_.contains(v) && !errors_.contains(v)) silent.push_back(v);
  }
  if (silent.empty()) return {};
  ++retransmits_;
  return {ClientSend{rqt_, silent}};
}

bool UnlockDriver::replacement_applied() const {
  if (!rqt_.replacement) return false;
  auto d = rqt_.replacement->digest();
  return std::any_of(certs_.begin(), certs_.end(), [&](const EffectCert& c) {
    return c.effects.tx_digest == d && c.effects.status == ExecStatus::kSuccess;
  });
}

std::vector<ObjectKey> UnlockDriver::noop_keys() const {
  std::vector<ObjectKey> out;
  for (const auto& k : rqt_.keys) {
    auto d = noop_digest(digest_, k);
    if (std::any_of(certs_.begin(), certs_.end(), [&](const EffectCert& c) { return c.effects.tx_digest == d; })) {
      out.push_back(k);
    }
  }
  return out;
}

BoundedSpendDriver::BoundedSpendDriver(std::shared_ptr<const Committee> committee, ObjectView* view, Plan plan,
                                       DriverOptions options)
    : Driver(std::move(committee), view, std::move(options)), plan_(std::move(plan)) {}

std::vector<Digest> BoundedSpendDriver::interests() const {
  std::vector<Digest> out;
  if (fast_) out.push_back(fast_->digest());
  if (unlock_) out.push_back(unlock_->digest());
  if (last_debit_) out.push_back(last_debit_->digest());
  return out;
}

std::vector<ClientSend> BoundedSpendDriver::start(Tick now) {
  now_ = now;
  return next_debit(now);
}

std::vector<ClientSend> BoundedSpendDriver::next_debit(Tick now) {
  if (spent_ >= plan_.total) {
    finish(DriverStatus::kFinalized, "spent");
    return {};
  }
  auto counter = view_->latest_key(plan_.counter);
  auto gas = view_->latest_key(plan_.gas);
  if (!counter || !gas) {
    finish(DriverStatus::kRejected, "unknown counter or gas");
    return {};
  }
  Transaction tx;
  tx.inputs = {*gas};
  tx.commutative_inputs = {*counter};
  tx.kind = TxKind::kDebit;
  tx.params.target = plan_.counter;
  tx.params.amount = std::min(plan_.unit, plan_.total - spent_);
  tx.params.salt = (plan_.salt << 20) + static_cast<std::uint64_t>(debits_);
  tx.gas = *gas;
  tx.epoch = view_->epoch;
  tx = sign_transaction(std::move(tx), {plan_.signer}, *view_, now);
  ++debits_;
  last_debit_ = tx;
  fast_ = std::make_unique<FastPathDriver>(committee_, view_, tx, DriverOptions{options_.timeout, {}, {}});
  return fast_->start(now);
}

std::vector<ClientSend> BoundedSpendDriver::consolidate(Tick now) {
  auto counter = view_->latest_key(plan_.counter);
  auto gas = view_->latest_key(plan_.unlock_gas);
  UnlockRqt rqt;
  rqt.keys = {*counter};
  rqt.replacement = *last_debit_;
  rqt.protocol = UnlockProtocol::kConsolidate;
  rqt.gas = *gas;
  rqt.epoch = view_->epoch;
  rqt.salt = (plan_.salt << 20) + static_cast<std::uint64_t>(debits_);
  rqt = sign_unlock(std::move(rqt), {plan_.signer}, *view_, now);
  gas_unlock_ = false;
  unlock_ = std::make_unique<UnlockDriver>(committee_, view_, std::move(rqt), DriverOptions{options_.timeout, {}, {}});
  return unlock_->start(now);
}

std::vector<ClientSend> BoundedSpendDriver::unlock_gas(Tick now) {
  auto gas = view_->latest_key(plan_.gas);
  auto unlock_gas = view_->latest_key(plan_.unlock_gas);
  UnlockRqt rqt;
  rqt.keys = {*gas};
  rqt.protocol = UnlockProtocol::kSingle;
  rqt.gas = *unlock_gas;
  rqt.epoch = view_->epoch;
  rqt.salt = (plan_.salt << 20) + static_cast<std::uint64_t>(debits_);
  rqt = sign_unlock(std::move(rqt), {plan_.signer}, *view_, now);
  gas_unlock_ = true;
  unlock_ = std::make_unique<UnlockDriver>(committee_, view_, std::move(rqt), DriverOptions{options_.timeout, {}, {}});
  return unlock_->start(now);
}

std::vector<ClientSend> BoundedSpendDriver::step(std::vector<ClientSend> sends) {
  auto append = [&](std::vector<ClientSend> more) {
    for (auto& s : more) sends.push_back(std::move(s));
  };
  auto retry = [&](const std::string& why) {
    if (++retries_ > plan_.max_retries) {
      finish(DriverStatus::kRejected, "gave up: " + why);
    } else {
      waiting_retry_ = true;
    }
  };
  if (fast_ && fast_->done()) {
    auto fp = std::move(fast_);
    round_trips_ += fp->round_trips();
    retransmits_ += fp->retransmits();
    auto code = fp->rejection();
    switch (fp->status()) {
      case DriverStatus::kFinalized:
        for (const auto& c : fp->certs()) certs_.push_back(c);
        if (fp->certs().back().effects.status == ExecStatus::kSuccess) spent_ += fp->tx().params.amount;
        append(next_debit(now_));
        break;
      case DriverStatus::kLocked:
      case DriverStatus::kRejected:
        if (code == ErrorCode::kBudgetExhausted) {
          append(consolidate(now_));
        } else if (code == ErrorCode::kConflictingLock || code == ErrorCode::kObjectUnlocked) {
          append(unlock_gas(now_));
        } else if (code == ErrorCode::kStaleVersion || code == ErrorCode::kWrongEpoch) {
          retry(fp->detail());
        } else {
          finish(DriverStatus::kRejected, fp->detail());
        }
        break;
      default:
        // Certified but overtaken: the gas version stays locked behind the
        // certificate until an unlock settles it.
        append(unlock_gas(now_));
        break;
    }
  }
  if (unlock_ && unlock_->done()) {
    auto ud = std::move(unlock_);
    round_trips_ += ud->round_trips();
    retransmits_ += ud->retransmits();
    for (const auto& c : ud->certs()) certs_.push_back(c);
    if (gas_unlock_) {
      retry(ud->detail());
    } else if (ud->status() == DriverStatus::kFinalized) {
      ++consolidations_;
      bool applied = ud->replacement_applied();
      if (applied) spent_ += ud->rqt().replacement->params.amount;
      const Object* counter = view_->latest(plan_.counter);
      if (!applied && counter && counter->balance < std::min(plan_.unit, plan_.total - spent_)) {
        finish(DriverStatus::kFinalized, "counter exhausted");
      } else {
        append(next_debit(now_));
      }
    } else {
      retry(ud->detail());
    }
  }
  return sends;
}

std::vector<ClientSend> BoundedSpendDriver::on_tx_reply(ValidatorId from, const Result<CertSign>& r) {
  return fast_ ? step(fast_->on_tx_reply(from, r)) : std::vector<ClientSend>{};
}

std::vector<ClientSend> BoundedSpendDriver::on_cert_reply(ValidatorId from, const Result<CertReply>& r) {
  return fast_ ? step(fast_->on_cert_reply(from, r)) : std::vector<ClientSend>{};
}

std::vector<ClientSend> BoundedSpendDriver::on_unlock_reply(ValidatorId from, const Result<UnlockVote>& r) {
  return unlock_ ? step(unlock_->on_unlock_reply(from, r)) : std::vector<ClientSend>{};
}

std::vector<ClientSend> BoundedSpendDriver::on_seq_result(ValidatorId from, const SeqResult& r) {
  std::vector<ClientSend> out;
  if (fast_ && r.item == fast_->digest()) return step(fast_->on_seq_result(from, r));
  if (unlock_ && r.item == unlock_->digest()) return step(unlock_->on_seq_result(from, r));
  return out;
}

std::vector<ClientSend> BoundedSpendDriver::on_effect(ValidatorId from, const EffectSign& s) {
  return fast_ ? step(fast_->on_effect(from, s)) : std::vector<ClientSend>{};
}

std::vector<ClientSend> BoundedSpendDriver::on_timeout(Tick now) {
  now_ = now;
  if (waiting_retry_) {
    waiting_retry_ = false;
    return next_debit(now);
  }
  if (fast_) return step(fast_->on_timeout(now));
  if (unlock_) return step(unlock_->on_timeout(now));
  return {};
}

}  // namespace fpl
