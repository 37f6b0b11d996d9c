#pragma once

// In-process committee for unit and acceptance tests: validators are called
// directly, with no network in between.

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fpl/client.hpp"
#include "fpl/sequencer.hpp"
#include "fpl/validator.hpp"

namespace fpl::test {

inline PublicKey user(const std::string& name) { return PublicKey::for_user(name); }
inline ObjectId oid(const std::string& label) { return ObjectId::from_label(label); }

class Net {
 public:
  explicit Net(CommitteeParams params = {4, 1}, std::map<ValidatorId, Behavior> behaviors = {}, Tick delta = 100)
      : committee_(std::make_shared<const Committee>(Committee::make(params).value())), sequencer_(committee_) {
    for (ValidatorId v = 0; v < params.n; ++v) {
      ValidatorOptions o;
      o.delta = delta;
      o.behavior = behaviors.contains(v) ? behaviors.at(v) : Behavior::kHonest;
      validators_.push_back(std::make_unique<Validator>(v, committee_, o));
    }
  }

  const std::shared_ptr<const Committee>& committee() const { return committee_; }
  Validator& v(ValidatorId id) { return *validators_.at(id); }
  std::uint32_t n() const { return committee_->size(); }
  ObjectView& view() { return view_; }

  Object owned(const std::string& label, const std::string& owner, std::int64_t balance = 10) {
    Object o;
    o.key = {oid(label), 0};
    o.kind = ObjectKind::kOwned;
    o.owner = single_key_owner(user(owner));
    o.balance = balance;
    view_.add_term(single_key_term(user(owner)), {owner});
    add(o);
    return o;
  }

  Object counter(const std::string& label, std::int64_t max_credit) {
    Object o;
    o.key = {oid(label), 0};
    o.kind = ObjectKind::kCommutative;
    o.crdt = CrdtKind::kBoundedCounter;
    o.balance = max_credit;
    add(o);
    return o;
  }

  void add(const Object& o) {
    for (auto& val : validators_) val->add_genesis(o);
    view_.add(o);
  }

  void set_time(Tick t) {
    for (auto& val : validators_) val->set_local_time(t);
  }

  Transaction transfer(const std::vector<ObjectKey>& inputs, const ObjectKey& gas, const std::string& to,
                       const std::string& signer, std::uint64_t salt = 1) {
    Transaction tx;
    tx.kind = TxKind::kTransfer;
    tx.gas = gas;
    tx.inputs.push_back(gas);
    for (const auto& k : inputs) tx.inputs.push_back(k);
    tx.params.recipient = single_key_owner(user(to));
    tx.params.salt = salt;
    return sign_transaction(std::move(tx), {user(signer)}, view_);
  }

  // Votes from the listed validators; rejections are skipped.
  std::vector<CertSign> votes(const Transaction& tx, const std::vector<ValidatorId>& from) {
    std::vector<CertSign> out;
    for (auto id : from) {
      auto r = v(id).process_tx(tx);
      if (r) out.push_back(*r);
    }
    return out;
  }

  std::optional<Certificate> certify(const Transaction& tx, const std::vector<ValidatorId>& from) {
    return assemble_certificate(tx, votes(tx, from), *committee_);
  }

  std::vector<ValidatorId> all() const {
    std::vector<ValidatorId> ids(committee_->size());
    for (ValidatorId i = 0; i < ids.size(); ++i) ids[i] = i;
    return ids;
  }

  UnlockRqt unlock(std::vector<ObjectKey> keys, const ObjectKey& gas, const std::vector<std::string>& signers,
                   UnlockProtocol protocol = UnlockProtocol::kSingle, std::optional<Transaction> replacement = {},
                   std::uint64_t salt = 1) {
    std::sort(keys.begin(), keys.end());
    UnlockRqt rqt;
    rqt.keys = std::move(keys);
    rqt.gas = gas;
    rqt.protocol = protocol;
    rqt.replacement = std::move(replacement);
    rqt.salt = salt;
    std::vector<PublicKey> pks;
    for (const auto& s : signers) pks.push_back(user(s));
    return sign_unlock(std::move(rqt), pks, view_);
  }

  std::vector<UnlockVote> unlock_votes(const UnlockRqt& rqt, const std::vector<ValidatorId>& from) {
    std::vector<UnlockVote> out;
    for (auto id : from) {
      auto r = v(id).process_unlock_rqt(rqt);
      if (r) out.push_back(*r);
    }
    return out;
  }

  // Orders the payload and delivers it to every validator.
  std::vector<SeqResult> sequence(SequencedPayload p) {
    auto r = sequencer_.submit(std::move(p));
    std::vector<SeqResult> out;
    if (!r || !*r) return out;
    for (auto& val : validators_) {
      val->deliver(sequencer_.at(**r));
      for (auto& res : val->take_sequenced_results()) out.push_back(std::move(res));
    }
    return out;
  }

  Sequencer& sequencer() { return sequencer_; }

 private:
  std::shared_ptr<const Committee> committee_;
  std::vector<std::unique_ptr<Validator>> validators_;
  ObjectView view_;
  Sequencer sequencer_;
};

}  // namespace fpl::test
