#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "fpl/messages.hpp"
#include "fpl/validator.hpp"

namespace fpl {

// Finalized versions of every object a client has heard of, plus the
// authenticator terms behind each owner commitment.
class ObjectView {
 public:
  void add(const Object& o);
  // Applies finalized effects; outputs carry the new object contents.
  void apply(const Effects& fx, const std::vector<Object>& outputs);

  const Object* latest(const ObjectId& id) const;
  std::optional<ObjectKey> latest_key(const ObjectId& id) const;
  // The exact version if seen, else the latest version of the object.
  const Object* at(const ObjectKey& k) const;

  void add_term(const AuthTerm& term, std::set<std::string> holders);
  const AuthTerm* term(const AuthCommitment& c) const;
  // Users whose keys a plain signer of this commitment would need.
  const std::set<std::string>* holders(const AuthCommitment& c) const;

  Epoch epoch = 0;

 private:
  std::map<ObjectId, Object> latest_;
  std::map<ObjectKey, Object> seen_;
  std::map<Digest, std::pair<AuthTerm, std::set<std::string>>> terms_;
};

// Signs `tx` as `signers` and attaches one proof per owned input the view
// knows a term for. Inputs whose term cannot be satisfied get no proof.
Transaction sign_transaction(Transaction tx, const std::vector<PublicKey>& signers, const ObjectView& view,
                             Tick local_time = 0);

// Signs an unlock request: proofs for the gas and every listed owned key.
UnlockRqt sign_unlock(UnlockRqt rqt, const std::vector<PublicKey>& signers, const ObjectView& view,
                      Tick local_time = 0);

// Rebuilds `tx` over the versions the unlock produced: every input the
// unlock consumed is replaced by the produced key of the same object.
// Evidence is cleared; the caller signs the new digest.
Transaction retry_after_unlock(const Transaction& tx, const std::vector<EffectCert>& unlock);

enum class DriverStatus : std::uint8_t {
  kPending = 0,
  kFinalized = 1,
  kLocked = 2,
  kRejected = 3,
  kSuperseded = 4,
  kUnauthorized = 5,
  kSupersededByCheckpoint = 6,
};

std::string_view to_string(DriverStatus s);

using ClientPayload = std::variant<Transaction, Certificate, UnlockRqt, UnlockCert>;

// UnlockCert goes to the sequencer; everything else to the listed validators.
struct ClientSend {
  ClientPayload payload;
  std::vector<ValidatorId> to;
};

struct DriverOptions {
  Tick timeout = 50;                 // resend to silent validators after this many ticks
  std::vector<ValidatorId> targets;  // first broadcast only; empty means everyone
  std::vector<ValidatorId> cert_targets;  // certificate recipients; empty means everyone
};

class Driver {
 public:
  virtual ~Driver() = default;

  virtual std::vector<ClientSend> start(Tick now) = 0;
  virtual std::vector<ClientSend> on_tx_reply(ValidatorId, const Result<CertSign>&) { return {}; }
  virtual std::vector<ClientSend> on_cert_reply(ValidatorId, const Result<CertReply>&) { return {}; }
  virtual std::vector<ClientSend> on_unlock_reply(ValidatorId, const Result<UnlockVote>&) { return {}; }
  // A sequenced result whose item this driver submitted.
  virtual std::vector<ClientSend> on_seq_result(ValidatorId, const SeqResult&) { return {}; }
  // An effect signature for a transaction this driver owns, produced while
  // executing some other sequenced item.
  virtual std::vector<ClientSend> on_effect(ValidatorId, const EffectSign&) { return {}; }
  virtual std::vector<ClientSend> on_timeout(Tick now) = 0;

  DriverStatus status() const { return status_; }
  bool done() const { return status_ != DriverStatus::kPending; }
  const std::string& detail() const { return detail_; }
  int round_trips() const { return round_trips_; }
  int retransmits() const { return retransmits_; }
  const std::vector<EffectCert>& certs() const { return certs_; }
  Tick timeout() const { return options_.timeout; }

 protected:
  Driver(std::shared_ptr<const Committee> committee, ObjectView* view, DriverOptions options)
      : committee_(std::move(committee)), view_(view), options_(std::move(options)) {}

  void finish(DriverStatus s, std::string detail = {}) {
    if (status_ != DriverStatus::kPending) return;
    status_ = s;
    detail_ = std::move(detail);
  }
  std::vector<ValidatorId> everyone() const;
  // Records a finalized effects certificate and updates the view.
  void finalize_effects(const EffectCert& cert, const std::vector<Object>& outputs);

  std::shared_ptr<const Committee> committee_;
  ObjectView* view_;
  DriverOptions options_;
  DriverStatus status_ = DriverStatus::kPending;
  std::string detail_;
  int round_trips_ = 0;
  int retransmits_ = 0;
  std::vector<EffectCert> certs_;
};

// Collects effect signatures per effects digest until one reaches quorum.
class EffectPool {
 public:
  // Returns the certificate and outputs once `s` completes a quorum.
  std::optional<std::pair<EffectCert, std::vector<Object>>> add(ValidatorId from, const EffectSign& s,
                                                                const Committee& committee);

 private:
  std::map<Digest, std::map<ValidatorId, EffectSign>> by_effects_;
};

// Fast path: tx -> certificate -> effects certificate. Shared-object
// certificates finish through the checkpoint stream.
class FastPathDriver : public Driver {
 public:
  FastPathDriver(std::shared_ptr<const Committee> committee, ObjectView* view, Transaction tx,
                 DriverOptions options = {});

  std::vector<ClientSend> start(Tick now) override;
  std::vector<ClientSend> on_tx_reply(ValidatorId from, const Result<CertSign>& r) override;
  std::vector<ClientSend> on_cert_reply(ValidatorId from, const Result<CertReply>& r) override;
  std::vector<ClientSend> on_seq_result(ValidatorId from, const SeqResult& r) override;
  std::vector<ClientSend> on_effect(ValidatorId from, const EffectSign& s) override;
  std::vector<ClientSend> on_timeout(Tick now) override;

  const Transaction& tx() const { return tx_; }
  const Digest& digest() const { return digest_; }
  const std::optional<Certificate>& certificate() const { return cert_; }
  // Most common rejection among validators, when rejected or locked.
  std::optional<ErrorCode> rejection() const { return rejection_; }

 private:
  enum class Phase : std::uint8_t { kSigning, kCertifying, kDone };
  std::vector<ClientSend> certify();
  bool targets_exhausted() const;
  void add_effect(ValidatorId from, const EffectSign& s);

  Transaction tx_;
  Digest digest_;
  Phase phase_ = Phase::kSigning;
  std::map<ValidatorId, CertSign> votes_;
  std::map<ValidatorId, ErrorCode> errors_;
  std::set<ValidatorId> answered_;  // certificate phase
  std::set<ValidatorId> skipped_;
  std::map<ValidatorId, ErrorCode> cert_errors_;
  std::optional<Certificate> cert_;
  std::optional<ErrorCode> rejection_;
  EffectPool pool_;
};

// FastUnlock for one request, any protocol.
class UnlockDriver : public Driver {
 public:
  UnlockDriver(std::shared_ptr<const Committee> committee, ObjectView* view, UnlockRqt rqt, DriverOptions options = {});

  std::vector<ClientSend> start(Tick now) override;
  std::vector<ClientSend> on_unlock_reply(ValidatorId from, const Result<UnlockVote>& r) override;
  std::vector<ClientSend> on_seq_result(ValidatorId from, const SeqResult& r) override;
  std::vector<ClientSend> on_timeout(Tick now) override;

  const UnlockRqt& rqt() const { return rqt_; }
  const Digest& digest() const { return digest_; }
  const std::optional<UnlockCert>& unlock_cert() const { return ucert_; }
  // Quorum-agreed sequenced outcome, once finished through the sequencer.
  std::optional<SeqOutcome> outcome() const { return outcome_; }
  // True iff the replacement transaction was finalized with success.
  bool replacement_applied() const;
  // Keys that finished as NoOp replacements.
  std::vector<ObjectKey> noop_keys() const;

 private:
  enum class Phase : std::uint8_t { kVoting, kSequencing, kDone };

  UnlockRqt rqt_;
  Digest digest_;
  Phase phase_ = Phase::kVoting;
  std::map<ValidatorId, UnlockVote> votes_;
  std::map<ValidatorId, ErrorCode> errors_;
  std::optional<UnlockCert> ucert_;
  std::map<Digest, std::set<ValidatorId>> result_groups_;  // by sequenced-outcome fingerprint
  std::map<ValidatorId, SeqResult> results_;
  std::optional<SeqOutcome> outcome_;
};

// Spends `total` from a bounded counter in `unit` debits, consolidating the
// counter through FastUnlock whenever the fast path runs out of budget.
class BoundedSpendDriver : public Driver {
 public:
  struct Plan {
    ObjectId counter;
    ObjectId gas;         // pays the debits
    ObjectId unlock_gas;  // pays consolidation requests
    PublicKey signer;
    std::int64_t total = 0;
    std::int64_t unit = 1;
    std::uint64_t salt = 0;
    int max_retries = 50;
  };

  BoundedSpendDriver(std::shared_ptr<const Committee> committee, ObjectView* view, Plan plan,
                     DriverOptions options = {});

  std::vector<ClientSend> start(Tick now) override;
  std::vector<ClientSend> on_tx_reply(ValidatorId from, const Result<CertSign>& r) override;
  std::vector<ClientSend> on_cert_reply(ValidatorId from, const Result<CertReply>& r) override;
  std::vector<ClientSend> on_unlock_reply(ValidatorId from, const Result<UnlockVote>& r) override;
  std::vector<ClientSend> on_seq_result(ValidatorId from, const SeqResult& r) override;
  std::vector<ClientSend> on_effect(ValidatorId from, const EffectSign& s) override;
  std::vector<ClientSend> on_timeout(Tick now) override;

  std::int64_t spent() const { return spent_; }
  int consolidations() const { return consolidations_; }
  int debits() const { return debits_; }
  // Digests of every request this driver has in flight, for reply routing.
  std::vector<Digest> interests() const;

 private:
  std::vector<ClientSend> next_debit(Tick now);
  std::vector<ClientSend> consolidate(Tick now);
  std::vector<ClientSend> unlock_gas(Tick now);
  std::vector<ClientSend> step(std::vector<ClientSend> sends);

  Plan plan_;
  Tick now_ = 0;
  std::int64_t spent_ = 0;
  int consolidations_ = 0;
  int debits_ = 0;
  int retries_ = 0;
  bool waiting_retry_ = false;
  bool gas_unlock_ = false;
  std::optional<Transaction> last_debit_;
  std::unique_ptr<FastPathDriver> fast_;
  std::unique_ptr<UnlockDriver> unlock_;
};

}  // namespace fpl
