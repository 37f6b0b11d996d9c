#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fpl/commutative.hpp"
#include "fpl/execution.hpp"
#include "fpl/messages.hpp"
#include "fpl/storage.hpp"

namespace fpl {

// Deviations a simulated Byzantine validator may take. Honest is the
// protocol; the others are adversaries used by tests and scenarios.
enum class Behavior : std::uint8_t {
  kHonest = 0,
  kEquivocator = 1,     // signs any well-formed tx, votes c = {} for any unlock request
  kVoteWithholder = 2,  // never answers unlock requests
  kStaleReplier = 3,    // ignores fast-path certificates, votes c = {} (hides what it saw)
  kInfiniteBudget = 4,  // signs bounded-counter debits without charging a budget
};

std::string_view to_string(Behavior b);
Result<Behavior> behavior_from_string(std::string_view s);

struct ValidatorOptions {
  Tick delta = 100;  // Auto-Unlock delay
  Behavior behavior = Behavior::kHonest;
  EventOracle event_oracle;
  std::optional<std::filesystem::path> wal_path;
};

// Observable decisions, drained by the harness into the trace.
struct ValidatorEvent {
  std::string kind;
  Digest digest;
  std::vector<ObjectKey> keys;
  std::vector<ObjectRef> produced;
  Digest effects;
  std::string detail;
  std::int64_t value = 0;
  std::uint64_t seq = 0;
};

struct CertReply {
  std::optional<EffectSign> effect;  // set when executed (now or before)
  std::string deferred_reason;       // set when not executed on the fast path
};

enum class SeqOutcome : std::uint8_t { kExecuted = 0, kIgnored = 1, kSkipped = 2, kRecorded = 3 };
std::string_view to_string(SeqOutcome o);

// Result of one sequenced item at one validator.
struct SeqResult {
  std::uint64_t seq = 0;
  SeqKind kind = SeqKind::kCheckpointCert;
  Digest item;
  SeqOutcome outcome = SeqOutcome::kSkipped;
  std::optional<EffectSign> gas;        // unlock gas consumption
  std::vector<EffectSign> executed;     // every execution this item caused or confirmed
  std::string detail;
};

class Validator {
 public:
  Validator(ValidatorId id, std::shared_ptr<const Committee> committee, ValidatorOptions options = {});

  ValidatorId id() const { return id_; }
  Behavior behavior() const { return options_.behavior; }
  const Committee& committee() const { return *committee_; }

  void add_genesis(const Object& object);

  // Local clock; simulation tick plus this validator's skew.
  void set_local_time(Tick t) { now_ = t; }
  Tick local_time() const { return now_; }

  // Fast path: lock owned inputs and sign.
  Result<CertSign> process_tx(const Transaction& tx);

  // Fast path: execute a certificate unless an unlock or shared input
  // forces it through consensus. Every certificate is forwarded to the
  // checkpoint outbox once.
  Result<CertReply> process_cert(const Certificate& cert);

  // Unlock request handling for all three protocols.
  Result<UnlockVote> process_unlock_rqt(const UnlockRqt& rqt);

  // True iff every listed key has been locked for at least delta ticks.
  bool check_auto_unlock(const UnlockRqt& rqt, Tick now, Tick delta) const;

  // Sequenced stream entry point. Items are handled in order; an item whose
  // input versions have not reached this replica yet is parked, and later
  // items touching the same keys queue behind it.
  void deliver(const SequencedItem& item);

  // Direct handlers; assume every referenced version is present.
  SeqResult process_unlock_cert(const UnlockCert& ucert, std::uint64_t seq = 0);
  SeqResult process_checkpoint_cert(const Certificate& cert, std::uint64_t seq = 0);

  // Epoch change: stop signing, hand back every executed certificate that
  // still needs sequencing.
  std::vector<Certificate> begin_epoch_change();
  // The end-of-epoch message, once every locally executed certificate of
  // this epoch has been sequenced. Emitted at most once per epoch.
  std::optional<EndOfEpoch> end_of_epoch();
  bool epoch_changing() const { return paused_; }
  Epoch epoch() const { return store_.tables().epoch; }

  // Outboxes.
  std::vector<Certificate> take_checkpoint_outbox();
  std::vector<SeqResult> take_sequenced_results();
  std::vector<ValidatorEvent> take_events();

  // Inspection.
  const Tables& tables() const { return store_.tables(); }
  const Object* live_object(const ObjectId& id) const { return store_.tables().live_object(id); }
  UnlockState unlock_state(const ObjectKey& k) const { return store_.tables().unlock_state(k); }
  const BoundedCounter* counter(const ObjectId& id) const;
  const GCounter* gcounter(const ObjectId& id, bool checkpointed) const;
  const USet* uset(const ObjectId& id, bool checkpointed) const;
  const PNSet* pnset(const ObjectId& id, bool checkpointed) const;
  std::size_t parked() const { return parked_.size(); }
  Digest snapshot_digest() const { return store_.snapshot_digest(); }

 private:
  struct FastRecord {
    std::vector<Object> pre_images;  // mutable inputs as they were before execution
    std::vector<ObjectKey> outputs;
  };

  struct CrdtState {
    CrdtKind kind = CrdtKind::kNone;
    std::set<Digest> applied;
    std::set<Digest> applied_checkpoint;
    GCounter g, g_cp;
    USet u, u_cp;
    PNSet pn, pn_cp;
    std::optional<BoundedCounter> bounded;  // current version only
    std::map<Version, std::vector<CounterOp>> sequenced_ops;
  };

  const Tables& t() const { return store_.tables(); }
  void emit(ValidatorEvent ev);
  bool honest() const { return options_.behavior == Behavior::kHonest; }

  Result<Unit> check_tx(const Transaction& tx, bool for_signing) const;
  Result<Unit> check_evidence(const Transaction& tx) const;
  std::map<ObjectId, Object> gather(const Transaction& tx, bool at_live_versions) const;
  std::vector<ObjectKey> owned_inputs(const Transaction& tx) const;
  std::vector<ObjectKey> required_keys(const SequencedItem& item) const;
  bool present(const ObjectKey& k) const { return t().objects.contains(k); }
  bool is_live(const ObjectKey& k) const;

  // Runs tx against live inputs, persists, records CRDT ops. fast marks a
  // fast-path execution eligible for undo.
  Result<Effects> run(const Transaction& tx, bool fast);
  Effects run_failed(const Transaction& tx, const Error& why);
  Effects run_noop(const Digest& digest, const std::vector<ObjectKey>& keys);
  void persist_execution(const Digest& tx, const ExecOutput& out, const std::vector<Object>& pre, bool fast);
  void apply_crdt(const Effects& fx, bool checkpointed, const std::optional<Certificate>& cert);
  void undo(const Digest& tx);
  EffectSign sign_effects(const Effects& fx) const;
  void confirm(const std::vector<ObjectKey>& keys);
  bool any_confirmed(const std::vector<ObjectKey>& keys) const;
  void forward_checkpoint(const Certificate& cert);
  void note_sequenced(const Digest& tx);

  SeqResult handle(const SequencedItem& item);
  SeqResult handle_end_of_epoch(const EndOfEpoch& eoe, std::uint64_t seq);
  void consume_unlock_gas(const UnlockRqt& rqt, SeqResult& res);
  bool execute_carried(const Certificate& cert, SeqResult& res);
  void consolidate_counter(const UnlockCert& ucert, SeqResult& res);
  void drain_parked();

  ValidatorId id_;
  std::shared_ptr<const Committee> committee_;
  ValidatorOptions options_;
  TableStore store_;
  Tick now_ = 0;

  std::map<Digest, FastRecord> fast_;
  std::map<ObjectId, CrdtState> crdts_;
  std::set<Digest> forwarded_;
  std::map<Digest, Certificate> executed_certs_;  // fast-path executions this epoch
  std::set<Digest> sequenced_txs_;
  std::deque<SequencedItem> parked_;

  bool paused_ = false;
  bool eoe_sent_ = false;
  std::map<Epoch, std::set<ValidatorId>> eoe_votes_;

  std::vector<Certificate> checkpoint_outbox_;
  std::vector<SeqResult> results_;
  std::vector<ValidatorEvent> events_;
};

}  // namespace fpl
