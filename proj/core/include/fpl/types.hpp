#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fpl/auth.hpp"
#include "fpl/ids.hpp"
#include "fpl/result.hpp"
#include "fpl/signature.hpp"

namespace fpl {

struct CommitteeParams {
  std::uint32_t n = 4;
  std::uint32_t f = 1;

  friend bool operator==(const CommitteeParams&, const CommitteeParams&) = default;
};

Result<Unit> validate(const CommitteeParams& p);

// Certificate size. n - f, which is 2f+1 on a minimal committee and the
// smallest size for which any two quorums share f+1 members when n > 3f+1.
Result<std::uint32_t> quorum(const CommitteeParams& p);

// Number of replies that must include at least one honest validator.
Result<std::uint32_t> validity_threshold(const CommitteeParams& p);

enum class ObjectKind : std::uint8_t { kReadOnly = 0, kOwned = 1, kShared = 2, kCommutative = 3 };
enum class CrdtKind : std::uint8_t { kNone = 0, kGCounter = 1, kUSet = 2, kPNSet = 3, kBoundedCounter = 4 };

std::string_view to_string(ObjectKind k);
std::string_view to_string(CrdtKind k);

struct Object {
  ObjectKey key;
  ObjectKind kind = ObjectKind::kOwned;
  CrdtKind crdt = CrdtKind::kNone;
  std::optional<AuthCommitment> owner;
  std::int64_t balance = 0;  // max credit for bounded counters
  Bytes payload;

  Digest digest() const;
  friend bool operator==(const Object&, const Object&) = default;
};

void encode(Encoder& e, const Object& o);
Object decode_object(Decoder& d);

struct ObjectRef {
  ObjectKey key;
  Digest state;

  friend bool operator==(const ObjectRef&, const ObjectRef&) = default;
  auto operator<=>(const ObjectRef&) const = default;
};

enum class TxKind : std::uint8_t { kTransfer = 0, kSwap = 1, kNoOp = 2, kMint = 3, kCredit = 4, kDebit = 5 };

std::string_view to_string(TxKind k);
Result<TxKind> tx_kind_from_string(std::string_view s);

struct TxParams {
  AuthCommitment recipient;  // Transfer, Mint
  ObjectId target;           // Credit, Debit
  ObjectId new_object;       // Mint
  std::int64_t amount = 0;   // Credit, Debit, Mint
  std::string item;          // set items for USet / PNSet targets
  std::uint64_t salt = 0;    // distinguishes otherwise identical intents

  friend bool operator==(const TxParams&, const TxParams&) = default;
};

// Proof that one owned object's authenticator is satisfied.
struct InputProof {
  RevealNode reveal;
  AuthPath path;

  friend bool operator==(const InputProof&, const InputProof&) = default;
};

struct AuthEvidence {
  std::vector<std::pair<PublicKey, Signature>> signatures;  // sorted by key
  std::map<ObjectId, InputProof> proofs;

  friend bool operator==(const AuthEvidence&, const AuthEvidence&) = default;
};

void encode(Encoder& e, const AuthEvidence& ev);
AuthEvidence decode_auth_evidence(Decoder& d);

struct Transaction {
  std::vector<ObjectKey> inputs;  // owned and read-only, gas included
  std::vector<ObjectId> shared_inputs;
  std::vector<ObjectKey> commutative_inputs;  // existence-checked, never locked
  TxKind kind = TxKind::kNoOp;
  TxParams params;
  ObjectKey gas;
  Epoch epoch = 0;
  AuthEvidence evidence;

  // Covers every field except evidence, which signs over it.
  Digest digest() const;
  Result<Unit> check_structure() const;
  bool touches_shared() const { return !shared_inputs.empty(); }

  friend bool operator==(const Transaction&, const Transaction&) = default;
};

void encode_body(Encoder& e, const Transaction& tx);
void encode(Encoder& e, const Transaction& tx);
Transaction decode_transaction(Decoder& d);

struct SignerSig {
  ValidatorId signer = 0;
  Signature sig;

  friend bool operator==(const SignerSig&, const SignerSig&) = default;
  auto operator<=>(const SignerSig&) const = default;
};

struct CertSign {
  Digest tx_digest;
  SignerSig vote;
};

struct Certificate {
  Transaction tx;
  std::vector<SignerSig> signers;  // sorted by signer id

  Digest tx_digest() const { return tx.digest(); }
};

// Certificates are the same iff they certify the same transaction; the
// signer sets may differ.
inline bool same_certificate(const Certificate& a, const Certificate& b) {
  return a.tx_digest() == b.tx_digest();
}

void encode(Encoder& e, const Certificate& c);
Certificate decode_certificate(Decoder& d);

enum class ExecStatus : std::uint8_t { kSuccess = 0, kFailed = 1 };

struct CommutativeOp {
  ObjectKey counter;
  TxKind kind = TxKind::kCredit;
  std::int64_t amount = 0;
  std::string item;

  friend bool operator==(const CommutativeOp&, const CommutativeOp&) = default;
};

struct Effects {
  Digest tx_digest;
  ExecStatus status = ExecStatus::kSuccess;
  std::string failure;  // error code name when status is kFailed
  std::vector<ObjectKey> consumed;
  std::vector<ObjectRef> produced;
  std::vector<CommutativeOp> commutative;

  Digest digest() const;
  friend bool operator==(const Effects&, const Effects&) = default;
};

void encode(Encoder& e, const Effects& fx);

struct EffectSign {
  Effects effects;
  SignerSig vote;
  std::vector<Object> outputs;  // not signed; each must match a produced ref
};

// True iff every output object hashes to the matching produced reference.
bool outputs_match(const EffectSign& s);

struct EffectCert {
  Effects effects;
  std::vector<SignerSig> signers;
};

class Committee {
 public:
  static Result<Committee> make(CommitteeParams params,
                                std::shared_ptr<const SignatureScheme> scheme = default_signature_scheme());

  const CommitteeParams& params() const { return params_; }
  std::uint32_t size() const { return params_.n; }
  std::uint32_t quorum() const { return quorum_; }
  std::uint32_t validity() const { return params_.f + 1; }
  const SignatureScheme& scheme() const { return *scheme_; }
  std::shared_ptr<const SignatureScheme> scheme_ptr() const { return scheme_; }
  const PublicKey& key(ValidatorId id) const { return keys_.at(id); }

  SignerSig sign(ValidatorId id, const Digest& message) const;
  bool verify(const SignerSig& s, const Digest& message) const;

  // Distinct committee members, every signature valid, at least a quorum.
  bool verify_quorum(const std::vector<SignerSig>& signers, const Digest& message) const;

 private:
  CommitteeParams params_;
  std::uint32_t quorum_ = 0;
  std::shared_ptr<const SignatureScheme> scheme_;
  std::vector<PublicKey> keys_;
};

bool verify_certificate(const Certificate& cert, const Committee& committee);
bool verify_effect_cert(const EffectCert& cert, const Committee& committee);

// Combines votes over the same message; nullopt below quorum.
std::optional<Certificate> assemble_certificate(const Transaction& tx, const std::vector<CertSign>& votes,
                                                const Committee& committee);
std::optional<EffectCert> assemble_effect_cert(const std::vector<EffectSign>& votes,
                                               const Committee& committee);

// Signature message for a transaction: the signer attests to the digest.
Digest evidence_message(const Transaction& tx);

// Owner commitment for a plain single-key account.
AuthCommitment single_key_owner(const PublicKey& pk);
AuthTerm single_key_term(const PublicKey& pk);

// Adds a signature over `message` and one input proof per (object, term)
// pair, proving each term with the given signer set.
struct EvidenceBuilder {
  Digest message;
  std::shared_ptr<const SignatureScheme> scheme = default_signature_scheme();
  AuthEvidence evidence;

  EvidenceBuilder& sign_as(const PublicKey& pk);
  // Finds a path under (signers, included_oids, local_time) and stores the
  // minimal reveal; false when the term cannot be satisfied.
  bool prove(const ObjectId& id, const AuthTerm& term, const AuthContext& ctx);
  AuthContext context(std::set<ObjectId> included, Tick local_time) const;
};

// Checks `evidence` against `owner` for one object: signatures over `message`
// by their claimed keys define the signer set.
Result<bool> check_owner_evidence(const AuthCommitment& owner, const ObjectId& id, const AuthEvidence& evidence,
                                  const Digest& message, const std::set<ObjectId>& included, Tick local_time,
                                  const SignatureScheme& scheme, const EventOracle& oracle);

}  // namespace fpl
