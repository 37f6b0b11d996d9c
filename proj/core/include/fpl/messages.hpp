#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "fpl/types.hpp"

namespace fpl {

// Single: Unlocked is recorded for every listed key, a no-commit
// certificate replaces the locked version with a NoOp.
// Multi: Unlocked is recorded only when no certificate was found, a
// no-commit certificate executes the replacement transaction.
// Consolidate: bounded-counter consolidation; carried certificates and the
// replacement debit both execute, then the counter moves to a new version.
enum class UnlockProtocol : std::uint8_t { kSingle = 0, kMulti = 1, kConsolidate = 2 };

std::string_view to_string(UnlockProtocol p);

struct UnlockRqt {
  std::vector<ObjectKey> keys;  // sorted, duplicate-free
  std::optional<Transaction> replacement;
  UnlockProtocol protocol = UnlockProtocol::kSingle;
  ObjectKey gas;
  Epoch epoch = 0;
  std::uint64_t salt = 0;
  AuthEvidence evidence;  // signs digest()

  Digest digest() const;
  Result<Unit> check_structure() const;
};

void encode_body(Encoder& e, const UnlockRqt& rqt);
void encode(Encoder& e, const UnlockRqt& rqt);

// What a voter signs: the request and the exact set of certificates it carries.
Digest unlock_vote_message(const Digest& rqt_digest, const std::vector<Digest>& carried);

struct UnlockVote {
  UnlockRqt rqt;
  std::vector<Certificate> certs;  // sorted by tx digest
  SignerSig vote;

  std::vector<Digest> carried() const;
};

struct UnlockVoteSig {
  SignerSig vote;
  std::vector<Digest> carried;  // sorted tx digests
};

struct UnlockCert {
  UnlockRqt rqt;
  std::vector<Certificate> certs;  // union over votes, sorted by tx digest, unique
  std::vector<UnlockVoteSig> votes;

  bool no_commit() const { return certs.empty(); }
};

void encode(Encoder& e, const UnlockCert& c);

// Combines votes over byte-identical requests. Carried certificates are
// unioned; each must verify independently.
Result<UnlockCert> assemble_unlock_cert(const std::vector<UnlockVote>& votes, const Committee& committee);

// Quorum of distinct valid votes, every carried certificate valid, and the
// certificate set equal to the union of what the votes attest to.
Result<Unit> verify_unlock_cert(const UnlockCert& ucert, const Committee& committee);

struct EndOfEpoch {
  ValidatorId validator = 0;
  Epoch epoch = 0;
  SignerSig sig;

  Digest message() const;
};

using SequencedPayload = std::variant<UnlockCert, Certificate, EndOfEpoch>;

enum class SeqKind : std::uint8_t { kUnlockCert = 0, kCheckpointCert = 1, kEndOfEpoch = 2 };

SeqKind seq_kind(const SequencedPayload& p);
std::string_view to_string(SeqKind k);

// Dedup key: request digest for unlock certificates, transaction digest for
// checkpoint certificates, (validator, epoch) for end-of-epoch.
Digest content_digest(const SequencedPayload& p);

struct SequencedItem {
  std::uint64_t seq = 0;
  SequencedPayload payload;

  SeqKind kind() const { return seq_kind(payload); }
  Digest digest() const { return content_digest(payload); }
};

// Synthetic transaction identities for executions that no client signed.
Digest noop_digest(const Digest& rqt_digest, const ObjectKey& key);
Digest unlock_gas_digest(const Digest& rqt_digest);
Digest consolidation_digest(const Digest& rqt_digest);

}  // namespace fpl
