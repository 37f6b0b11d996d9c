#include "fpl/messages.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace fpl {

std::string_view to_string(UnlockProtocol p) {
  switch (p) {
    case UnlockProtocol::kSingle: return "single";
    case UnlockProtocol::kMulti: return "multi";
    case UnlockProtocol::kConsolidate: return "consolidate";
  }
  return "?";
}

void encode_body(Encoder& e, const UnlockRqt& rqt) {
  e.u32(static_cast<std::uint32_t>(rqt.keys.size()));
  for (const auto& k : rqt.keys) encode(e, k);
  e.boolean(rqt.replacement.has_value());
  if (rqt.replacement) encode(e, *rqt.replacement);
  e.u8(static_cast<std::uint8_t>(rqt.protocol));
  encode(e, rqt.gas);
  e.u64(rqt.epoch).u64(rqt.salt);
}

void encode(Encoder& e, const UnlockRqt& rqt) {
  encode_body(e, rqt);
  encode(e, rqt.evidence);
}

Digest UnlockRqt::digest() const {
  Encoder e;
  encode_body(e, *this);
  return e.hash("fpl/unlock-rqt");
}

Result<Unit> UnlockRqt::check_structure() const {
  if (keys.empty()) return Error{ErrorCode::kMalformed, "unlock request lists no keys"};
  std::set<ObjectId> ids;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (i > 0 && !(keys[i - 1] < keys[i])) return Error{ErrorCode::kMalformed, "keys must be sorted"};
    if (!ids.insert(keys[i].id).second) return Error{ErrorCode::kMalformed, "two versions of one object"};
  }
  if (ids.contains(gas.id)) return Error{ErrorCode::kMalformed, "unlock gas must be a fresh object"};
  if (protocol == UnlockProtocol::kSingle && replacement) {
    return Error{ErrorCode::kMalformed, "single-object unlock takes no replacement"};
  }
  if (protocol == UnlockProtocol::kSingle && keys.size() != 1) {
    return Error{ErrorCode::kMalformed, "single-object unlock lists one key"};
  }
  if (protocol == UnlockProtocol::kConsolidate && !replacement) {
    return Error{ErrorCode::kMalformed, "consolidation carries the blocked debit"};
  }
  if (replacement) {
    auto ok = replacement->check_structure();
    if (!ok) return ok;
    if (replacement->epoch != epoch) return Error{ErrorCode::kMalformed, "replacement epoch mismatch"};
    if (replacement->gas.id == gas.id) return Error{ErrorCode::kMalformed, "replacement reuses the unlock gas"};
  }
  return Unit{};
}

Digest unlock_vote_message(const Digest& rqt_digest, const std::vector<Digest>& carried) {
  Encoder e;
  e.digest(rqt_digest).u32(static_cast<std::uint32_t>(carried.size()));
  for (const auto& d : carried) e.digest(d);
  return e.hash("fpl/unlock-vote");
}

std::vector<Digest> UnlockVote::carried() const {
  std::vector<Digest> out;
  out.reserve(certs.size());
  for (const auto& c : certs) out.push_back(c.tx_digest());
  std::sort(out.begin(), out.end());
  return out;
}

void encode(Encoder& e, const UnlockCert& c) {
  encode(e, c.rqt);
  e.u32(static_cast<std::uint32_t>(c.certs.size()));
  for (const auto& cert : c.certs) encode(e, cert);
  e.u32(static_cast<std::uint32_t>(c.votes.size()));
  for (const auto& v : c.votes) {
    e.u32(v.vote.signer).digest(v.vote.sig.value).u32(static_cast<std::uint32_t>(v.carried.size()));
    for (const auto& d : v.carried) e.digest(d);
  }
}

Result<UnlockCert> assemble_unlock_cert(const std::vector<UnlockVote>& votes, const Committee& committee) {
  if (votes.empty()) return Error{ErrorCode::kIncomplete, "no votes"};
  auto rqt_digest = votes.front().rqt.digest();
  std::map<ValidatorId, UnlockVoteSig> by_signer;
  std::map<Digest, Certificate> union_certs;
  for (const auto& v : votes) {
    if (v.rqt.digest() != rqt_digest) return Error{ErrorCode::kMixedRequests, "votes over different requests"};
    auto carried = v.carried();
    if (!committee.verify(v.vote, unlock_vote_message(rqt_digest, carried))) continue;
    bool certs_ok = std::all_of(v.certs.begin(), v.certs.end(),
                                [&](const Certificate& c) { return verify_certificate(c, committee); });
    if (!certs_ok) continue;
    if (!by_signer.emplace(v.vote.signer, UnlockVoteSig{v.vote, carried}).second) continue;
    for (const auto& c : v.certs) union_certs.emplace(c.tx_digest(), c);
  }
  if (by_signer.size() < committee.quorum()) {
    return Error{ErrorCode::kIncomplete, std::to_string(by_signer.size()) + " valid votes"};
  }
  UnlockCert out;
  out.rqt = votes.front().rqt;
  for (auto& [d, c] : union_certs) out.certs.push_back(std::move(c));
  for (auto& [id, v] : by_signer) out.votes.push_back(std::move(v));
  // Only certificates attested by the chosen voters are kept; with every
  // valid vote chosen this is the full union.
  return out;
}

Result<Unit> verify_unlock_cert(const UnlockCert& ucert, const Committee& committee) {
  auto rqt_digest = ucert.rqt.digest();
  std::set<ValidatorId> signers;
  std::set<Digest> attested;
  for (const auto& v : ucert.votes) {
    if (!std::is_sorted(v.carried.begin(), v.carried.end())) {
      return Error{ErrorCode::kInvalidUnlockCert, "carried digests unsorted"};
    }
    if (!committee.verify(v.vote, unlock_vote_message(rqt_digest, v.carried))) {
      return Error{ErrorCode::kInvalidUnlockCert, "bad vote signature"};
    }
    if (!signers.insert(v.vote.signer).second) return Error{ErrorCode::kInvalidUnlockCert, "duplicate voter"};
    attested.insert(v.carried.begin(), v.carried.end());
  }
  if (signers.size() < committee.quorum()) return Error{ErrorCode::kInvalidUnlockCert, "below quorum"};
  std::set<Digest> carried;
  for (std::size_t i = 0; i < ucert.certs.size(); ++i) {
    const auto& c = ucert.certs[i];
    auto d = c.tx_digest();
    if (i > 0 && !(ucert.certs[i - 1].tx_digest() < d)) {
      return Error{ErrorCode::kInvalidUnlockCert, "certificates unsorted or duplicated"};
    }
    if (!verify_certificate(c, committee)) return Error{ErrorCode::kInvalidUnlockCert, "invalid carried certificate"};
    carried.insert(d);
  }
  if (carried != attested) return Error{ErrorCode::kInvalidUnlockCert, "certificate set differs from votes"};
  return Unit{};
}

Digest EndOfEpoch::message() const {
  Encoder e;
  e.u32(validator).u64(epoch);
  return e.hash("fpl/end-of-epoch");
}

SeqKind seq_kind(const SequencedPayload& p) {
  switch (p.index()) {
    case 0: return SeqKind::kUnlockCert;
    case 1: return SeqKind::kCheckpointCert;
    default: return SeqKind::kEndOfEpoch;
  }
}

std::string_view to_string(SeqKind k) {
  switch (k) {
    case SeqKind::kUnlockCert: return "UnlockCert";
    case SeqKind::kCheckpointCert: return "CheckpointCert";
    case SeqKind::kEndOfEpoch: return "EndOfEpoch";
  }
  return "?";
}

Digest content_digest(const SequencedPayload& p) {
  if (const auto* u = std::get_if<UnlockCert>(&p)) return u->rqt.digest();
  if (const auto* c = std::get_if<Certificate>(&p)) return c->tx_digest();
  return std::get<EndOfEpoch>(p).message();
}

Digest noop_digest(const Digest& rqt_digest, const ObjectKey& key) {
  Encoder e;
  e.digest(rqt_digest);
  encode(e, key);
  return e.hash("fpl/unlock-noop");
}

Digest unlock_gas_digest(const Digest& rqt_digest) {
  Encoder e;
  e.digest(rqt_digest);
  return e.hash("fpl/unlock-gas");
}

Digest consolidation_digest(const Digest& rqt_digest) {
  Encoder e;
  e.digest(rqt_digest);
  return e.hash("fpl/consolidation");
}

}  // namespace fpl
