#include "fpl/types.hpp"

#include <algorithm>
#include <set>

namespace fpl {

Result<Unit> validate(const CommitteeParams& p) {
  if (p.n == 0 || p.n < 3 * p.f + 1) {
    return Error{ErrorCode::kMalformed,
                 "committee needs n >= 3f+1 (n=" + std::to_string(p.n) + ", f=" + std::to_string(p.f) + ")"};
  }
  return Unit{};
}

Result<std::uint32_t> quorum(const CommitteeParams& p) {
  auto ok = validate(p);
  if (!ok) return ok.error();
  return p.n - p.f;
}

Result<std::uint32_t> validity_threshold(const CommitteeParams& p) {
  auto ok = validate(p);
  if (!ok) return ok.error();
  return p.f + 1;
}

std::string_view to_string(ObjectKind k) {
  switch (k) {
    case ObjectKind::kReadOnly: return "ReadOnly";
    case ObjectKind::kOwned: return "Owned";
    case ObjectKind::kShared: return "Shared";
    case ObjectKind::kCommutative: return "Commutative";
  }
  return "?";
}

std::string_view to_string(CrdtKind k) {
  switch (k) {
    case CrdtKind::kNone: return "None";
    case CrdtKind::kGCounter: return "GCounter";
    case CrdtKind::kUSet: return "USet";
    case CrdtKind::kPNSet: return "PNSet";
    case CrdtKind::kBoundedCounter: return "BoundedCounter";
  }
  return "?";
}

std::string_view to_string(TxKind k) {
  switch (k) {
    case TxKind::kTransfer: return "Transfer";
    case TxKind::kSwap: return "Swap";
    case TxKind::kNoOp: return "NoOp";
    case TxKind::kMint: return "Mint";
    case TxKind::kCredit: return "Credit";
    case TxKind::kDebit: return "Debit";
  }
  return "?";
}

Result<TxKind> tx_kind_from_string(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(TxKind::kDebit); ++i) {
    auto k = static_cast<TxKind>(i);
    if (to_string(k) == s) return k;
  }
  return Error{ErrorCode::kMalformed, "unknown transaction kind " + std::string(s)};
}

void encode(Encoder& e, const Object& o) {
  encode(e, o.key);
  e.u8(static_cast<std::uint8_t>(o.kind)).u8(static_cast<std::uint8_t>(o.crdt));
  e.boolean(o.owner.has_value());
  if (o.owner) e.digest(o.owner->root);
  e.i64(o.balance).bytes(o.payload);
}

Object decode_object(Decoder& d) {
  Object o;
  o.key = decode_object_key(d);
  auto kind = d.u8();
  auto crdt = d.u8();
  if (kind > 3 || crdt > 4) throw DecodeError("bad object kind");
  o.kind = static_cast<ObjectKind>(kind);
  o.crdt = static_cast<CrdtKind>(crdt);
  if (d.boolean()) o.owner = AuthCommitment{d.digest()};
  o.balance = d.i64();
  o.payload = d.bytes();
  return o;
}

Digest Object::digest() const {
  Encoder e;
  encode(e, *this);
  return e.hash("fpl/object");
}

void encode(Encoder& e, const AuthEvidence& ev) {
  e.u32(static_cast<std::uint32_t>(ev.signatures.size()));
  for (const auto& [pk, sig] : ev.signatures) e.digest(pk.value).digest(sig.value);
  e.u32(static_cast<std::uint32_t>(ev.proofs.size()));
  for (const auto& [id, proof] : ev.proofs) {
    e.digest(id.value);
    encode(e, proof.reveal);
    encode(e, proof.path);
  }
}

AuthEvidence decode_auth_evidence(Decoder& d) {
  AuthEvidence ev;
  auto n = d.u32();
  if (n > d.remaining() / 64) throw DecodeError("signature count exceeds input");
  for (std::uint32_t i = 0; i < n; ++i) {
    PublicKey pk{d.digest()};
    Signature sig{d.digest()};
    ev.signatures.emplace_back(pk, sig);
  }
  auto m = d.u32();
  if (m > d.remaining() / 32) throw DecodeError("proof count exceeds input");
  for (std::uint32_t i = 0; i < m; ++i) {
    ObjectId id{d.digest()};
    InputProof p;
    p.reveal = decode_reveal(d);
    p.path = decode_auth_path(d);
    ev.proofs.emplace(id, std::move(p));
  }
  return ev;
}

void encode_body(Encoder& e, const Transaction& tx) {
  e.u32(static_cast<std::uint32_t>(tx.inputs.size()));
  for (const auto& k : tx.inputs) encode(e, k);
  e.u32(static_cast<std::uint32_t>(tx.shared_inputs.size()));
  for (const auto& id : tx.shared_inputs) e.digest(id.value);
  e.u32(static_cast<std::uint32_t>(tx.commutative_inputs.size()));
  for (const auto& k : tx.commutative_inputs) encode(e, k);
  e.u8(static_cast<std::uint8_t>(tx.kind));
  e.digest(tx.params.recipient.root)
      .digest(tx.params.target.value)
      .digest(tx.params.new_object.value)
      .i64(tx.params.amount)
      .str(tx.params.item)
      .u64(tx.params.salt);
  encode(e, tx.gas);
  e.u64(tx.epoch);
}

void encode(Encoder& e, const Transaction& tx) {
  encode_body(e, tx);
  encode(e, tx.evidence);
}

Transaction decode_transaction(Decoder& d) {
  Transaction tx;
  auto n = d.u32();
  if (n > d.remaining() / 40) throw DecodeError("input count exceeds input");
  for (std::uint32_t i = 0; i < n; ++i) tx.inputs.push_back(decode_object_key(d));
  n = d.u32();
  if (n > d.remaining() / 32) throw DecodeError("shared count exceeds input");
  for (std::uint32_t i = 0; i < n; ++i) tx.shared_inputs.push_back(ObjectId{d.digest()});
  n = d.u32();
  if (n > d.remaining() / 40) throw DecodeError("commutative count exceeds input");
  for (std::uint32_t i = 0; i < n; ++i) tx.commutative_inputs.push_back(decode_object_key(d));
  auto kind = d.u8();
  if (kind > static_cast<std::uint8_t>(TxKind::kDebit)) throw DecodeError("bad tx kind");
  tx.kind = static_cast<TxKind>(kind);
  tx.params.recipient.root = d.digest();
  tx.params.target.value = d.digest();
  tx.params.new_object.value = d.digest();
  tx.params.amount = d.i64();
  tx.params.item = d.str();
  tx.params.salt = d.u64();
  tx.gas = decode_object_key(d);
  tx.epoch = d.u64();
  tx.evidence = decode_auth_evidence(d);
  return tx;
}

Digest Transaction::digest() const {
  Encoder e;
  encode_body(e, *this);
  return e.hash("fpl/tx");
}

Result<Unit> Transaction::check_structure() const {
  std::set<ObjectId> seen;
  for (const auto& k : inputs) {
    if (!seen.insert(k.id).second) return Error{ErrorCode::kMalformed, "duplicate input " + k.to_string()};
  }
  for (const auto& id : shared_inputs) {
    if (!seen.insert(id).second) return Error{ErrorCode::kMalformed, "duplicate shared input"};
  }
  for (const auto& k : commutative_inputs) {
    if (!seen.insert(k.id).second) return Error{ErrorCode::kMalformed, "duplicate commutative input"};
  }
  if (std::find(inputs.begin(), inputs.end(), gas) == inputs.end()) {
    return Error{ErrorCode::kMalformed, "gas object must be an input"};
  }
  if (params.amount < 0) return Error{ErrorCode::kMalformed, "negative amount"};
  switch (kind) {
    case TxKind::kSwap:
      if (inputs.size() != 3) return Error{ErrorCode::kMalformed, "swap takes two objects plus gas"};
      break;
    case TxKind::kMint:
      if (params.new_object.value.is_zero()) return Error{ErrorCode::kMalformed, "mint needs a new object id"};
      if (seen.contains(params.new_object)) return Error{ErrorCode::kMalformed, "mint target already an input"};
      break;
    case TxKind::kCredit:
    case TxKind::kDebit:
      if (!seen.contains(params.target)) return Error{ErrorCode::kMalformed, "credit/debit target not an input"};
      if (params.target == gas.id) return Error{ErrorCode::kMalformed, "credit/debit target is the gas object"};
      break;
    default:
      break;
  }
  return Unit{};
}

void encode(Encoder& e, const Certificate& c) {
  encode(e, c.tx);
  e.u32(static_cast<std::uint32_t>(c.signers.size()));
  for (const auto& s : c.signers) e.u32(s.signer).digest(s.sig.value);
}

Certificate decode_certificate(Decoder& d) {
  Certificate c;
  c.tx = decode_transaction(d);
  auto n = d.u32();
  if (n > d.remaining() / 36) throw DecodeError("signer count exceeds input");
  for (std::uint32_t i = 0; i < n; ++i) {
    SignerSig s;
    s.signer = d.u32();
    s.sig.value = d.digest();
    c.signers.push_back(s);
  }
  return c;
}

void encode(Encoder& e, const Effects& fx) {
  e.digest(fx.tx_digest).u8(static_cast<std::uint8_t>(fx.status)).str(fx.failure);
  e.u32(static_cast<std::uint32_t>(fx.consumed.size()));
  for (const auto& k : fx.consumed) encode(e, k);
  e.u32(static_cast<std::uint32_t>(fx.produced.size()));
  for (const auto& r : fx.produced) {
    encode(e, r.key);
    e.digest(r.state);
  }
  e.u32(static_cast<std::uint32_t>(fx.commutative.size()));
  for (const auto& op : fx.commutative) {
    encode(e, op.counter);
    e.u8(static_cast<std::uint8_t>(op.kind)).i64(op.amount).str(op.item);
  }
}

Digest Effects::digest() const {
  Encoder e;
  encode(e, *this);
  return e.hash("fpl/effects");
}

bool outputs_match(const EffectSign& s) {
  if (s.outputs.size() != s.effects.produced.size()) return false;
  for (std::size_t i = 0; i < s.outputs.size(); ++i) {
    const auto& ref = s.effects.produced[i];
    if (s.outputs[i].key != ref.key || s.outputs[i].digest() != ref.state) return false;
  }
  return true;
}

Result<Committee> Committee::make(CommitteeParams params, std::shared_ptr<const SignatureScheme> scheme) {
  auto q = fpl::quorum(params);
  if (!q) return q.error();
  Committee c;
  c.params_ = params;
  c.quorum_ = *q;
  c.scheme_ = std::move(scheme);
  for (ValidatorId i = 0; i < params.n; ++i) c.keys_.push_back(PublicKey::for_validator(i));
  return c;
}

SignerSig Committee::sign(ValidatorId id, const Digest& message) const {
  return SignerSig{id, scheme_->sign(key(id), message)};
}

bool Committee::verify(const SignerSig& s, const Digest& message) const {
  if (s.signer >= params_.n) return false;
  return scheme_->verify(keys_[s.signer], message, s.sig);
}

bool Committee::verify_quorum(const std::vector<SignerSig>& signers, const Digest& message) const {
  std::set<ValidatorId> distinct;
  for (const auto& s : signers) {
    if (!verify(s, message)) return false;
    if (!distinct.insert(s.signer).second) return false;
  }
  return distinct.size() >= quorum_;
}

bool verify_certificate(const Certificate& cert, const Committee& committee) {
  return committee.verify_quorum(cert.signers, cert.tx.digest());
}

bool verify_effect_cert(const EffectCert& cert, const Committee& committee) {
  return committee.verify_quorum(cert.signers, cert.effects.digest());
}

std::optional<Certificate> assemble_certificate(const Transaction& tx, const std::vector<CertSign>& votes,
                                                const Committee& committee) {
  auto digest = tx.digest();
  std::map<ValidatorId, SignerSig> by_signer;
  for (const auto& v : votes) {
    if (v.tx_digest != digest || !committee.verify(v.vote, digest)) continue;
    by_signer.emplace(v.vote.signer, v.vote);
  }
  if (by_signer.size() < committee.quorum()) return std::nullopt;
  Certificate cert{tx, {}};
  for (const auto& [id, s] : by_signer) cert.signers.push_back(s);
  return cert;
}

std::optional<EffectCert> assemble_effect_cert(const std::vector<EffectSign>& votes, const Committee& committee) {
  // Group by effects digest; the first group to reach quorum wins.
  std::map<Digest, std::map<ValidatorId, SignerSig>> groups;
  std::map<Digest, const Effects*> effects;
  for (const auto& v : votes) {
    auto d = v.effects.digest();
    if (!committee.verify(v.vote, d)) continue;
    groups[d].emplace(v.vote.signer, v.vote);
    effects.emplace(d, &v.effects);
  }
  for (const auto& [d, signers] : groups) {
    if (signers.size() < committee.quorum()) continue;
    EffectCert cert{*effects.at(d), {}};
    for (const auto& [id, s] : signers) cert.signers.push_back(s);
    return cert;
  }
  return std::nullopt;
}

Digest evidence_message(const Transaction& tx) { return tx.digest(); }

AuthTerm single_key_term(const PublicKey& pk) { return AuthTerm::public_key(pk); }

AuthCommitment single_key_owner(const PublicKey& pk) { return AuthCommitment{node_hash(single_key_term(pk))}; }

EvidenceBuilder& EvidenceBuilder::sign_as(const PublicKey& pk) {
  auto sig = scheme->sign(pk, message);
  auto& sigs = evidence.signatures;
  auto it = std::lower_bound(sigs.begin(), sigs.end(), pk,
                             [](const auto& entry, const PublicKey& k) { return entry.first < k; });
  if (it == sigs.end() || it->first != pk) sigs.insert(it, {pk, sig});
  return *this;
}

AuthContext EvidenceBuilder::context(std::set<ObjectId> included, Tick local_time) const {
  AuthContext ctx;
  for (const auto& [pk, sig] : evidence.signatures) ctx.signers.insert(pk);
  ctx.included_oids = std::move(included);
  ctx.local_time = local_time;
  return ctx;
}

bool EvidenceBuilder::prove(const ObjectId& id, const AuthTerm& term, const AuthContext& ctx) {
  auto path = fpl::prove(term, ctx);
  if (!path) return false;
  auto r = reveal(term, *path);
  if (!r) return false;
  evidence.proofs[id] = InputProof{std::move(r).value(), std::move(*path)};
  return true;
}

Result<bool> check_owner_evidence(const AuthCommitment& owner, const ObjectId& id, const AuthEvidence& evidence,
                                  const Digest& message, const std::set<ObjectId>& included, Tick local_time,
                                  const SignatureScheme& scheme, const EventOracle& oracle) {
  auto it = evidence.proofs.find(id);
  if (it == evidence.proofs.end()) return false;
  AuthContext ctx;
  for (const auto& [pk, sig] : evidence.signatures) {
    if (scheme.verify(pk, message, sig)) ctx.signers.insert(pk);
  }
  ctx.included_oids = included;
  ctx.local_time = local_time;
  ctx.event_oracle = oracle;
  return verify_reveal(owner, it->second.reveal, it->second.path, ctx);
}

}  // namespace fpl
