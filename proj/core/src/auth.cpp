#include "fpl/auth.hpp"

#include <algorithm>

namespace fpl {

namespace {

constexpr std::string_view kLeafTag = "fpl/auth/leaf";
constexpr std::string_view kBranchTag = "fpl/auth/branch";
constexpr std::string_view kNonceTag = "fpl/auth/nonce";

void encode_nonce(Encoder& e, const std::optional<Digest>& nonce) {
  e.boolean(nonce.has_value());
  if (nonce) e.digest(*nonce);
}

// Fields of a single node, excluding children. Used for both the hash
// preimage and the wire format so the two can never drift apart.
void encode_node_fields(Encoder& e, const AuthTerm& t, std::size_t child_count) {
  e.u8(static_cast<std::uint8_t>(t.kind));
  switch (t.kind) {
    case TermKind::kPublicKey: e.digest(t.pk.value); break;
    case TermKind::kObjectId: e.digest(t.oid.value); break;
    case TermKind::kBeforeTime:
    case TermKind::kAfterTime: e.i64(t.time); break;
    case TermKind::kEventOccurred: e.str(t.chain).str(t.event); break;
    case TermKind::kThreshold:
    case TermKind::kAnd:
    case TermKind::kOr:
      e.u64(t.kind == TermKind::kThreshold ? t.threshold : 0);
      e.u32(static_cast<std::uint32_t>(child_count));
      if (t.kind == TermKind::kThreshold) {
        for (auto w : t.weights) e.u64(w);
      }
      break;
  }
  encode_nonce(e, t.nonce);
}

Digest hash_from_parts(const AuthTerm& node, const std::vector<Digest>& child_hashes) {
  Encoder e;
  encode_node_fields(e, node, child_hashes.size());
  if (node.is_leaf()) return e.hash(kLeafTag);
  for (const auto& h : child_hashes) e.digest(h);
  return e.hash(kBranchTag);
}

bool leaf_holds(const AuthTerm& t, const AuthContext& ctx) {
  switch (t.kind) {
    case TermKind::kPublicKey: return ctx.signers.contains(t.pk);
    case TermKind::kObjectId: return ctx.included_oids.contains(t.oid);
    case TermKind::kBeforeTime: return ctx.local_time < t.time;
    case TermKind::kAfterTime: return ctx.local_time > t.time;
    case TermKind::kEventOccurred: return ctx.event_oracle && ctx.event_oracle(t.chain, t.event);
    default: return false;
  }
}

struct PathCursor {
  const AuthPath& path;
  std::size_t next = 0;

  const std::vector<std::uint32_t>* take() {
    if (next >= path.steps.size()) return nullptr;
    return &path.steps[next++];
  }
};

bool valid_subset(const std::vector<std::uint32_t>& sel, std::size_t n) {
  for (std::size_t i = 0; i < sel.size(); ++i) {
    if (sel[i] >= n) return false;
    if (i > 0 && sel[i] <= sel[i - 1]) return false;
  }
  return true;
}

// Shared walker for full terms and reveals. Node access goes through the
// adaptor so reveal evaluation can refuse to enter hidden subtrees.
struct TermView {
  static const AuthTerm& node(const AuthTerm& t) { return t; }
  static const std::vector<AuthTerm>& children(const AuthTerm& t) { return t.children; }
  static bool hidden(const AuthTerm&) { return false; }
};

struct RevealView {
  static const AuthTerm& node(const RevealNode& r) { return r.node; }
  static const std::vector<RevealNode>& children(const RevealNode& r) { return r.children; }
  static bool hidden(const RevealNode& r) { return r.is_hidden(); }
};

template <class View, class Node>
Result<bool> eval_node(const Node& n, PathCursor& cursor, const AuthContext& ctx, RevealStats* stats) {
  if (View::hidden(n)) return Error{ErrorCode::kInvalidReveal, "path enters a hidden subtree"};
  if (stats) ++stats->opened_nodes;
  const AuthTerm& t = View::node(n);
  const auto& kids = View::children(n);
  switch (t.kind) {
    case TermKind::kAnd: {
      bool all = true;
      for (const auto& c : kids) {
        auto r = eval_node<View>(c, cursor, ctx, stats);
        if (!r) return r;
        all = all && *r;
      }
      return all;
    }
    case TermKind::kOr: {
      const auto* step = cursor.take();
      if (!step || step->size() != 1 || (*step)[0] >= kids.size()) {
        return Error{ErrorCode::kMalformedPath, "Or step must select one existing child"};
      }
      return eval_node<View>(kids[(*step)[0]], cursor, ctx, stats);
    }
    case TermKind::kThreshold: {
      const auto* step = cursor.take();
      if (!step || !valid_subset(*step, kids.size())) {
        return Error{ErrorCode::kMalformedPath, "Threshold step must be a sorted subset"};
      }
      std::uint64_t sum = 0;
      for (auto idx : *step) {
        auto r = eval_node<View>(kids[idx], cursor, ctx, stats);
        if (!r) return r;
        if (*r) sum += t.weights[idx];
      }
      return sum >= t.threshold;
    }
    default:
      return leaf_holds(t, ctx);
  }
}

void collect_depth(const AuthTerm& t, std::size_t d, std::size_t& best) {
  best = std::max(best, d);
  for (const auto& c : t.children) collect_depth(c, d + 1, best);
}

Result<Unit> validate_node(const AuthTerm& t, std::size_t depth) {
  if (depth > kMaxAuthDepth) return Error{ErrorCode::kDepthExceeded, "authenticator deeper than 32"};
  if (t.is_leaf()) {
    if (!t.children.empty()) return Error{ErrorCode::kMalformed, "leaf with children"};
    return Unit{};
  }
  if (t.children.empty()) return Error{ErrorCode::kMalformed, "branch without children"};
  if (t.kind == TermKind::kThreshold) {
    if (t.threshold < 1) return Error{ErrorCode::kMalformed, "threshold must be >= 1"};
    if (t.weights.size() != t.children.size()) return Error{ErrorCode::kMalformed, "weight count mismatch"};
    for (auto w : t.weights) {
      if (w == 0) return Error{ErrorCode::kMalformed, "weights must be positive"};
    }
  } else if (!t.weights.empty()) {
    return Error{ErrorCode::kMalformed, "weights on a non-threshold branch"};
  }
  for (const auto& c : t.children) {
    auto r = validate_node(c, depth + 1);
    if (!r) return r;
  }
  return Unit{};
}

std::optional<std::vector<std::vector<std::uint32_t>>> prove_node(const AuthTerm& t, const AuthContext& ctx) {
  using Steps = std::vector<std::vector<std::uint32_t>>;
  switch (t.kind) {
    case TermKind::kAnd: {
      Steps out;
      for (const auto& c : t.children) {
        auto sub = prove_node(c, ctx);
        if (!sub) return std::nullopt;
        out.insert(out.end(), sub->begin(), sub->end());
      }
      return out;
    }
    case TermKind::kOr: {
      for (std::uint32_t i = 0; i < t.children.size(); ++i) {
        auto sub = prove_node(t.children[i], ctx);
        if (!sub) continue;
        Steps out{{i}};
        out.insert(out.end(), sub->begin(), sub->end());
        return out;
      }
      return std::nullopt;
    }
    case TermKind::kThreshold: {
      std::vector<std::uint32_t> picked;
      Steps tail;
      std::uint64_t sum = 0;
      for (std::uint32_t i = 0; i < t.children.size(); ++i) {
        auto sub = prove_node(t.children[i], ctx);
        if (!sub) continue;
        picked.push_back(i);
        sum += t.weights[i];
        tail.insert(tail.end(), sub->begin(), sub->end());
      }
      if (sum < t.threshold) return std::nullopt;
      Steps out{picked};
      out.insert(out.end(), tail.begin(), tail.end());
      return out;
    }
    default:
      if (leaf_holds(t, ctx)) return Steps{};
      return std::nullopt;
  }
}

AuthTerm strip_children(const AuthTerm& t) {
  AuthTerm n = t;
  n.children.clear();
  return n;
}

RevealNode hidden_node(const AuthTerm& t) {
  RevealNode r;
  r.hidden = node_hash(t);
  return r;
}

Result<RevealNode> reveal_node(const AuthTerm& t, PathCursor& cursor) {
  RevealNode r;
  r.node = strip_children(t);
  switch (t.kind) {
    case TermKind::kAnd:
      for (const auto& c : t.children) {
        auto sub = reveal_node(c, cursor);
        if (!sub) return sub;
        r.children.push_back(std::move(sub).value());
      }
      break;
    case TermKind::kOr:
    case TermKind::kThreshold: {
      const auto* step = cursor.take();
      bool ok = step && (t.kind == TermKind::kOr ? step->size() == 1 && (*step)[0] < t.children.size()
                                                 : valid_subset(*step, t.children.size()));
      if (!ok) return Error{ErrorCode::kMalformedPath, "path does not fit term"};
      for (std::uint32_t i = 0; i < t.children.size(); ++i) {
        if (std::find(step->begin(), step->end(), i) != step->end()) {
          auto sub = reveal_node(t.children[i], cursor);
          if (!sub) return sub;
          r.children.push_back(std::move(sub).value());
        } else {
          r.children.push_back(hidden_node(t.children[i]));
        }
      }
      break;
    }
    default:
      break;
  }
  return r;
}

Result<Digest> reveal_hash_rec(const RevealNode& r, std::size_t depth) {
  if (r.is_hidden()) return *r.hidden;
  if (depth > kMaxAuthDepth) return Error{ErrorCode::kDepthExceeded, "reveal deeper than 32"};
  const AuthTerm& n = r.node;
  if (!n.children.empty()) return Error{ErrorCode::kInvalidReveal, "opened node must not embed children"};
  if (n.is_leaf() != r.children.empty()) return Error{ErrorCode::kInvalidReveal, "child count mismatch"};
  if (n.kind == TermKind::kThreshold && n.weights.size() != r.children.size()) {
    return Error{ErrorCode::kInvalidReveal, "weight count mismatch"};
  }
  std::vector<Digest> kids;
  kids.reserve(r.children.size());
  for (const auto& c : r.children) {
    auto h = reveal_hash_rec(c, depth + 1);
    if (!h) return h;
    kids.push_back(*h);
  }
  return hash_from_parts(n, kids);
}

void encode_term_rec(Encoder& e, const AuthTerm& t) {
  encode_node_fields(e, t, t.children.size());
  for (const auto& c : t.children) encode_term_rec(e, c);
}

AuthTerm decode_node_fields(Decoder& d, std::uint32_t& child_count) {
  AuthTerm t;
  auto kind = d.u8();
  if (kind > static_cast<std::uint8_t>(TermKind::kOr)) throw DecodeError("unknown term kind");
  t.kind = static_cast<TermKind>(kind);
  child_count = 0;
  switch (t.kind) {
    case TermKind::kPublicKey: t.pk.value = d.digest(); break;
    case TermKind::kObjectId: t.oid.value = d.digest(); break;
    case TermKind::kBeforeTime:
    case TermKind::kAfterTime: t.time = d.i64(); break;
    case TermKind::kEventOccurred:
      t.chain = d.str();
      t.event = d.str();
      break;
    default:
      t.threshold = d.u64();
      child_count = d.u32();
      if (child_count > 4096) throw DecodeError("too many children");
      if (t.kind == TermKind::kThreshold) {
        for (std::uint32_t i = 0; i < child_count; ++i) t.weights.push_back(d.u64());
      }
      break;
  }
  if (d.boolean()) t.nonce = d.digest();
  return t;
}

AuthTerm decode_term_rec(Decoder& d, std::size_t depth) {
  if (depth > kMaxAuthDepth) throw DecodeError("authenticator too deep");
  std::uint32_t n = 0;
  AuthTerm t = decode_node_fields(d, n);
  for (std::uint32_t i = 0; i < n; ++i) t.children.push_back(decode_term_rec(d, depth + 1));
  return t;
}

void encode_reveal_rec(Encoder& e, const RevealNode& r) {
  e.boolean(r.is_hidden());
  if (r.is_hidden()) {
    e.digest(*r.hidden);
    return;
  }
  encode_node_fields(e, r.node, r.children.size());
  for (const auto& c : r.children) encode_reveal_rec(e, c);
}

RevealNode decode_reveal_rec(Decoder& d, RevealStats* stats, std::size_t depth) {
  if (depth > kMaxAuthDepth) throw DecodeError("reveal too deep");
  RevealNode r;
  if (d.boolean()) {
    r.hidden = d.digest();
    if (stats) ++stats->hidden_nodes;
    return r;
  }
  if (stats) ++stats->opened_nodes;
  std::uint32_t n = 0;
  r.node = decode_node_fields(d, n);
  for (std::uint32_t i = 0; i < n; ++i) r.children.push_back(decode_reveal_rec(d, stats, depth + 1));
  return r;
}

}  // namespace

AuthTerm AuthTerm::public_key(PublicKey pk) {
  AuthTerm t;
  t.kind = TermKind::kPublicKey;
  t.pk = pk;
  return t;
}

AuthTerm AuthTerm::object_id(ObjectId oid) {
  AuthTerm t;
  t.kind = TermKind::kObjectId;
  t.oid = oid;
  return t;
}

AuthTerm AuthTerm::before_time(Tick time) {
  AuthTerm t;
  t.kind = TermKind::kBeforeTime;
  t.time = time;
  return t;
}

AuthTerm AuthTerm::after_time(Tick time) {
  AuthTerm t;
  t.kind = TermKind::kAfterTime;
  t.time = time;
  return t;
}

AuthTerm AuthTerm::event_occurred(std::string chain, std::string event) {
  AuthTerm t;
  t.kind = TermKind::kEventOccurred;
  t.chain = std::move(chain);
  t.event = std::move(event);
  return t;
}

AuthTerm AuthTerm::threshold_of(std::uint64_t w, std::vector<std::pair<std::uint64_t, AuthTerm>> weighted) {
  AuthTerm t;
  t.kind = TermKind::kThreshold;
  t.threshold = w;
  for (auto& [weight, term] : weighted) {
    t.weights.push_back(weight);
    t.children.push_back(std::move(term));
  }
  return t;
}

AuthTerm AuthTerm::all_of(std::vector<AuthTerm> terms) {
  AuthTerm t;
  t.kind = TermKind::kAnd;
  t.children = std::move(terms);
  return t;
}

AuthTerm AuthTerm::any_of(std::vector<AuthTerm> terms) {
  AuthTerm t;
  t.kind = TermKind::kOr;
  t.children = std::move(terms);
  return t;
}

std::size_t AuthTerm::depth() const {
  std::size_t best = 0;
  collect_depth(*this, 0, best);
  return best;
}

Result<Unit> validate(const AuthTerm& term) { return validate_node(term, 0); }

Result<bool> evaluate(const AuthTerm& term, const AuthPath& path, const AuthContext& ctx) {
  PathCursor cursor{path};
  auto r = eval_node<TermView>(term, cursor, ctx, nullptr);
  if (!r) return r;
  if (cursor.next != path.steps.size()) return Error{ErrorCode::kMalformedPath, "unused path steps"};
  return r;
}

std::optional<AuthPath> prove(const AuthTerm& term, const AuthContext& ctx) {
  auto steps = prove_node(term, ctx);
  if (!steps) return std::nullopt;
  return AuthPath{std::move(*steps)};
}

Digest NonceSource::next() {
  Encoder e;
  e.u64(seed_).u64(counter_++);
  return e.hash(kNonceTag);
}

AuthTerm attach_nonces(AuthTerm term, NonceSource& nonces) {
  term.nonce = nonces.next();
  for (auto& c : term.children) c = attach_nonces(std::move(c), nonces);
  return term;
}

Digest node_hash(const AuthTerm& term) {
  std::vector<Digest> kids;
  kids.reserve(term.children.size());
  for (const auto& c : term.children) kids.push_back(node_hash(c));
  return hash_from_parts(term, kids);
}

Result<AuthCommitment> commit(const AuthTerm& term) {
  auto ok = validate(term);
  if (!ok) return ok.error();
  return AuthCommitment{node_hash(term)};
}

Result<AuthCommitment> commit(const AuthTerm& term, NonceSource& nonces) {
  return commit(attach_nonces(term, nonces));
}

Result<RevealNode> reveal(const AuthTerm& term, const AuthPath& path) {
  PathCursor cursor{path};
  auto r = reveal_node(term, cursor);
  if (!r) return r;
  if (cursor.next != path.steps.size()) return Error{ErrorCode::kMalformedPath, "unused path steps"};
  return r;
}

Result<Digest> reveal_hash(const RevealNode& reveal) { return reveal_hash_rec(reveal, 0); }

namespace {

std::size_t count_hidden(const RevealNode& r) {
  if (r.is_hidden()) return 1;
  std::size_t n = 0;
  for (const auto& c : r.children) n += count_hidden(c);
  return n;
}

}  // namespace

Result<bool> verify_reveal(const AuthCommitment& commitment, const RevealNode& reveal,
                           const AuthPath& path, const AuthContext& ctx, RevealStats* stats) {
  auto root = reveal_hash(reveal);
  if (!root) return root.error();
  if (*root != commitment.root) return false;
  if (stats) stats->hidden_nodes += count_hidden(reveal);
  PathCursor cursor{path};
  auto r = eval_node<RevealView>(reveal, cursor, ctx, stats);
  if (!r) return r;
  if (cursor.next != path.steps.size()) return Error{ErrorCode::kMalformedPath, "unused path steps"};
  return r;
}

void encode(Encoder& e, const AuthTerm& term) { encode_term_rec(e, term); }

AuthTerm decode_auth_term(Decoder& d) { return decode_term_rec(d, 0); }

void encode(Encoder& e, const RevealNode& reveal) { encode_reveal_rec(e, reveal); }

RevealNode decode_reveal(Decoder& d, RevealStats* stats) { return decode_reveal_rec(d, stats, 0); }

void encode(Encoder& e, const AuthPath& path) {
  e.u32(static_cast<std::uint32_t>(path.steps.size()));
  for (const auto& step : path.steps) {
    e.u32(static_cast<std::uint32_t>(step.size()));
    for (auto i : step) e.u32(i);
  }
}

AuthPath decode_auth_path(Decoder& d) {
  AuthPath p;
  auto n = d.u32();
  if (n > d.remaining()) throw DecodeError("path step count exceeds input");
  for (std::uint32_t i = 0; i < n; ++i) {
    auto m = d.u32();
    if (m > d.remaining()) throw DecodeError("path selection exceeds input");
    std::vector<std::uint32_t> step(m);
    for (auto& v : step) v = d.u32();
    p.steps.push_back(std::move(step));
  }
  return p;
}

}  // namespace fpl
