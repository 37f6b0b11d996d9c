#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fpl/ids.hpp"
#include "fpl/result.hpp"

namespace fpl {

// Authorization terms for owned and collective objects.
//
//   T := PublicKey(pk) | ObjectID(oid) | BeforeTime(t) | AfterTime(t)
//      | EventOccured(chain, event) | Threshold(W, [(w_i, T_i)])
//      | And([T_i]) | Or([T_i])
//
// Every node may carry a nonce; nonces are mixed into the node hash so a
// committed tree reveals nothing about unopened branches.
enum class TermKind : std::uint8_t {
  kPublicKey = 0,
  kObjectId = 1,
  kBeforeTime = 2,
  kAfterTime = 3,
  kEventOccurred = 4,
  kThreshold = 5,
  kAnd = 6,
  kOr = 7,
};

inline constexpr std::size_t kMaxAuthDepth = 32;

struct AuthTerm {
  TermKind kind = TermKind::kPublicKey;
  PublicKey pk;
  ObjectId oid;
  Tick time = 0;
  std::string chain;
  std::string event;
  std::uint64_t threshold = 0;
  std::vector<std::uint64_t> weights;  // Threshold only, parallel to children
  std::vector<AuthTerm> children;
  std::optional<Digest> nonce;

  static AuthTerm public_key(PublicKey pk);
  static AuthTerm object_id(ObjectId oid);
  static AuthTerm before_time(Tick t);
  static AuthTerm after_time(Tick t);
  static AuthTerm event_occurred(std::string chain, std::string event);
  static AuthTerm threshold_of(std::uint64_t w, std::vector<std::pair<std::uint64_t, AuthTerm>> weighted);
  static AuthTerm all_of(std::vector<AuthTerm> terms);
  static AuthTerm any_of(std::vector<AuthTerm> terms);

  bool is_leaf() const { return kind < TermKind::kThreshold; }
  std::size_t depth() const;

  friend bool operator==(const AuthTerm&, const AuthTerm&) = default;
};

// Structural checks: positive weights, W >= 1, non-empty branches, depth bound.
Result<Unit> validate(const AuthTerm& term);

// Selection bits for the branches a proof pursues, consumed in pre-order.
// An Or step holds exactly one child index; a Threshold step holds a sorted,
// duplicate-free subset. And nodes and leaves consume no step.
struct AuthPath {
  std::vector<std::vector<std::uint32_t>> steps;

  friend bool operator==(const AuthPath&, const AuthPath&) = default;
};

using EventOracle = std::function<bool(const std::string& chain, const std::string& event)>;

struct AuthContext {
  std::set<PublicKey> signers;
  std::set<ObjectId> included_oids;
  Tick local_time = 0;  // the receiving validator's clock
  EventOracle event_oracle;
};

// True iff the path-selected sub-terms hold under ctx. Before/AfterTime are
// strict: local_time == t satisfies neither. A path that does not fit the
// term yields kMalformedPath rather than false.
Result<bool> evaluate(const AuthTerm& term, const AuthPath& path, const AuthContext& ctx);

// Finds a satisfying path, preferring the lowest-index Or child and every
// true Threshold child. nullopt if the term cannot be satisfied under ctx.
std::optional<AuthPath> prove(const AuthTerm& term, const AuthContext& ctx);

// Deterministic nonce stream: nonce_i = H("fpl/auth/nonce" || seed || i).
class NonceSource {
 public:
  explicit NonceSource(std::uint64_t seed) : seed_(seed) {}
  Digest next();

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

// Assigns a fresh nonce to every node, in pre-order.
AuthTerm attach_nonces(AuthTerm term, NonceSource& nonces);

// Merkle hash of a node.
//   leaf   = H_tag("fpl/auth/leaf",   kind || fields || nonce_flag [|| nonce])
//   branch = H_tag("fpl/auth/branch", kind || W || n || weights || nonce_flag
//                                      [|| nonce] || child_hash_1 .. child_hash_n)
// Leaf fields: PublicKey -> pk(32), ObjectID -> oid(32), Before/AfterTime ->
// i64 LE, EventOccured -> str(chain) str(event). W is u64 (0 for And/Or),
// n is u32, weights are u64 (Threshold only). H_tag is tagged_hash().
Digest node_hash(const AuthTerm& term);

Result<AuthCommitment> commit(const AuthTerm& term);
Result<AuthCommitment> commit(const AuthTerm& term, NonceSource& nonces);

// A partially opened tree. Opened nodes carry their own fields (the `node`
// term with no children) and one RevealNode per child; unopened subtrees are
// just their hash.
struct RevealNode {
  std::optional<Digest> hidden;
  AuthTerm node;
  std::vector<RevealNode> children;

  bool is_hidden() const { return hidden.has_value(); }
  friend bool operator==(const RevealNode&, const RevealNode&) = default;
};

// Opens exactly the nodes the path pursues.
Result<RevealNode> reveal(const AuthTerm& term, const AuthPath& path);

// Counters filled during decoding and verification of a reveal.
struct RevealStats {
  std::size_t opened_nodes = 0;  // term nodes decoded or evaluated
  std::size_t hidden_nodes = 0;  // subtrees passed through as a digest only
};

// Hash of a reveal; equals node_hash of the original tree when consistent.
Result<Digest> reveal_hash(const RevealNode& reveal);

// True iff the reveal hashes to the commitment and the opened terms satisfy
// the path under ctx. Digest mismatch is false; a path that descends into a
// hidden subtree is kInvalidReveal.
Result<bool> verify_reveal(const AuthCommitment& commitment, const RevealNode& reveal,
                           const AuthPath& path, const AuthContext& ctx,
                           RevealStats* stats = nullptr);

void encode(Encoder& e, const AuthTerm& term);
AuthTerm decode_auth_term(Decoder& d);
void encode(Encoder& e, const RevealNode& reveal);
RevealNode decode_reveal(Decoder& d, RevealStats* stats = nullptr);
void encode(Encoder& e, const AuthPath& path);
AuthPath decode_auth_path(Decoder& d);

}  // namespace fpl
