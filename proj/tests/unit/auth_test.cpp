#include <gtest/gtest.h>

#include <random>

#include "fpl/auth.hpp"
#include "fpl/bytes.hpp"

namespace fpl {
namespace {

PublicKey pk(const std::string& s) { return PublicKey::for_user(s); }

AuthContext ctx(std::set<std::string> signers, Tick now = 0, std::set<ObjectId> oids = {}) {
  AuthContext c;
  for (const auto& s : signers) c.signers.insert(pk(s));
  c.local_time = now;
  c.included_oids = std::move(oids);
  c.event_oracle = [](const std::string& chain, const std::string& ev) { return chain == "eth" && ev == "paid"; };
  return c;
}

// Plain truth-table semantics, written independently of the path machinery.
bool holds(const AuthTerm& t, const AuthContext& c) {
  switch (t.kind) {
    case TermKind::kPublicKey: return c.signers.contains(t.pk);
    case TermKind::kObjectId: return c.included_oids.contains(t.oid);
    case TermKind::kBeforeTime: return c.local_time < t.time;
    case TermKind::kAfterTime: return c.local_time > t.time;
    case TermKind::kEventOccurred: return c.event_oracle(t.chain, t.event);
    case TermKind::kAnd:
      return std::all_of(t.children.begin(), t.children.end(), [&](const AuthTerm& x) { return holds(x, c); });
    case TermKind::kOr:
      return std::any_of(t.children.begin(), t.children.end(), [&](const AuthTerm& x) { return holds(x, c); });
    case TermKind::kThreshold: {
      std::uint64_t w = 0;
      for (std::size_t i = 0; i < t.children.size(); ++i) {
        if (holds(t.children[i], c)) w += t.weights[i];
      }
      return w >= t.threshold;
    }
  }
  return false;
}

AuthTerm random_term(std::mt19937_64& rng, int depth) {
  static const std::vector<std::string> users = {"u0", "u1", "u2", "u3", "u4"};
  auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
  if (depth == 0 || pick(3) == 0) {
    switch (pick(5)) {
      case 0: return AuthTerm::object_id(ObjectId::from_label("obj" + std::to_string(pick(2))));
      case 1: return AuthTerm::before_time(pick(20));
      case 2: return AuthTerm::after_time(pick(20));
      case 3: return AuthTerm::event_occurred("eth", pick(2) ? "paid" : "refunded");
      default: return AuthTerm::public_key(pk(users[pick(5)]));
    }
  }
  int n = 1 + pick(4);
  std::vector<AuthTerm> kids;
  for (int i = 0; i < n; ++i) kids.push_back(random_term(rng, depth - 1));
  switch (pick(3)) {
    case 0: return AuthTerm::all_of(std::move(kids));
    case 1: return AuthTerm::any_of(std::move(kids));
    default: {
      std::vector<std::pair<std::uint64_t, AuthTerm>> w;
      std::uint64_t total = 0;
      for (auto& k : kids) {
        auto wi = 1 + rng() % 3;
        total += wi;
        w.emplace_back(wi, std::move(k));
      }
      return AuthTerm::threshold_of(1 + rng() % total, std::move(w));
    }
  }
}

TEST(Auth, TimeBoundsAreStrict) {
  AuthPath none;
  EXPECT_FALSE(*evaluate(AuthTerm::before_time(10), none, ctx({}, 10)));
  EXPECT_FALSE(*evaluate(AuthTerm::after_time(10), none, ctx({}, 10)));
  EXPECT_TRUE(*evaluate(AuthTerm::before_time(10), none, ctx({}, 9)));
  EXPECT_TRUE(*evaluate(AuthTerm::after_time(10), none, ctx({}, 11)));
}

TEST(Auth, ThresholdTwoOfThree) {
  auto t = AuthTerm::threshold_of(2, {{1, AuthTerm::public_key(pk("a"))},
                                      {1, AuthTerm::public_key(pk("b"))},
                                      {1, AuthTerm::public_key(pk("c"))}});
  EXPECT_FALSE(prove(t, ctx({"a"})));
  auto p = prove(t, ctx({"a", "c"}));
  ASSERT_TRUE(p);
  EXPECT_TRUE(*evaluate(t, *p, ctx({"a", "c"})));
  // The same path does not hold for a different signer set.
  EXPECT_FALSE(*evaluate(t, *p, ctx({"a", "b"})));
}

TEST(Auth, ValidationRejectsBadShapes) {
  EXPECT_EQ(validate(AuthTerm::all_of({})).code(), ErrorCode::kMalformed);
  auto zero_w = AuthTerm::threshold_of(1, {{0, AuthTerm::public_key(pk("a"))}});
  EXPECT_EQ(validate(zero_w).code(), ErrorCode::kMalformed);
  auto zero_t = AuthTerm::threshold_of(0, {{1, AuthTerm::public_key(pk("a"))}});
  EXPECT_EQ(validate(zero_t).code(), ErrorCode::kMalformed);

  AuthTerm deep = AuthTerm::public_key(pk("a"));
  for (std::size_t i = 0; i < kMaxAuthDepth; ++i) deep = AuthTerm::all_of({deep});
  EXPECT_TRUE(validate(deep));
  deep = AuthTerm::all_of({deep});
  EXPECT_EQ(validate(deep).code(), ErrorCode::kDepthExceeded);
}

TEST(Auth, MalformedPathIsAnError) {
  auto t = AuthTerm::any_of({AuthTerm::public_key(pk("a")), AuthTerm::public_key(pk("b"))});
  AuthPath bad{{{5}}};
  EXPECT_EQ(evaluate(t, bad, ctx({"a"})).code(), ErrorCode::kMalformedPath);
  AuthPath two{{{0, 1}}};
  EXPECT_EQ(evaluate(t, two, ctx({"a"})).code(), ErrorCode::kMalformedPath);
}

TEST(Auth, RevealHidesUnpursuedBranches) {
  NonceSource nonces(3);
  auto t = attach_nonces(AuthTerm::any_of({AuthTerm::public_key(pk("a")),
                                           AuthTerm::all_of({AuthTerm::public_key(pk("b")),
                                                             AuthTerm::public_key(pk("c"))})}),
                         nonces);
  auto c = ctx({"a"});
  auto path = prove(t, c);
  ASSERT_TRUE(path);
  auto r = reveal(t, *path);
  ASSERT_TRUE(r);
  ASSERT_EQ(r->children.size(), 2u);
  EXPECT_FALSE(r->children[0].is_hidden());
  EXPECT_TRUE(r->children[1].is_hidden());
  RevealStats stats;
  EXPECT_TRUE(*verify_reveal(commit(t).value(), *r, *path, c, &stats));
  EXPECT_EQ(stats.hidden_nodes, 1u);

  // Pointing the path into the hidden side is refused outright.
  AuthPath other{{{1}}};
  EXPECT_EQ(verify_reveal(commit(t).value(), *r, other, ctx({"b", "c"})).code(), ErrorCode::kInvalidReveal);
}

TEST(Auth, NoncesChangeTheCommitment) {
  auto t = AuthTerm::public_key(pk("a"));
  NonceSource n1(1), n2(2);
  EXPECT_NE(commit(t, n1)->root, commit(t, n2)->root);
}

TEST(AuthProperty, ProveMatchesTruthTableAndRevealsVerify) {
  std::mt19937_64 rng(20261018);
  int satisfied = 0;
  for (int i = 0; i < 3000; ++i) {
    NonceSource nonces(rng());
    auto term = attach_nonces(random_term(rng, 4), nonces);
    ASSERT_TRUE(validate(term));
    std::set<std::string> signers;
    for (int u = 0; u < 5; ++u) {
      if (rng() % 2) signers.insert("u" + std::to_string(u));
    }
    std::set<ObjectId> oids;
    if (rng() % 2) oids.insert(ObjectId::from_label("obj0"));
    auto c = ctx(signers, static_cast<Tick>(rng() % 20), oids);

    auto path = prove(term, c);
    ASSERT_EQ(path.has_value(), holds(term, c)) << "case " << i;
    if (!path) continue;
    ++satisfied;
    EXPECT_TRUE(*evaluate(term, *path, c));
    auto r = reveal(term, *path);
    ASSERT_TRUE(r);
    EXPECT_EQ(reveal_hash(*r).value(), node_hash(term));
    EXPECT_TRUE(*verify_reveal(commit(term).value(), *r, *path, c));

    Encoder e;
    encode(e, *r);
    Decoder d(e.buffer());
    EXPECT_EQ(decode_reveal(d), *r);

    Encoder et;
    encode(et, term);
    Decoder dt(et.buffer());
    EXPECT_EQ(decode_auth_term(dt), term);
  }
  EXPECT_GT(satisfied, 300);
}

}  // namespace
}  // namespace fpl
