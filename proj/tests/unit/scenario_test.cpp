#include <gtest/gtest.h>

#include "fpl/sim/checkers.hpp"
#include "fpl/sim/engine.hpp"
#include "fpl/sim/scenario.hpp"

namespace fpl::sim {
namespace {

using nlohmann::json;

json minimal() {
  return json::parse(R"({
    "name": "t", "committee": {"n": 4, "f": 1}, "seed": 3,
    "objects": [{"label": "A", "kind": "owned", "owner": "alice", "balance": 10},
                {"label": "gas", "kind": "owned", "owner": "alice", "balance": 50}],
    "script": [{"id": "pay", "do": "transfer", "at": 0, "inputs": ["A"], "gas": "gas", "to": "bob"}]
  })");
}

TEST(ParseScenario, AcceptsMinimal) {
  auto s = parse_scenario(minimal());
  ASSERT_TRUE(s) << s.error().detail;
  EXPECT_EQ(s->params.n, 4u);
  EXPECT_EQ(s->objects.size(), 2u);
  ASSERT_NE(s->action("pay"), nullptr);
  EXPECT_EQ(s->action("pay")->kind, "transfer");
}

TEST(ParseScenario, RejectsSchemaErrors) {
  auto doc = minimal();
  doc["committee"]["n"] = 3;
  EXPECT_EQ(parse_scenario(doc).code(), ErrorCode::kMalformed);

  doc = minimal();
  doc["faults"] = json::array({{{"validator", 0}, {"behavior", "Equivocator"}}, {{"validator", 1}, {"crash_at", 5}}});
  EXPECT_EQ(parse_scenario(doc).code(), ErrorCode::kMalformed);

  doc = minimal();
  doc["script"][0]["gas"] = "nope";
  EXPECT_EQ(parse_scenario(doc).code(), ErrorCode::kMalformed);

  doc = minimal();
  doc["script"].push_back(doc["script"][0]);
  EXPECT_EQ(parse_scenario(doc).code(), ErrorCode::kMalformed);

  doc = minimal();
  doc["script"][0]["do"] = "teleport";
  EXPECT_EQ(parse_scenario(doc).code(), ErrorCode::kMalformed);
}

TEST(ParseScenario, KeyRefs) {
  EXPECT_EQ(parse_key_ref("A"), (std::pair<std::string, std::optional<Version>>{"A", std::nullopt}));
  EXPECT_EQ(parse_key_ref("A@3"), (std::pair<std::string, std::optional<Version>>{"A", 3}));
}

TEST(ParseScenario, LoadsEveryShippedScenario) {
  for (const auto& e : std::filesystem::directory_iterator(FPL_SCENARIO_DIR)) {
    if (e.path().extension() != ".json") continue;
    auto s = load_scenario(e.path());
    EXPECT_TRUE(s) << e.path() << ": " << (s ? "" : s.error().detail);
  }
  EXPECT_FALSE(load_scenario(std::filesystem::path(FPL_SCENARIO_DIR) / "invalid" / "too-many-faults.json"));
}

TEST(Run, SameSeedSameTrace) {
  auto s = parse_scenario(minimal()).value();
  auto a = run(s, 11);
  auto b = run(s, 11);
  EXPECT_EQ(a.trace.jsonl(), b.trace.jsonl());
  auto c = run(s, 12);
  EXPECT_TRUE(a.quiescent);
  EXPECT_TRUE(all_ok(check_invariants(a.trace)));
  EXPECT_TRUE(all_ok(check_invariants(c.trace)));
}

TEST(Run, TraceRoundTripsThroughJsonl) {
  auto r = run(parse_scenario(minimal()).value());
  auto parsed = Trace::parse(r.trace.jsonl());
  ASSERT_TRUE(parsed);
  EXPECT_EQ(parsed->records.size(), r.trace.records.size());
  EXPECT_EQ(parsed->jsonl(), r.trace.jsonl());
  for (const auto& rec : r.trace.records) {
    auto it = rec.begin();
    ASSERT_EQ(it.key(), "tick");
    ASSERT_EQ((++it).key(), "actor");
    ASSERT_EQ((++it).key(), "kind");
  }
}

TEST(Run, UncontendedTransferSummary) {
  auto r = run(parse_scenario(minimal()).value());
  const auto* pay = r.client("pay");
  ASSERT_NE(pay, nullptr);
  EXPECT_EQ(pay->status, "Finalized");
  EXPECT_EQ(pay->round_trips, 2);
  EXPECT_EQ(r.client("missing"), nullptr);
}

}  // namespace
}  // namespace fpl::sim

namespace fpl::sim {
namespace {

// A debit executed on the fast path by a validator that did not vote for the
// consolidation must not survive it.
TEST(Run, UncountedFastDebitIsRolledBackByConsolidation) {
  auto s = load_scenario(std::filesystem::path(FPL_SCENARIO_DIR) / "bounded-spend-adversary.json");
  ASSERT_TRUE(s);
  auto r = run(*s, 885);
  for (const auto& v : check_invariants(r.trace)) {
    EXPECT_TRUE(v.ok()) << v.checker << ": " << (v.violations.empty() ? "" : v.violations.front());
  }
}

}  // namespace
}  // namespace fpl::sim
