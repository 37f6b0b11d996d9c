#include <gtest/gtest.h>

#include "fpl/sim/checkers.hpp"
#include "fpl/sim/engine.hpp"
#include "fpl/sim/scenario.hpp"

namespace fpl::sim {
namespace {

Trace trace_of(const std::string& name, std::uint64_t seed = 1) {
  auto s = load_scenario(std::filesystem::path(FPL_SCENARIO_DIR) / (name + ".json"));
  EXPECT_TRUE(s);
  return run(s.value(), seed).trace;
}

const Verdict& verdict(const std::vector<Verdict>& all, const std::string& name) {
  for (const auto& v : all) {
    if (v.checker == name) return v;
  }
  throw std::runtime_error("no checker " + name);
}

Record* first(Trace& t, const std::string& kind) {
  for (auto& r : t.records) {
    if (r.at("kind") == kind) return &r;
  }
  return nullptr;
}

TEST(Checkers, RegistryOrderMatchesVerdicts) {
  auto t = trace_of("uncontended-transfer");
  auto v = check_invariants(t);
  ASSERT_EQ(v.size(), checker_names().size());
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v[i].checker, checker_names()[i]);
  EXPECT_TRUE(all_ok(v));
}

TEST(CheckerMutation, LostFinalizedTxFlagsClientSafety) {
  auto t = trace_of("uncontended-transfer");
  Record* fin = first(t, "FinalState");
  ASSERT_NE(fin, nullptr);
  ASSERT_FALSE(fin->at("executed").empty());
  (*fin)["executed"] = Record::array();
  EXPECT_FALSE(verdict(check_invariants(t), "client_safety").ok());
}

TEST(CheckerMutation, ForgedUnauthorizedCertFlagsStarvation) {
  auto t = trace_of("unauthorized-unlock");
  ASSERT_TRUE(all_ok(check_invariants(t)));
  std::string digest;
  for (const auto& r : t.records) {
    if (r.at("kind") == "ClientStart" && r.at("action") == "unlock" && !r.value("authorized", true)) {
      digest = r.at("digest");
    }
  }
  ASSERT_FALSE(digest.empty());
  Record forged;
  forged["tick"] = t.records.back().at("tick");
  forged["actor"] = "mallory";
  forged["kind"] = "UnlockCertAssembled";
  forged["rqt"] = digest;
  t.records.insert(t.records.end() - 1, forged);
  EXPECT_FALSE(verdict(check_invariants(t), "starvation_freedom").ok());
}

TEST(CheckerMutation, DroppedSequenceNumberFlagsAgreement) {
  auto t = trace_of("uncontended-transfer");
  auto it = std::find_if(t.records.begin(), t.records.end(), [](const Record& r) { return r.at("kind") == "Sequenced"; });
  ASSERT_NE(it, t.records.end());
  t.records.erase(it);
  EXPECT_FALSE(verdict(check_invariants(t), "sequencer_agreement").ok());
}

TEST(CheckerMutation, SkippedVersionFlagsContinuity) {
  auto t = trace_of("uncontended-transfer");
  Record* fx = first(t, "EffectSign");
  ASSERT_NE(fx, nullptr);
  auto& produced = (*fx)["produced"][0];
  auto key = produced.at("key").get<std::string>();
  produced["key"] = key.substr(0, key.rfind('@')) + "@9";
  EXPECT_FALSE(verdict(check_invariants(t), "version_continuity").ok());
}

TEST(CheckerMutation, LoweredCounterCapFlagsBoundedCounter) {
  auto t = trace_of("bounded-spend");
  ASSERT_TRUE(all_ok(check_invariants(t)));
  Record* start = first(t, "ScenarioStart");
  ASSERT_NE(start, nullptr);
  for (auto& [label, max] : (*start)["counters"].items()) max = 10;
  EXPECT_FALSE(verdict(check_invariants(t), "bounded_counter_safety").ok());
}

}  // namespace
}  // namespace fpl::sim
