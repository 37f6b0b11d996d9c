// Scenario runner: fplsim --scenario FILE [--seed N] [--trace-out FILE] [--explore K]
//                  fplsim --check-only TRACE
// Exit status: 0 clean, 1 invariant violation or tick limit, 2 unreadable input.
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "fpl/sim/checkers.hpp"
#include "fpl/sim/engine.hpp"
#include "fpl/sim/explore.hpp"

namespace {

void print_verdicts(const std::vector<fpl::sim::Verdict>& verdicts) {
  for (const auto& v : verdicts) {
    std::cout << "verdict." << v.checker << "=" << (v.ok() ? "PASS" : "FAIL") << "\n";
    for (const auto& msg : v.violations) std::cout << "violation." << v.checker << "=" << msg << "\n";
    for (const auto& msg : v.notes) std::cout << "note." << v.checker << "=" << msg << "\n";
  }
}

int check_only(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cout << "error=cannot read " << path << "\n";
    return 2;
  }
  auto trace = fpl::sim::Trace::parse(in);
  if (!trace) {
    std::cout << "error=" << trace.error().detail << "\n";
    return 2;
  }
  auto verdicts = fpl::sim::check_invariants(*trace);
  std::cout << "trace=" << path << "\n" << "records=" << trace->records.size() << "\n";
  print_verdicts(verdicts);
  return fpl::sim::all_ok(verdicts) ? 0 : 1;
}

int explore_seeds(const fpl::sim::Scenario& s, std::uint64_t k, unsigned threads) {
  auto r = fpl::sim::explore(s, k, threads);
  std::cout << "scenario=" << s.name << "\n"
            << "scenario_digest=" << s.digest().hex() << "\n"
            << "base_seed=" << s.seed << "\n"
            << "runs=" << r.runs << "\n"
            << "violating=" << r.violating << "\n"
            << "tick_limited=" << r.tick_limited << "\n";
  if (r.first_bad_seed) {
    std::cout << "first_bad_seed=" << *r.first_bad_seed << "\n";
    print_verdicts(r.first_bad_verdicts);
  }
  return r.ok() ? 0 : 1;
}

int run_once(const fpl::sim::Scenario& s, const std::string& trace_out) {
  auto r = fpl::sim::run(s);
  if (!trace_out.empty()) {
    std::ofstream out(trace_out, std::ios::binary);
    out << r.trace.jsonl();
    if (!out) {
      std::cout << "error=cannot write " << trace_out << "\n";
      return 2;
    }
  }
  auto verdicts = fpl::sim::check_invariants(r.trace);
  std::cout << "scenario=" << s.name << "\n"
            << "scenario_digest=" << s.digest().hex() << "\n"
            << "seed=" << r.seed << "\n"
            << "ticks=" << r.ticks << "\n"
            << "quiescent=" << (r.quiescent ? "true" : "false") << "\n"
            << "messages=" << r.messages << "\n"
            << "dropped=" << r.dropped << "\n"
            << "sequenced=" << r.sequenced << "\n";
  for (const auto& c : r.clients) {
    std::string p = "client." + c.action + ".";
    std::cout << p << "kind=" << c.kind << "\n" << p << "status=" << c.status << "\n";
    if (c.kind == "unlock") {
      std::cout << p << "unlock_round_trips=" << c.round_trips << "\n";
    } else if (c.kind != "spend") {
      std::cout << p << "fast_path_round_trips=" << c.round_trips << "\n";
    } else {
      std::cout << p << "round_trips=" << c.round_trips << "\n"
                << p << "spent=" << c.spent << "\n"
                << p << "consolidations=" << c.consolidations << "\n";
    }
    if (c.retransmits) std::cout << p << "retransmits=" << c.retransmits << "\n";
    std::cout << p << "elapsed=" << c.elapsed << "\n";
  }
  print_verdicts(verdicts);
  if (!r.quiescent) std::cout << "error=TickLimitExceeded\n";
  return fpl::sim::all_ok(verdicts) && r.quiescent ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fpledger scenario runner"};
  std::string scenario_path, trace_out, check_path;
  std::optional<std::uint64_t> seed;
  std::uint64_t explore_k = 0;
  unsigned threads = 0;
  auto* scen = app.add_option("--scenario", scenario_path, "scenario file (JSON)");
  app.add_option("--seed", seed, "override the scenario seed");
  app.add_option("--trace-out", trace_out, "write the JSONL trace here");
  app.add_option("--explore", explore_k, "run K seeds starting at the scenario seed")->check(CLI::PositiveNumber);
  app.add_option("--threads", threads, "explore workers (0 = hardware concurrency)");
  auto* chk = app.add_option("--check-only", check_path, "re-check a recorded trace");
  scen->excludes(chk);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  if (!check_path.empty()) return check_only(check_path);
  if (scenario_path.empty()) {
    std::cout << "error=--scenario or --check-only is required\n";
    return 2;
  }
  auto scenario = fpl::sim::load_scenario(scenario_path);
  if (!scenario) {
    std::cout << "error=ScenarioInvalid: " << scenario.error().detail << "\n";
    return 2;
  }
  auto s = std::move(scenario).value();
  if (seed) s.seed = *seed;
  if (explore_k > 0) return explore_seeds(s, explore_k, threads);
  return run_once(s, trace_out);
}
