#include "fpl/sim/explore.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

namespace fpl::sim {

ExploreResult explore(const Scenario& scenario, std::uint64_t k, unsigned threads) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, std::max<std::uint64_t>(k, 1)));

  ExploreResult out;
  out.runs = k;
  std::atomic<std::uint64_t> next{0};
  std::mutex mu;
  auto worker = [&] {
    for (std::uint64_t i = next++; i < k; i = next++) {
      std::uint64_t seed = scenario.seed + i;
      auto result = run(scenario, seed);
      auto verdicts = check_invariants(result.trace);
      bool violated = !all_ok(verdicts);
      if (!violated && result.quiescent) continue;
      std::lock_guard lock(mu);
      if (violated) ++out.violating;
      if (!result.quiescent) ++out.tick_limited;
      if (!out.first_bad_seed || seed < *out.first_bad_seed) {
        out.first_bad_seed = seed;
        out.first_bad_verdicts = std::move(verdicts);
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace fpl::sim
