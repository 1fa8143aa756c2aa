#pragma once

#include <cstdint>
#include <set>
#include <stdexcept>
#include <vector>

#include "shiftlab/csp.hpp"
#include "shiftlab/rng.hpp"

namespace shiftlab {

enum class SolveStatus { solved, budget_exhausted };

// assignment is satisfying exactly when status == solved; on budget
// exhaustion it holds the final resampled state for diagnosis.
struct SolveResult {
  SolveStatus status = SolveStatus::budget_exhausted;
  std::vector<int> assignment;
  std::uint64_t resamples = 0;
  std::uint64_t seed = 0;
};

// Random initial assignment, then repeatedly resample the lowest-indexed
// violated constraint's variables until none is violated or the budget runs
// out. All draws come from the counter generator keyed by (seed, resample
// event, variable): event 0 is the initial assignment, events 1,2,... are
// the resampling steps, so a run is replayable from (seed) alone.
inline SolveResult moser_tardos(const Csp& csp, std::uint64_t seed,
                                std::uint64_t max_resamples) {
  SolveResult out;
  out.seed = seed;
  out.assignment.resize(csp.num_vars);
  for (std::uint32_t v = 0; v < csp.num_vars; ++v) {
    const auto& list = csp.lists[v];
    if (list.empty()) throw std::domain_error("moser_tardos: empty color list");
    out.assignment[v] = list[rng::uniform_below(seed, 0, v, list.size())];
  }

  std::vector<std::vector<std::uint32_t>> by_var(csp.num_vars);
  for (std::uint32_t i = 0; i < csp.constraints.size(); ++i)
    for (auto v : csp.constraints[i].domain) by_var[v].push_back(i);

  std::set<std::uint32_t> violated;
  for (std::uint32_t i = 0; i < csp.constraints.size(); ++i)
    if (constraint_violated(csp.constraints[i], out.assignment)) violated.insert(i);

  while (!violated.empty() && out.resamples < max_resamples) {
    std::uint32_t target = *violated.begin();
    ++out.resamples;
    for (auto v : csp.constraints[target].domain) {
      const auto& list = csp.lists[v];
      out.assignment[v] = list[rng::uniform_below(seed, out.resamples, v, list.size())];
    }
    for (auto v : csp.constraints[target].domain)
      for (auto j : by_var[v]) {
        if (constraint_violated(csp.constraints[j], out.assignment))
          violated.insert(j);
        else
          violated.erase(j);
      }
  }

  if (violated.empty()) {
    if (!csp_satisfied(csp, out.assignment))
      throw std::logic_error("moser_tardos: violation bookkeeping disagrees with full scan");
    out.status = SolveStatus::solved;
  }
  return out;
}

}  // namespace shiftlab
