#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "shiftlab/caps.hpp"
#include "shiftlab/rational.hpp"

namespace shiftlab {

// Assignments with domain restricted to `domain` and a set of forbidden
// restrictions. A constraint is violated when the assignment restricted to
// the domain equals a forbidden row.
struct CspConstraint {
  std::vector<std::uint32_t> domain;
  std::vector<std::vector<int>> forbidden;  // rows aligned with domain, sorted
};

// Variables 0..num_vars-1, ambient colors 0..num_colors-1, per-variable
// allowed lists (sorted, nonempty).
struct Csp {
  std::uint32_t num_vars = 0;
  int num_colors = 0;
  std::vector<std::vector<int>> lists;
  std::vector<CspConstraint> constraints;
};

inline CspConstraint make_constraint(std::uint32_t num_vars, std::vector<std::uint32_t> domain,
                                     std::vector<std::vector<int>> forbidden) {
  if (domain.empty()) throw std::domain_error("constraint domain must be nonempty");
  for (auto v : domain)
    if (v >= num_vars) throw std::domain_error("constraint variable out of range");
  auto sorted = domain;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::domain_error("constraint domain has a duplicate variable");
  for (const auto& row : forbidden) {
    if (row.size() != domain.size())
      throw std::domain_error("forbidden row not aligned with constraint domain");
    for (int c : row)
      if (c < 0) throw std::domain_error("forbidden row has a negative color");
  }
  std::sort(forbidden.begin(), forbidden.end());
  forbidden.erase(std::unique(forbidden.begin(), forbidden.end()), forbidden.end());
  return CspConstraint{std::move(domain), std::move(forbidden)};
}

inline Csp make_csp(std::uint32_t num_vars, int num_colors,
                    std::vector<CspConstraint> constraints) {
  if (num_colors < 1) throw std::domain_error("csp needs at least one color");
  Csp csp;
  csp.num_vars = num_vars;
  csp.num_colors = num_colors;
  std::vector<int> full(static_cast<std::size_t>(num_colors));
  std::iota(full.begin(), full.end(), 0);
  csp.lists.assign(num_vars, full);
  csp.constraints = std::move(constraints);
  for (const auto& c : csp.constraints)
    for (auto v : c.domain)
      if (v >= num_vars) throw std::domain_error("constraint variable out of range");
  return csp;
}

inline Csp make_list_csp(int num_colors, std::vector<std::vector<int>> lists,
                         std::vector<CspConstraint> constraints) {
  Csp csp = make_csp(static_cast<std::uint32_t>(lists.size()), num_colors, std::move(constraints));
  for (auto& list : lists) {
    if (list.empty()) throw std::domain_error("color list must be nonempty");
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    for (int c : list)
      if (c < 0 || c >= num_colors) throw std::domain_error("list color out of range");
  }
  csp.lists = std::move(lists);
  return csp;
}

inline bool value_in_list(const std::vector<int>& list, int v) {
  return std::binary_search(list.begin(), list.end(), v);
}

inline bool constraint_violated(const CspConstraint& c, const std::vector<int>& assignment) {
  std::vector<int> restricted;
  restricted.reserve(c.domain.size());
  for (auto v : c.domain) restricted.push_back(assignment.at(v));
  return std::binary_search(c.forbidden.begin(), c.forbidden.end(), restricted);
}

// Probability that a uniformly random list-respecting assignment violates c:
// forbidden rows with some color outside its variable's list can never occur
// and do not count.
inline Rat constraint_probability(const CspConstraint& c, const Csp& csp) {
  Int live = 0;
  for (const auto& row : c.forbidden) {
    bool possible = true;
    for (std::size_t i = 0; i < row.size(); ++i)
      if (!value_in_list(csp.lists[c.domain[i]], row[i])) {
        possible = false;
        break;
      }
    if (possible) ++live;
  }
  Int space = 1;
  for (auto v : c.domain) space *= static_cast<std::int64_t>(csp.lists[v].size());
  return Rat(live, space);
}

struct LllParams {
  Rat p;               // max constraint probability
  std::uint64_t d;     // max number of other constraints sharing a variable
  std::uint64_t vdeg;  // max number of constraints through one variable
  std::uint64_t ord;   // max domain size
};

inline LllParams compute_params(const Csp& csp) {
  LllParams out{Rat(0), 0, 0, 0};
  std::vector<std::vector<std::uint32_t>> by_var(csp.num_vars);
  for (std::uint32_t i = 0; i < csp.constraints.size(); ++i) {
    const auto& c = csp.constraints[i];
    out.p = std::max(out.p, constraint_probability(c, csp));
    out.ord = std::max<std::uint64_t>(out.ord, c.domain.size());
    for (auto v : c.domain) by_var[v].push_back(i);
  }
  for (const auto& incident : by_var)
    out.vdeg = std::max<std::uint64_t>(out.vdeg, incident.size());
  for (std::uint32_t i = 0; i < csp.constraints.size(); ++i) {
    std::vector<char> seen(csp.constraints.size(), 0);
    std::uint64_t overlapping = 0;
    for (auto v : csp.constraints[i].domain)
      for (auto j : by_var[v])
        if (j != i && !seen[j]) {
          seen[j] = 1;
          ++overlapping;
        }
    out.d = std::max(out.d, overlapping);
  }
  return out;
}

enum class LllVerdict { pass, fail, undecidable };

struct LllCheck {
  LllVerdict verdict;
  Rat margin;  // 1 minus the checked product, using the decisive interval end
};

// Euler's number enclosed by a rational interval; decisions are exact unless
// the product lands inside the enclosure gap.
inline Rat euler_lower() { return Rat(Int("27182818284"), Int("10000000000")); }
inline Rat euler_upper() { return Rat(Int("27182818285"), Int("10000000000")); }

// e * p * (d+1) <= 1, decided via the interval ends.
inline LllCheck symmetric_lll_from(const Rat& p, std::uint64_t d) {
  Rat x = p * Rat(Int(d) + 1);
  Rat hi = euler_upper() * x;
  Rat lo = euler_lower() * x;
  if (hi <= 1) return LllCheck{LllVerdict::pass, Rat(1) - hi};
  if (lo > 1) return LllCheck{LllVerdict::fail, Rat(1) - lo};
  return LllCheck{LllVerdict::undecidable, Rat(0)};
}

inline LllCheck check_symmetric_lll(const Csp& csp) {
  auto params = compute_params(csp);
  return symmetric_lll_from(params.p, params.d);
}

// p * vdeg^ord < 1, exact and strict.
inline LllCheck continuous_lll_from(const Rat& p, std::uint64_t vdeg, std::uint64_t ord) {
  Rat x = p * rpow(Rat(Int(vdeg)), ord);
  if (x < 1) return LllCheck{LllVerdict::pass, Rat(1) - x};
  return LllCheck{LllVerdict::fail, Rat(1) - x};
}

inline LllCheck check_continuous_lll(const Csp& csp) {
  auto params = compute_params(csp);
  return continuous_lll_from(params.p, params.vdeg, params.ord);
}

namespace detail {
// Odometer over list indices in lexicographic order; returns false when the
// space is exhausted.
inline bool next_list_assignment(const Csp& csp, std::vector<std::size_t>& idx) {
  for (std::size_t i = idx.size(); i-- > 0;) {
    if (idx[i] + 1 < csp.lists[i].size()) {
      ++idx[i];
      for (std::size_t j = i + 1; j < idx.size(); ++j) idx[j] = 0;
      return true;
    }
  }
  return false;
}

inline std::uint64_t assignment_space(const Csp& csp, std::uint64_t cap) {
  std::uint64_t space = 1;
  for (const auto& list : csp.lists) {
    if (space > cap / list.size())
      throw CapExceeded("csp assignment space exceeds cap");
    space *= list.size();
  }
  return space;
}
}  // namespace detail

inline bool csp_satisfied(const Csp& csp, const std::vector<int>& assignment) {
  for (const auto& c : csp.constraints)
    if (constraint_violated(c, assignment)) return false;
  return true;
}

// First satisfying assignment in lexicographic list order, or nothing when
// provably unsatisfiable.
inline std::optional<std::vector<int>> brute_force(const Csp& csp,
                                                   const Caps& caps = default_caps()) {
  detail::assignment_space(csp, caps.brute_force_space);
  if (csp.num_vars == 0) return std::vector<int>{};
  std::vector<std::size_t> idx(csp.num_vars, 0);
  do {
    std::vector<int> assignment(csp.num_vars);
    for (std::uint32_t v = 0; v < csp.num_vars; ++v) assignment[v] = csp.lists[v][idx[v]];
    if (csp_satisfied(csp, assignment)) return assignment;
  } while (detail::next_list_assignment(csp, idx));
  return std::nullopt;
}

inline std::uint64_t count_satisfying(const Csp& csp, const Caps& caps = default_caps()) {
  detail::assignment_space(csp, caps.brute_force_space);
  if (csp.num_vars == 0) return 1;
  std::vector<std::size_t> idx(csp.num_vars, 0);
  std::uint64_t count = 0;
  do {
    std::vector<int> assignment(csp.num_vars);
    for (std::uint32_t v = 0; v < csp.num_vars; ++v) assignment[v] = csp.lists[v][idx[v]];
    if (csp_satisfied(csp, assignment)) ++count;
  } while (detail::next_list_assignment(csp, idx));
  return count;
}

// Uniformization of a list CSP over n = lcm(1..num_colors) colors. Reduced
// color j at variable x decodes to the list entry at j / (n / |C_x|):
// contiguous blocks in color order, every original color having exactly
// n / |C_x| preimages, so constraint probabilities are preserved exactly.
struct ListReduction {
  Csp reduced;
  std::uint64_t n = 0;
  std::vector<std::vector<int>> decode_table;  // per variable, length n

  std::vector<int> decode(const std::vector<int>& reduced_assignment) const {
    std::vector<int> out(reduced_assignment.size());
    for (std::size_t v = 0; v < reduced_assignment.size(); ++v)
      out[v] = decode_table[v].at(static_cast<std::size_t>(reduced_assignment[v]));
    return out;
  }
};

inline ListReduction list_reduction(const Csp& csp, const Caps& caps = default_caps()) {
  Int big_n = lcm_upto(static_cast<std::uint64_t>(csp.num_colors));
  if (big_n > Int(caps.reduced_colors))
    throw CapExceeded("list reduction color count exceeds cap");
  auto n = big_n.convert_to<std::uint64_t>();
  ListReduction out;
  out.n = n;
  out.decode_table.resize(csp.num_vars);
  for (std::uint32_t v = 0; v < csp.num_vars; ++v) {
    std::uint64_t block = n / csp.lists[v].size();
    out.decode_table[v].resize(static_cast<std::size_t>(n));
    for (std::uint64_t j = 0; j < n; ++j)
      out.decode_table[v][static_cast<std::size_t>(j)] =
          csp.lists[v][static_cast<std::size_t>(j / block)];
  }

  std::vector<CspConstraint> lifted;
  for (const auto& c : csp.constraints) {
    // preimage block of each live forbidden row, enumerated extensionally
    std::uint64_t rows = 0;
    std::vector<std::vector<int>> forbidden;
    for (const auto& row : c.forbidden) {
      bool possible = true;
      std::uint64_t combos = 1;
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (!value_in_list(csp.lists[c.domain[i]], row[i])) {
          possible = false;
          break;
        }
        combos *= n / csp.lists[c.domain[i]].size();
      }
      if (!possible) continue;
      rows += combos;
      check_cap(rows, caps.pattern_count, "list reduction forbidden rows");
      // walk the preimage blocks with an odometer
      std::vector<std::uint64_t> lo(row.size()), hi(row.size()), cur(row.size());
      for (std::size_t i = 0; i < row.size(); ++i) {
        const auto& list = csp.lists[c.domain[i]];
        std::uint64_t block = n / list.size();
        auto pos = static_cast<std::uint64_t>(
            std::lower_bound(list.begin(), list.end(), row[i]) - list.begin());
        lo[i] = pos * block;
        hi[i] = (pos + 1) * block;
        cur[i] = lo[i];
      }
      while (true) {
        std::vector<int> lift(row.size());
        for (std::size_t i = 0; i < row.size(); ++i) lift[i] = static_cast<int>(cur[i]);
        forbidden.push_back(std::move(lift));
        std::size_t i = row.size();
        while (i-- > 0) {
          if (++cur[i] < hi[i]) break;
          cur[i] = lo[i];
          if (i == 0) goto block_done;
        }
        if (row.empty()) break;
      }
    block_done:;
    }
    lifted.push_back(make_constraint(csp.num_vars, c.domain, std::move(forbidden)));
  }
  out.reduced = make_csp(csp.num_vars, static_cast<int>(n), std::move(lifted));
  return out;
}

}  // namespace shiftlab
