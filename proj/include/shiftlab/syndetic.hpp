#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "shiftlab/action.hpp"
#include "shiftlab/caps.hpp"
#include "shiftlab/group.hpp"
#include "shiftlab/subset.hpp"

namespace shiftlab {

namespace detail {
// Resolve subset elements to group indices once, so the hot loops can use
// table rows directly.
inline std::vector<std::size_t> subset_indices(const ActionPtr& action, const GroupSubset& s) {
  require_same_group(action->group(), s.group(), "action subset");
  std::vector<std::size_t> out;
  out.reserve(s.size());
  for (const auto& e : s.elems()) out.push_back(action->group()->index_of(e));
  return out;
}
}  // namespace detail

// {x : D.x subset of A}
inline PointSet core_set(const ActionPtr& action, const PointSet& A, const GroupSubset& D) {
  auto ds = detail::subset_indices(action, D);
  PointSet out;
  for (std::uint32_t p = 0; p < action->size(); ++p) {
    bool inside = true;
    for (auto d : ds)
      if (!point_in(A, action->apply_index(d, p))) {
        inside = false;
        break;
      }
    if (inside) out.push_back(p);
  }
  return out;
}

// Every point has some sigma in S with sigma.x in A.
inline bool is_syndetic(const ActionPtr& action, const PointSet& A, const GroupSubset& S) {
  auto ss = detail::subset_indices(action, S);
  for (std::uint32_t p = 0; p < action->size(); ++p) {
    bool hit = false;
    for (auto s : ss)
      if (point_in(A, action->apply_index(s, p))) {
        hit = true;
        break;
      }
    if (!hit) return false;
  }
  return true;
}

inline bool is_sd_syndetic(const ActionPtr& action, const PointSet& A, const GroupSubset& S,
                           const GroupSubset& D) {
  return is_syndetic(action, core_set(action, A, D), S);
}

// Independence in the Schreier graph of S: no two distinct points of A are
// related by an element of S or its inverse.
inline bool is_separated(const ActionPtr& action, const PointSet& A, const GroupSubset& S) {
  auto ss = detail::subset_indices(action, symmetrize(S, false));
  for (auto p : A)
    for (auto s : ss) {
      auto q = action->apply_index(s, p);
      if (q != p && point_in(A, q)) return false;
    }
  return true;
}

// Greedy maximal S-separated subset of V, scanning points in index order.
inline PointSet greedy_separated(const ActionPtr& action, const PointSet& V,
                                 const GroupSubset& S) {
  auto ss = detail::subset_indices(action, symmetrize(S, false));
  std::vector<char> in(action->size(), 0);
  PointSet out;
  for (auto p : V) {
    bool blocked = false;
    for (auto s : ss) {
      auto q = action->apply_index(s, p);
      if (q != p && in[q]) {
        blocked = true;
        break;
      }
    }
    if (!blocked) {
      in[p] = 1;
      out.push_back(p);
    }
  }
  return out;
}

enum class SdSearchMode { automatic, exact, greedy };

// Witness for (S,D)-separation: an S-separated set whose D-translates cover
// A. exhaustive is true when the exact search ran to completion, so an empty
// result proves no witness exists.
struct SdWitness {
  std::optional<PointSet> witness;
  bool exhaustive = false;
};

namespace detail {

struct SdSearch {
  const ActionPtr& action;
  const PointSet& A;
  std::vector<std::size_t> sep_steps;
  std::vector<std::size_t> d_steps;
  std::vector<PointSet> covers;  // per element of A: candidate witness points
  std::vector<char> chosen;
  std::vector<int> cover_count;  // per element of A
  std::uint64_t nodes = 0;
  std::uint64_t node_cap = 0;
  bool aborted = false;

  bool conflict(std::uint32_t p) const {
    for (auto s : sep_steps) {
      auto q = action->apply_index(s, p);
      if (q != p && chosen[q]) return true;
    }
    return chosen[p];
  }

  void toggle(std::uint32_t p, int delta) {
    chosen[p] = delta > 0;
    for (auto d : d_steps) {
      auto q = action->apply_index(d, p);
      auto it = std::lower_bound(A.begin(), A.end(), q);
      if (it != A.end() && *it == q) cover_count[static_cast<std::size_t>(it - A.begin())] += delta;
    }
  }

  bool run(PointSet& out) {
    if (++nodes > node_cap) {
      aborted = true;
      return false;
    }
    std::size_t first = 0;
    while (first < A.size() && cover_count[first] > 0) ++first;
    if (first == A.size()) {
      for (std::uint32_t p = 0; p < chosen.size(); ++p)
        if (chosen[p]) out.push_back(p);
      return true;
    }
    for (auto p : covers[first]) {
      if (conflict(p)) continue;
      toggle(p, 1);
      if (run(out)) return true;
      toggle(p, -1);
      if (aborted) return false;
    }
    return false;
  }
};

}  // namespace detail

// Searches for an S-separated A' with A contained in D.A'. Exact backtracking
// below the node cap; greedy candidate otherwise (automatic mode) or an error
// (exact mode).
inline SdWitness sd_separated(const ActionPtr& action, const PointSet& A, const GroupSubset& S,
                              const GroupSubset& D, SdSearchMode mode = SdSearchMode::automatic,
                              const Caps& caps = default_caps()) {
  auto d_steps = detail::subset_indices(action, D);
  // candidates covering a: all p with a in D.p
  auto cover_candidates = [&](std::uint32_t a) {
    PointSet out;
    for (std::uint32_t p = 0; p < action->size(); ++p)
      for (auto d : d_steps)
        if (action->apply_index(d, p) == a) {
          out.push_back(p);
          break;
        }
    return out;
  };

  if (mode != SdSearchMode::greedy) {
    detail::SdSearch search{action,
                            A,
                            detail::subset_indices(action, symmetrize(S, false)),
                            d_steps,
                            {},
                            std::vector<char>(action->size(), 0),
                            std::vector<int>(A.size(), 0)};
    search.node_cap = caps.search_nodes;
    for (auto a : A) search.covers.push_back(cover_candidates(a));
    PointSet found;
    bool ok = search.run(found);
    if (!search.aborted) return SdWitness{ok ? std::optional<PointSet>(found) : std::nullopt, true};
    if (mode == SdSearchMode::exact)
      throw CapExceeded("sd_separated: exact search exceeded node cap");
  }

  // greedy candidate: walk points in index order, keep those that are
  // separated from the picks so far and cover something new
  auto sep_steps = detail::subset_indices(action, symmetrize(S, false));
  std::vector<char> chosen(action->size(), 0);
  std::vector<char> covered(A.size(), 0);
  std::size_t remaining = A.size();
  PointSet picks;
  for (std::uint32_t p = 0; p < action->size() && remaining > 0; ++p) {
    bool blocked = chosen[p] != 0;
    for (auto s : sep_steps) {
      if (blocked) break;
      auto q = action->apply_index(s, p);
      if (q != p && chosen[q]) blocked = true;
    }
    if (blocked) continue;
    bool useful = false;
    for (auto d : d_steps) {
      auto q = action->apply_index(d, p);
      auto it = std::lower_bound(A.begin(), A.end(), q);
      if (it != A.end() && *it == q && !covered[static_cast<std::size_t>(it - A.begin())])
        useful = true;
    }
    if (!useful) continue;
    chosen[p] = 1;
    picks.push_back(p);
    for (auto d : d_steps) {
      auto q = action->apply_index(d, p);
      auto it = std::lower_bound(A.begin(), A.end(), q);
      if (it != A.end() && *it == q) {
        auto idx = static_cast<std::size_t>(it - A.begin());
        if (!covered[idx]) {
          covered[idx] = 1;
          --remaining;
        }
      }
    }
  }
  if (remaining == 0) return SdWitness{picks, false};
  return SdWitness{std::nullopt, false};
}

namespace detail {
inline void require_superset(const GroupSubset& big, const GroupSubset& small,
                             const std::string& what) {
  if (!subset_of(small, big)) throw std::domain_error("split hypothesis failed: " + what);
}
}  // namespace detail

// V minus a separated net. residue keeps syndeticity for the next round; the
// net is separated yet still syndetic for the grown marker set.
struct PlainSplit {
  PointSet residue;  // stays R-syndetic
  PointSet net;      // S-separated and T_next-syndetic
};

// Splits a T-syndetic V into net = greedy maximal S-separated subset of V and
// residue = V minus net. Requires: T.delta disjoint from T, R contains T and
// T.delta, S contains R.R^-1, T_next contains symmetrize(S).T, free action.
// All three advertised properties of the output are re-verified.
inline PlainSplit split_syndetic_plain(const ActionPtr& action, const PointSet& V,
                                       const GroupSubset& T, const Elem& delta,
                                       const GroupSubset& R, const GroupSubset& S,
                                       const GroupSubset& T_next, const Caps& caps = default_caps()) {
  auto g = action->group();
  g->check_element(delta);
  auto t_delta = subset_product(T, GroupSubset(g, {delta}), caps);
  if (!subset_intersection(T, t_delta).is_empty())
    throw std::domain_error("split hypothesis failed: T and T.delta intersect");
  detail::require_superset(R, T, "R must contain T");
  detail::require_superset(R, t_delta, "R must contain T.delta");
  detail::require_superset(S, subset_product(R, subset_inverse(R), caps), "S must contain R.R^-1");
  detail::require_superset(T_next, subset_product(symmetrize(S, true), T, caps),
                           "T_next must contain symmetrize(S).T");
  if (!action->is_free()) throw std::domain_error("split requires a free action");
  if (!is_syndetic(action, V, T))
    throw std::domain_error("split hypothesis failed: V is not T-syndetic");

  PlainSplit out;
  out.net = greedy_separated(action, V, S);
  out.residue = point_difference(V, out.net);

  if (point_union(out.residue, out.net) != V || !point_intersection(out.residue, out.net).empty())
    throw std::logic_error("split postcondition failed: not a partition of V");
  if (!is_syndetic(action, out.residue, R))
    throw std::logic_error("split postcondition failed: residue not R-syndetic");
  if (!is_separated(action, out.net, S))
    throw std::logic_error("split postcondition failed: net not S-separated");
  if (!is_syndetic(action, out.net, T_next))
    throw std::logic_error("split postcondition failed: net not T_next-syndetic");
  return out;
}

// Core-based split. net_witness is the S-separated set whose D-translates
// form the net.
struct CoreSplit {
  PointSet residue;      // stays (R,D)-syndetic
  PointSet net;          // (S,D)-separated and (T_next,D)-syndetic
  PointSet net_witness;  // S-separated, net = D.net_witness
};

// Splits a (T,D)-syndetic V: net_witness = greedy maximal S-separated subset
// of the D-core of V, net = D.net_witness, residue = V minus net. Requires:
// |Q| > |T||D|^2, R contains T.Q, S contains D^2.R.R^-1.D^2, T_next contains
// symmetrize(S).T, free action. Output properties are re-verified.
inline CoreSplit split_syndetic_d(const ActionPtr& action, const PointSet& V,
                                  const GroupSubset& T, const GroupSubset& Q,
                                  const GroupSubset& R, const GroupSubset& S,
                                  const GroupSubset& T_next, const GroupSubset& D,
                                  const Caps& caps = default_caps()) {
  if (Q.size() <= T.size() * D.size() * D.size())
    throw std::domain_error("split hypothesis failed: need |Q| > |T||D|^2");
  detail::require_superset(R, subset_product(T, Q, caps), "R must contain T.Q");
  auto d2 = subset_power(D, 2, caps);
  auto rr = subset_product(R, subset_inverse(R), caps);
  detail::require_superset(S, subset_product(subset_product(d2, rr, caps), d2, caps),
                           "S must contain D^2.R.R^-1.D^2");
  detail::require_superset(T_next, subset_product(symmetrize(S, true), T, caps),
                           "T_next must contain symmetrize(S).T");
  if (!action->is_free()) throw std::domain_error("split requires a free action");
  if (!is_sd_syndetic(action, V, T, D))
    throw std::domain_error("split hypothesis failed: V is not (T,D)-syndetic");

  CoreSplit out;
  auto v_core = core_set(action, V, D);
  out.net_witness = greedy_separated(action, v_core, S);
  out.net = set_image(*action, D, out.net_witness);
  out.residue = point_difference(V, out.net);

  if (point_union(out.residue, out.net) != V || !point_intersection(out.residue, out.net).empty())
    throw std::logic_error("split postcondition failed: not a partition of V");
  if (!is_sd_syndetic(action, out.residue, R, D))
    throw std::logic_error("split postcondition failed: residue not (R,D)-syndetic");
  if (!is_separated(action, out.net_witness, S))
    throw std::logic_error("split postcondition failed: witness not S-separated");
  if (!point_difference(out.net, set_image(*action, D, out.net_witness)).empty())
    throw std::logic_error("split postcondition failed: net not covered by D.witness");
  if (!is_sd_syndetic(action, out.net, T_next, D))
    throw std::logic_error("split postcondition failed: net not (T_next,D)-syndetic");
  return out;
}

}  // namespace shiftlab
