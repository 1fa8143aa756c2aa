#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "action.hpp"
#include "caps.hpp"
#include "config.hpp"
#include "csp.hpp"
#include "graph.hpp"
#include "group.hpp"
#include "moser_tardos.hpp"
#include "schedule.hpp"
#include "subset.hpp"
#include "syndetic.hpp"

namespace shiftlab {

namespace detail {

inline GroupSubset full_subset(const GroupPtr& g) {
  if (!g->finite()) throw std::domain_error("full subset: group must be finite");
  std::vector<Elem> elems;
  elems.reserve(g->order());
  for (std::uint64_t i = 0; i < g->order(); ++i) elems.push_back(g->element_at(i));
  return GroupSubset(g, std::move(elems));
}

inline bool agree_on(const Configuration& x, const Configuration& y, const GroupSubset& w) {
  for (const Elem& e : w.elems())
    if (config_at(x, e) != config_at(y, e)) return false;
  return true;
}

// Smallest symmetric superset of seed, in canonical element order, passing pred.
template <typename Pred>
GroupSubset grow_symmetric(const GroupPtr& g, GroupSubset s, Pred&& pred, const char* what) {
  std::uint64_t next = 0;
  while (!pred(s)) {
    for (;;) {
      if (next >= g->order())
        throw std::domain_error(std::string(what) + ": no determining set inside the group");
      Elem e = g->element_at(next++);
      if (s.contains(e)) continue;
      s = subset_union(s, GroupSubset(g, {e, g->inv(e)}));
      break;
    }
  }
  return s;
}

inline std::optional<std::uint32_t> point_of(const FiniteAction& a,
                                             const std::vector<int>& values) {
  const auto& cs = a.configs();
  auto it = std::lower_bound(
      cs.begin(), cs.end(), values,
      [](const Configuration& c, const std::vector<int>& v) { return c.values < v; });
  if (it == cs.end() || it->values != values) return std::nullopt;
  return static_cast<std::uint32_t>(it - cs.begin());
}

// True when base^exp stays within cap.
inline bool pow_within(std::uint64_t base, std::uint64_t exp, std::uint64_t cap) {
  std::uint64_t acc = 1;
  for (std::uint64_t i = 0; i < exp; ++i) {
    if (base != 0 && acc > cap / base) return false;
    acc *= base;
    if (acc > cap) return false;
  }
  return true;
}

// Window whose restriction pins the rule value: any two points agreeing on the
// returned set take the same value.
inline GroupSubset determining_window(const PointFunction& rho) {
  const FiniteAction& a = *rho.action;
  const GroupPtr& g = a.group();
  auto pins = [&](const GroupSubset& s) {
    std::map<std::vector<int>, int> seen;
    for (std::uint32_t p = 0; p < a.size(); ++p) {
      std::vector<int> pat;
      pat.reserve(s.size());
      for (const Elem& e : s.elems()) pat.push_back(config_at(a.configs()[p], e));
      auto [it, fresh] = seen.emplace(std::move(pat), rho.values[p]);
      if (!fresh && it->second != rho.values[p]) return false;
    }
    return true;
  };
  return grow_symmetric(g, GroupSubset::identity_of(g), pins, "determining window");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Marker coloring with trivial stabilizer.
//
// On the free part of 3^G, two marker sets pin the value at the identity while
// forcing color 2 on the whole window F.  Any proper ell-coloring extending the
// marker assignment codes every point to an aperiodic image.

struct TrivialStabColoring {
  ActionPtr action;  // shift on the free part of 3^G
  PointSet J0, J1;
  PointFunction f;
  GroupSubset stab;  // exhaustively computed; always the identity on success
};

inline TrivialStabColoring trivial_stab_coloring(const GroupPtr& g, const GroupSubset& F,
                                                 int ell,
                                                 const Caps& caps = default_caps()) {
  require_same_group(g, F.group(), "trivial stab coloring");
  if (F.is_empty() || F.contains_identity() || !F.is_symmetric())
    throw std::domain_error("trivial stab coloring: F must be symmetric without identity");
  if (ell < static_cast<int>(F.size()) + 1)
    throw std::domain_error("trivial stab coloring: need at least |F|+1 colors");

  auto configs = free_part(g, 3, caps);
  if (configs.empty()) throw std::domain_error("trivial stab coloring: free part is empty");
  ActionPtr action = FiniteAction::shift_action(std::move(configs));

  PointSet J0, J1;
  for (std::uint32_t p = 0; p < action->size(); ++p) {
    const Configuration& x = action->configs()[p];
    bool marker = true;
    for (const Elem& s : F.elems())
      if (config_at(x, s) != 2) {
        marker = false;
        break;
      }
    if (!marker) continue;
    int v = config_at(x, g->identity());
    if (v == 0) J0.push_back(p);
    if (v == 1) J1.push_back(p);
  }
  if (J0.empty() || J1.empty())
    throw std::domain_error("trivial stab coloring: marker set empty on this surrogate");

  GraphPtr graph = schreier_graph(action, F);
  if (!point_intersection(J0, J1).empty())
    throw std::logic_error("trivial stab coloring: marker sets intersect");
  if (!is_independent(graph, point_union(J0, J1)))
    throw std::logic_error("trivial stab coloring: marker union is not independent");

  std::vector<int> colors(action->size(), -1);
  for (auto p : J0) colors[p] = 0;
  for (auto p : J1) colors[p] = 1;
  PartialColoring full =
      extend_proper_coloring(graph, make_partial_coloring(graph, colors), ell);
  PointFunction f = make_point_function(action, ell, full.colors);
  for (auto p : J0)
    if (f.values[p] != 0) throw std::logic_error("trivial stab coloring: marker value lost");
  for (auto p : J1)
    if (f.values[p] != 1) throw std::logic_error("trivial stab coloring: marker value lost");

  GroupSubset stab = map_stabilizer(f);
  if (!(stab == GroupSubset::identity_of(g)))
    throw std::domain_error("trivial stab coloring: stabilizer is not trivial on this surrogate");
  return TrivialStabColoring{action, std::move(J0), std::move(J1), std::move(f),
                             std::move(stab)};
}

// ---------------------------------------------------------------------------
// Coset indicator verification.
//
// The indicator rule of a normal subgroup H codes the free part of k^G into
// the shift of configurations constant on cosets of H, and the stabilizer of
// that coding map is exactly H.

struct CosetReport {
  ActionPtr action;
  PointFunction rule;
  Sft coset_sft;      // window H, constant patterns only
  bool image_in_sft;  // every coding image checked
  GroupSubset stab;
  bool stab_matches;  // stab == H
};

inline CosetReport verify_coset_stabilizer(const GroupPtr& g, const GroupSubset& H, int k,
                                           const Caps& caps = default_caps()) {
  require_same_group(g, H.group(), "coset stabilizer");
  if (!is_subgroup(H) || !is_normal_subgroup(H))
    throw std::domain_error("coset stabilizer: H must be a normal subgroup");
  if (k < 2) throw std::domain_error("coset stabilizer: need at least two symbols");

  auto configs = free_part(g, k, caps);
  if (configs.empty()) throw std::domain_error("coset stabilizer: free part is empty");
  ActionPtr action = FiniteAction::shift_action(std::move(configs));
  PointFunction rule = coset_indicator_rule(action, H, k);

  std::vector<std::vector<int>> allowed;
  for (int c = 0; c < k; ++c) allowed.emplace_back(H.size(), c);
  Sft sft = make_sft(g, k, H, std::move(allowed));

  bool image_ok = true;
  for (std::uint32_t p = 0; p < action->size() && image_ok; ++p)
    image_ok = sft_membership(sft, coding_map_at(rule, p));

  GroupSubset stab = map_stabilizer(rule);
  bool match = stab == H;
  return CosetReport{action, std::move(rule), std::move(sft), image_ok, std::move(stab),
                     match};
}

// ---------------------------------------------------------------------------
// Distinguishing witnesses.
//
// For a non-constant rule on a shift action, find anchor points with differing
// values, a symmetric determining set for them, and for each requested gamma
// outside the map stabilizer a translate sigma plus a base point whose
// neighborhood certifies rho(sigma x) != rho(sigma gamma x).

struct DistinguishingWitness {
  Elem gamma;
  Elem sigma;
  std::uint32_t base_point = 0;
  Configuration base;
  GroupSubset B;  // symmetric; contains identity, sigma, sigma*gamma
};

struct WitnessReport {
  std::uint32_t a0 = 0, a1 = 0;
  GroupSubset A;     // agreeing with an anchor here pins the rule value
  GroupSubset stab;  // exact map stabilizer
  std::vector<DistinguishingWitness> witnesses;
  std::vector<Elem> excluded;  // requested gammas inside the stabilizer
};

inline WitnessReport find_witnesses(const PointFunction& rho, const std::vector<Elem>& gammas,
                                    const Caps& caps = default_caps()) {
  (void)caps;
  const FiniteAction& a = *rho.action;
  const GroupPtr& g = a.group();
  if (a.configs().empty())
    throw std::domain_error("find witnesses: action must carry configurations");
  if (!is_total(rho)) throw std::domain_error("find witnesses: rule must be total");

  std::uint32_t a0 = 0;
  std::optional<std::uint32_t> a1;
  for (std::uint32_t p = 1; p < a.size(); ++p)
    if (rho.values[p] != rho.values[a0]) {
      a1 = p;
      break;
    }
  if (!a1) throw std::domain_error("find witnesses: rule is constant on its domain");

  auto pins_anchor = [&](std::uint32_t anchor, const GroupSubset& s) {
    const Configuration& b = a.configs()[anchor];
    for (std::uint32_t p = 0; p < a.size(); ++p) {
      if (rho.values[p] == rho.values[anchor]) continue;
      if (detail::agree_on(a.configs()[p], b, s)) return false;
    }
    return true;
  };
  GroupSubset A = detail::grow_symmetric(
      g, GroupSubset::identity_of(g),
      [&](const GroupSubset& s) { return pins_anchor(a0, s) && pins_anchor(*a1, s); },
      "find witnesses");

  WitnessReport rep;
  rep.a0 = a0;
  rep.a1 = *a1;
  rep.A = A;
  rep.stab = map_stabilizer(rho);

  for (const Elem& gamma : gammas) {
    g->check_element(gamma);
    if (rep.stab.contains(gamma)) {
      rep.excluded.push_back(gamma);
      continue;
    }
    // first sigma in canonical order, then first base point, with values apart
    std::optional<std::pair<Elem, std::uint32_t>> hit;
    for (std::uint64_t si = 0; si < g->order() && !hit; ++si) {
      Elem sigma = g->element_at(si);
      Elem sg = g->mul(sigma, gamma);
      for (std::uint32_t p = 0; p < a.size(); ++p)
        if (rho.values[a.apply(sigma, p)] != rho.values[a.apply(sg, p)]) {
          hit = std::make_pair(sigma, p);
          break;
        }
    }
    if (!hit) throw std::logic_error("find witnesses: stabilizer scan missed a direction");
    const Elem sigma = hit->first;
    const std::uint32_t bp = hit->second;
    const Elem sg = g->mul(sigma, gamma);
    const Configuration& base = a.configs()[bp];
    auto invariant = [&](const GroupSubset& s) {
      for (std::uint32_t p = 0; p < a.size(); ++p) {
        if (!detail::agree_on(a.configs()[p], base, s)) continue;
        if (rho.values[a.apply(sigma, p)] == rho.values[a.apply(sg, p)]) return false;
      }
      return true;
    };
    GroupSubset seed = symmetrize(GroupSubset(g, {g->identity(), sigma, sg}), true);
    GroupSubset B = detail::grow_symmetric(g, seed, invariant, "find witnesses");
    rep.witnesses.push_back(DistinguishingWitness{gamma, sigma, bp, base, std::move(B)});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Free-image coloring.
//
// Stage n handles gamma_n: pick the block of points colored at this stage and
// require every point to see, inside S_n, a pair (sigma x, sigma gamma_n x)
// already colored apart.  While schedule entries last, blocks come from the
// syndetic split and S_n from the entry; afterwards a degraded stage colors
// everything left and uses the whole group for S_n.

struct FreeImageStage {
  Elem gamma;
  GroupSubset S;
  PointSet block;  // points first colored during this stage
  bool degraded = false;
  std::vector<Elem> sigma;  // per point: certified translate on the final coloring
};

struct FreeImageColoring {
  PointFunction f;
  std::vector<FreeImageStage> stages;
  PointSet leftover;  // never demanded by any stage; filled with color 0
};

// Longest prefix of the schedule that the group can host, at most limit entries.
inline Schedule schedule_prefix(ScheduleMode mode, const GroupPtr& g, const GroupSubset& D,
                                const GroupSubset& T0, std::size_t limit,
                                const Caps& caps = default_caps()) {
  Schedule best = schedule_sets(mode, g, D, T0, 0, caps);
  for (std::size_t n = 1; n <= limit; ++n) {
    try {
      best = schedule_sets(mode, g, D, T0, n, caps);
    } catch (const std::domain_error&) {
      break;
    }
  }
  return best;
}

namespace detail {

struct ImageStagePlan {
  Elem gamma;
  GroupSubset S;
  PointSet block;
  bool degraded = false;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> moves;  // per (point, sigma) flattened
  std::vector<std::uint32_t> offsets;                          // point -> range in moves
};

}  // namespace detail

inline FreeImageColoring free_image_coloring(const ActionPtr& action, int k,
                                             const Schedule& schedule,
                                             const std::vector<Elem>& gammas,
                                             std::uint64_t seed = 0,
                                             const Caps& caps = default_caps()) {
  const FiniteAction& a = *action;
  const GroupPtr& g = a.group();
  require_same_group(g, schedule.D.group(), "free image coloring");
  if (!g->finite()) throw std::domain_error("free image coloring: group must be finite");
  if (!a.is_free()) throw std::domain_error("free image coloring: action must be free");
  if (k < 1) throw std::domain_error("free image coloring: empty alphabet");
  for (const Elem& e : gammas) g->check_element(e);

  const std::size_t n_pts = a.size();
  GroupSubset whole = detail::full_subset(g);

  // stage plan: split along schedule entries, then degrade to whole-group stages
  std::vector<detail::ImageStagePlan> plan;
  PointSet remaining = all_points(a);
  for (std::size_t n = 0; n < gammas.size(); ++n) {
    detail::ImageStagePlan st;
    st.gamma = gammas[n];
    if (n < schedule.entries.size() && !remaining.empty()) {
      const ScheduleEntry& entry = schedule.entries[n];
      const GroupSubset& t_next =
          n + 1 < schedule.entries.size() ? schedule.entries[n + 1].T : schedule.final_T;
      if (schedule.mode == ScheduleMode::plain) {
        PlainSplit split = split_syndetic_plain(action, remaining, entry.T, *entry.delta,
                                                entry.R, entry.S, t_next, caps);
        st.block = split.residue;
        remaining = split.net;
      } else {
        CoreSplit split = split_syndetic_d(action, remaining, entry.T, *entry.Q, entry.R,
                                           entry.S, t_next, schedule.D, caps);
        st.block = split.residue;
        remaining = split.net;
      }
      st.S = entry.S;
    } else {
      st.block = remaining;
      remaining.clear();
      st.S = whole;
      st.degraded = true;
    }
    plan.push_back(std::move(st));
  }

  // per-stage move table: images of every point under sigma and sigma*gamma
  for (auto& st : plan) {
    st.offsets.assign(n_pts + 1, 0);
    st.moves.reserve(n_pts * st.S.size());
    for (std::uint32_t x = 0; x < n_pts; ++x) {
      st.offsets[x] = static_cast<std::uint32_t>(st.moves.size());
      for (const Elem& sigma : st.S.elems())
        st.moves.emplace_back(a.apply(sigma, x), a.apply(g->mul(sigma, st.gamma), x));
    }
    st.offsets[n_pts] = static_cast<std::uint32_t>(st.moves.size());
  }

  // cumulative masks: colored[x] after each stage's block
  std::vector<std::vector<char>> masks(plan.size());
  {
    std::vector<char> acc(n_pts, 0);
    for (std::size_t n = 0; n < plan.size(); ++n) {
      for (auto p : plan[n].block) acc[p] = 1;
      masks[n] = acc;
    }
  }

  std::vector<int> vals(n_pts, -1);
  auto stage_ok = [&](std::size_t n) {
    const auto& st = plan[n];
    const auto& mask = masks[n];
    for (std::uint32_t x = 0; x < n_pts; ++x) {
      bool ok = false;
      for (std::uint32_t i = st.offsets[x]; i < st.offsets[x + 1] && !ok; ++i) {
        auto [p, q] = st.moves[i];
        ok = mask[p] && mask[q] && vals[p] != vals[q];
      }
      if (!ok) return false;
    }
    return true;
  };

  bool exact = true;
  for (const auto& st : plan)
    if (!detail::pow_within(static_cast<std::uint64_t>(k), st.block.size(),
                            caps.brute_force_space))
      exact = false;

  std::size_t deepest = 0;
  if (exact) {
    std::uint64_t nodes = 0;
    std::function<bool(std::size_t)> solve = [&](std::size_t n) -> bool {
      if (n == plan.size()) return true;
      deepest = std::max(deepest, n);
      const PointSet& block = plan[n].block;
      std::vector<int> cur(block.size(), 0);
      for (;;) {
        if (++nodes > caps.search_nodes)
          throw CapExceeded("free image coloring: search nodes exceeded");
        for (std::size_t i = 0; i < block.size(); ++i) vals[block[i]] = cur[i];
        if (stage_ok(n) && solve(n + 1)) return true;
        std::size_t i = 0;
        while (i < cur.size() && ++cur[i] == k) cur[i++] = 0;
        if (i == cur.size()) break;
      }
      for (auto p : block) vals[p] = -1;
      return false;
    };
    if (!plan.empty() && !solve(0))
      throw std::domain_error("free image coloring: stage " + std::to_string(deepest) +
                              " unsolvable");
  } else {
    // oversized blocks: no backtracking across stages; big blocks go through a
    // per-stage constraint solver, small ones through first-fit enumeration
    for (std::size_t n = 0; n < plan.size(); ++n) {
      const PointSet& block = plan[n].block;
      if (detail::pow_within(static_cast<std::uint64_t>(k), block.size(),
                             caps.brute_force_space)) {
        std::vector<int> cur(block.size(), 0);
        bool done = false;
        for (;;) {
          for (std::size_t i = 0; i < block.size(); ++i) vals[block[i]] = cur[i];
          if (stage_ok(n)) {
            done = true;
            break;
          }
          std::size_t i = 0;
          while (i < cur.size() && ++cur[i] == k) cur[i++] = 0;
          if (i == cur.size()) break;
        }
        if (!done)
          throw std::domain_error("free image coloring: stage " + std::to_string(n) +
                                  " unsolvable");
        continue;
      }
      // variable order = block order; one constraint per point of the action
      std::map<std::uint32_t, std::uint32_t> var_of;
      for (std::uint32_t i = 0; i < block.size(); ++i) var_of[block[i]] = i;
      const auto& st = plan[n];
      const auto& mask = masks[n];
      std::vector<CspConstraint> constraints;
      for (std::uint32_t x = 0; x < n_pts; ++x) {
        std::vector<std::uint32_t> dom;
        for (std::uint32_t i = st.offsets[x]; i < st.offsets[x + 1]; ++i) {
          auto [p, q] = st.moves[i];
          if (mask[p] && var_of.count(p)) dom.push_back(var_of[p]);
          if (mask[q] && var_of.count(q)) dom.push_back(var_of[q]);
        }
        dom = sorted_points(std::move(dom));
        if (dom.empty()) {
          // the block cannot influence this point; the committed prefix decides
          bool ok = false;
          for (std::uint32_t i = st.offsets[x]; i < st.offsets[x + 1] && !ok; ++i) {
            auto [p, q] = st.moves[i];
            ok = mask[p] && mask[q] && vals[p] != -1 && vals[q] != -1 && vals[p] != vals[q];
          }
          if (!ok)
            throw std::domain_error("free image coloring: stage " + std::to_string(n) +
                                    " unsolvable");
          continue;
        }
        if (!detail::pow_within(static_cast<std::uint64_t>(k), dom.size(),
                                caps.pattern_count))
          throw CapExceeded("free image coloring: constraint rows exceed the pattern cap");
        std::vector<std::vector<int>> forbidden;
        std::vector<int> row(dom.size(), 0);
        for (;;) {
          for (std::size_t i = 0; i < dom.size(); ++i) vals[block[dom[i]]] = row[i];
          bool ok = false;
          for (std::uint32_t i = st.offsets[x]; i < st.offsets[x + 1] && !ok; ++i) {
            auto [p, q] = st.moves[i];
            ok = mask[p] && mask[q] && vals[p] != -1 && vals[q] != -1 && vals[p] != vals[q];
          }
          if (!ok) forbidden.push_back(row);
          std::size_t i = 0;
          while (i < row.size() && ++row[i] == k) row[i++] = 0;
          if (i == row.size()) break;
        }
        for (std::size_t i = 0; i < dom.size(); ++i) vals[block[dom[i]]] = -1;
        if (forbidden.empty()) continue;
        constraints.push_back(make_constraint(static_cast<std::uint32_t>(block.size()),
                                              std::move(dom), std::move(forbidden)));
      }
      Csp csp = make_csp(static_cast<std::uint32_t>(block.size()), k, std::move(constraints));
      SolveResult res = moser_tardos(csp, seed + n, 1'000'000);
      if (res.status != SolveStatus::solved)
        throw std::domain_error("free image coloring: stage " + std::to_string(n) +
                                " solver budget exhausted");
      for (std::uint32_t i = 0; i < block.size(); ++i) vals[block[i]] = res.assignment[i];
      if (!stage_ok(n))
        throw std::logic_error("free image coloring: solver output failed the stage scan");
    }
  }

  PointSet leftover;
  for (std::uint32_t p = 0; p < n_pts; ++p)
    if (vals[p] == -1) {
      leftover.push_back(p);
      vals[p] = 0;
    }

  FreeImageColoring out;
  out.f = make_point_function(action, k, vals);
  out.leftover = std::move(leftover);
  for (std::size_t n = 0; n < plan.size(); ++n) {
    FreeImageStage st;
    st.gamma = plan[n].gamma;
    st.S = plan[n].S;
    st.block = plan[n].block;
    st.degraded = plan[n].degraded;
    st.sigma.reserve(n_pts);
    const auto& mask = masks[n];
    for (std::uint32_t x = 0; x < n_pts; ++x) {
      std::optional<Elem> found;
      const auto& sig = plan[n].S.elems();
      for (std::uint32_t i = plan[n].offsets[x]; i < plan[n].offsets[x + 1]; ++i) {
        auto [p, q] = plan[n].moves[i];
        if (mask[p] && mask[q] && out.f.values[p] != out.f.values[q]) {
          found = sig[i - plan[n].offsets[x]];
          break;
        }
      }
      if (!found) throw std::logic_error("free image coloring: certificate replay failed");
      st.sigma.push_back(*found);
    }
    out.stages.push_back(std::move(st));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stabilizer transfer pipeline.
//
// From a non-constant rule on a free shift action, assemble the coloring space
// Col(F, ell), copy the anchor neighborhoods onto marker sets and the witness
// neighborhoods onto a maximal separated core, and audit every invariant the
// transfer argument asserts.  Margin audits record shortfalls without blocking.
// Any other failed audit marks failed_stage with the first stage that broke;
// later audits still run when their inputs exist, so a report always lists
// every checkable invariant.  Replay failures of claims that hold at any scale
// throw logic_error; infeasible inputs throw domain_error up front.

struct StageAudit {
  std::string name;
  bool pass = false;
  std::string witness;
};

struct StabTransferParams {
  std::uint64_t exponent = 2;  // window power applied to the union of the stage-1 sets
  std::size_t t1_cap = std::numeric_limits<std::size_t>::max();
  std::optional<GroupSubset> extension_set;  // defaults to {identity}
};

struct StabTransfer {
  PointFunction rho;
  std::uint32_t a0 = 0, a1 = 0;
  GroupSubset A, T0, T1, T, B, D, S, stab;
  std::vector<DistinguishingWitness> witnesses;
  GroupSubset F;
  int ell = 0;
  ActionPtr col;
  PointSet J0, J1, copyA, K, copyB, C0;
  std::vector<std::pair<Elem, PointSet>> K_parts;
  PointFunction f0;
  std::vector<StageAudit> audits;
  std::optional<std::string> failed_stage;  // first stage with a broken invariant
};

inline StabTransfer stab_transfer_pipeline(const PointFunction& rho,
                                           const StabTransferParams& params = {},
                                           const Caps& caps = default_caps()) {
  const FiniteAction& src = *rho.action;
  const GroupPtr& g = src.group();
  if (!g->finite()) throw std::domain_error("stab transfer: group must be finite");
  if (src.configs().empty())
    throw std::domain_error("stab transfer: action must carry configurations");
  if (!src.is_free()) throw std::domain_error("stab transfer: action must be free");
  const int k_src = src.configs()[0].k;

  StabTransfer out;
  out.rho = rho;
  auto note = [&](std::string name, bool pass, std::string wit) {
    out.audits.push_back(StageAudit{std::move(name), pass, std::move(wit)});
  };
  auto fail_stage = [&](const char* stage) {
    if (!out.failed_stage) out.failed_stage = stage;
  };

  // stage 1: anchors, witnesses, margin sets
  WitnessReport base = find_witnesses(rho, {}, caps);
  out.a0 = base.a0;
  out.a1 = base.a1;
  out.A = base.A;
  out.stab = base.stab;
  note("anchor_pair", true,
       "values " + std::to_string(rho.values[base.a0]) + " and " +
           std::to_string(rho.values[base.a1]));

  if (base.A.size() + 1 > g->order())
    throw std::domain_error("stab transfer stage 1: group too small for the T0 margin");
  out.T0 = symmetric_canonical_set(g, base.A.size() + 1);
  note("t0_margin", out.T0.size() > out.A.size(),
       "|T0| = " + std::to_string(out.T0.size()) + ", |A| = " + std::to_string(out.A.size()));

  GroupSubset window =
      subset_product(subset_product(out.A, subset_power(out.T0, 2)), out.A);
  GroupSubset gamma_set = subset_difference(window, out.stab);
  WitnessReport wits = find_witnesses(rho, gamma_set.elems(), caps);
  if (!wits.excluded.empty())
    throw std::logic_error("stab transfer: stabilizer leaked into the witness list");
  out.witnesses = wits.witnesses;

  GroupSubset W = detail::determining_window(rho);
  out.B = GroupSubset::identity_of(g);
  for (const auto& w : out.witnesses) out.B = subset_union(out.B, w.B);
  out.D = subset_union(subset_union(W, out.A), subset_union(out.B, out.stab));

  const std::size_t t1_target = out.T0.size() * out.B.size() + 1;
  const std::size_t t1_size = std::min(t1_target, params.t1_cap);
  if (t1_size > g->order())
    throw std::domain_error("stab transfer stage 1: group too small for the T1 margin");
  out.T1 = symmetric_canonical_set(g, t1_size);
  note("t1_margin", out.T1.size() > out.T0.size() * out.B.size(),
       "|T1| = " + std::to_string(out.T1.size()) + ", margin needs " +
           std::to_string(t1_target));
  out.T = subset_product(out.T0, out.T1);

  note("stab_normal_inside_d",
       is_subgroup(out.stab) && is_normal_subgroup(out.stab) && subset_of(out.stab, out.D),
       "stab size " + std::to_string(out.stab.size()));

  out.S = params.extension_set.value_or(GroupSubset::identity_of(g));
  require_same_group(g, out.S.group(), "stab transfer");
  if (!out.S.contains_identity() || !out.S.is_symmetric())
    throw std::domain_error("stab transfer: extension set must be symmetric with identity");

  // stage 2: window and palette
  GroupSubset un = subset_union(subset_union(out.T0, out.T1), subset_union(out.D, out.S));
  out.F = subset_difference(subset_power(un, params.exponent, caps),
                            GroupSubset::identity_of(g));
  out.ell = static_cast<int>(out.F.size()) + 4;
  note("palette_arithmetic", out.ell == static_cast<int>(out.F.size()) + 4,
       "ell = " + std::to_string(out.ell));
  note("window_symmetric", out.F.is_symmetric() && !out.F.contains_identity(),
       "|F| = " + std::to_string(out.F.size()));

  // stage 3: coloring space and the copied blocks
  if (!detail::pow_within(static_cast<std::uint64_t>(out.ell), g->order(),
                          caps.pattern_count))
    throw CapExceeded("stab transfer: coloring space exceeds the pattern cap");
  std::vector<std::vector<std::uint32_t>> nbr(g->order());
  for (std::uint64_t i = 0; i < g->order(); ++i)
    for (const Elem& d : out.F.elems())
      nbr[i].push_back(
          static_cast<std::uint32_t>(g->index_of(g->mul(g->element_at(i), d))));
  std::vector<Configuration> cols;
  std::vector<int> cur(g->order(), 0);
  for (;;) {
    bool proper = true;
    for (std::uint64_t i = 0; i < g->order() && proper; ++i)
      for (auto j : nbr[i])
        if (cur[i] == cur[j]) {
          proper = false;
          break;
        }
    if (proper) {
      Configuration c = make_configuration(g, out.ell, cur);
      if (has_trivial_stabilizer(c)) cols.push_back(std::move(c));
    }
    std::size_t i = 0;
    while (i < cur.size() && ++cur[i] == out.ell) cur[i++] = 0;
    if (i == cur.size()) break;
  }
  note("coloring_space_nonempty", !cols.empty(),
       std::to_string(cols.size()) + " aperiodic proper colorings");
  if (cols.empty()) {
    fail_stage("stage 3");
    return out;
  }
  out.col = FiniteAction::shift_action(std::move(cols));
  const FiniteAction& col = *out.col;
  note("coloring_shift_free", col.is_free(), std::to_string(col.size()) + " colorings");

  GroupSubset inner = subset_difference(window, GroupSubset::identity_of(g));
  for (std::uint32_t p = 0; p < col.size(); ++p) {
    const Configuration& x = col.configs()[p];
    int v = config_at(x, g->identity());
    if (v > 1) continue;
    bool marker = true;
    for (const Elem& d : inner.elems())
      if (config_at(x, d) < 2) {
        marker = false;
        break;
      }
    if (!marker) continue;
    (v == 0 ? out.J0 : out.J1).push_back(p);
  }
  note("marker_sets_nonempty", !out.J0.empty() && !out.J1.empty(),
       "|J0| = " + std::to_string(out.J0.size()) + ", |J1| = " + std::to_string(out.J1.size()));
  if (out.J0.empty() || out.J1.empty()) {
    fail_stage("stage 3");
    return out;
  }

  PointSet markers = point_union(out.J0, out.J1);
  bool separated = is_separated(out.col, markers, inner);
  note("marker_union_separated", separated, "window size " + std::to_string(inner.size()));
  if (!separated)
    throw std::logic_error("stab transfer stage 3: marker union is not window-separated");

  std::vector<int> vals(col.size(), -1);
  auto copy_block = [&](const PointSet& pts, const GroupSubset& sub, const Configuration& c,
                        const char* what) {
    for (auto x : pts)
      for (const Elem& e : sub.elems()) {
        std::uint32_t tgt = col.apply(e, x);
        int v = config_at(c, e);
        if (vals[tgt] != -1 && vals[tgt] != v) throw std::logic_error(what);
        vals[tgt] = v;
      }
  };
  copy_block(out.J0, out.A, src.configs()[out.a0],
             "stab transfer stage 3: anchor blocks collide");
  copy_block(out.J1, out.A, src.configs()[out.a1],
             "stab transfer stage 3: anchor blocks collide");
  out.copyA = point_union(set_image(col, out.A, out.J0), set_image(col, out.A, out.J1));

  GroupSubset sep = subset_product(subset_product(out.B, out.T),
                                   subset_product(subset_inverse(out.T), out.B));
  PointSet blocked = set_image(col, out.B, out.copyA);
  PointSet avail = point_difference(all_points(col), blocked);
  out.K = greedy_separated(out.col, avail, sep);
  note("separated_core_size", out.K.size() >= gamma_set.size(),
       "|K| = " + std::to_string(out.K.size()) + ", witnesses " +
           std::to_string(gamma_set.size()));
  if (out.K.size() < gamma_set.size()) fail_stage("stage 3");

  for (std::size_t i = 0; i < out.witnesses.size(); ++i)
    out.K_parts.emplace_back(out.witnesses[i].gamma, PointSet{});
  if (!out.K_parts.empty())
    for (std::size_t i = 0; i < out.K.size(); ++i)
      out.K_parts[i % out.K_parts.size()].second.push_back(out.K[i]);

  bool overlap = false;
  for (std::size_t i = 0; i < out.K_parts.size(); ++i) {
    const Configuration& b = out.witnesses[i].base;
    for (auto x : out.K_parts[i].second)
      for (const Elem& e : out.B.elems()) {
        std::uint32_t tgt = col.apply(e, x);
        if (vals[tgt] != -1) overlap = true;
        vals[tgt] = config_at(b, e);
      }
  }
  out.copyB = set_image(col, out.B, out.K);
  note("copied_blocks_disjoint", !overlap && point_intersection(out.copyA, out.copyB).empty(),
       "|A block| = " + std::to_string(out.copyA.size()) + ", |B block| = " +
           std::to_string(out.copyB.size()));
  if (overlap) throw std::logic_error("stab transfer stage 3: copied blocks overlap");

  out.C0 = point_union(out.copyA, out.copyB);
  out.f0 = make_point_function(out.col, k_src, vals);

  bool anchors_copied = true;
  for (int i = 0; i < 2 && anchors_copied; ++i) {
    const PointSet& J = i == 0 ? out.J0 : out.J1;
    const Configuration& c = src.configs()[i == 0 ? out.a0 : out.a1];
    for (auto x : J)
      for (const Elem& e : out.A.elems())
        if (out.f0.values[col.apply(e, x)] != config_at(c, e)) anchors_copied = false;
  }
  note("anchor_blocks_copied", anchors_copied, "checked both marker sets");
  if (!anchors_copied) throw std::logic_error("stab transfer stage 3: anchor copy failed");

  bool witness_copied = true;
  for (std::size_t i = 0; i < out.K_parts.size() && witness_copied; ++i)
    for (auto x : out.K_parts[i].second)
      for (const Elem& e : out.B.elems())
        if (out.f0.values[col.apply(e, x)] != config_at(out.witnesses[i].base, e))
          witness_copied = false;
  note("witness_blocks_copied", witness_copied, "checked every core part");
  if (!witness_copied) throw std::logic_error("stab transfer stage 3: witness copy failed");

  // stage 4: room to extend
  PointSet rest = point_difference(all_points(col), out.C0);
  bool synd = is_syndetic(out.col, rest, out.T);
  note("uncopied_syndetic", synd, "|rest| = " + std::to_string(rest.size()));
  if (!synd) fail_stage("stage 4");

  // stage 5: the two separation regimes
  GroupSubset outside =
      subset_difference(subset_difference(detail::full_subset(g), window), out.stab);
  bool pairs_ok = true;
  std::size_t pair_count = 0;
  for (const Elem& gamma : outside.elems()) {
    std::vector<int> xv(g->order(), -1);
    xv[g->index_of(g->identity())] = 0;
    xv[g->index_of(gamma)] = 1;
    for (std::uint64_t i = 0; i < g->order(); ++i) {
      if (xv[i] != -1) continue;
      std::vector<char> used(out.ell, 0);
      for (auto j : nbr[i])
        if (xv[j] >= 0) used[xv[j]] = 1;
      int c = 2;
      while (c < out.ell && used[c]) ++c;
      if (c == out.ell) {
        pairs_ok = false;
        break;
      }
      xv[i] = c;
    }
    if (!pairs_ok) break;
    auto p = detail::point_of(col, xv);
    std::uint32_t q = p ? col.apply(gamma, *p) : 0;
    if (!p || !point_in(out.J0, *p) || !point_in(out.J1, q)) pairs_ok = false;
    if (pairs_ok) ++pair_count;
  }
  note("outside_window_pairs", pairs_ok,
       std::to_string(pair_count) + " of " + std::to_string(outside.size()));
  if (!pairs_ok)
    throw std::logic_error("stab transfer stage 5: separating pair construction failed");

  bool parts_ok = true;
  for (const auto& [gamma, pts] : out.K_parts)
    if (pts.empty()) parts_ok = false;
  note("inside_window_blocks", parts_ok,
       std::to_string(out.K_parts.size()) + " witness parts");
  if (!parts_ok) fail_stage("stage 5");

  return out;
}

// ---------------------------------------------------------------------------
// Approximate local rule.
//
// Members of the first N shift-invariant cores are matched against the full
// intersection on the comparison set D u W u WD; the approximating rule reads
// the window pattern and returns the exact rule's value at the matched point.

struct ApproxRule {
  LocalRule rule;
  std::vector<Configuration> members;  // intersection of the first N cores
  std::vector<Configuration> core;     // intersection over the whole family
  std::vector<std::size_t> match;      // member index -> core index
};

inline ApproxRule approx_local_rule(const std::vector<Sft>& family, const LocalRule& rho,
                                    const GroupSubset& D, std::size_t N,
                                    const Caps& caps = default_caps()) {
  const GroupPtr& g = rho.group;
  if (!g->finite()) throw std::domain_error("approximate rule: group must be finite");
  if (family.empty()) throw std::domain_error("approximate rule: empty family");
  if (N > family.size())
    throw std::domain_error("approximate rule: N exceeds the family");
  require_same_group(g, D.group(), "approximate rule");
  for (const Sft& s : family) {
    require_same_group(g, s.group, "approximate rule");
    if (s.k != rho.k) throw std::domain_error("approximate rule: alphabet mismatch");
  }

  const GroupSubset& W = rho.window;
  GroupSubset cmp = subset_union(subset_union(D, W), subset_product(W, D));

  if (!detail::pow_within(static_cast<std::uint64_t>(rho.k), g->order(),
                          caps.pattern_count))
    throw CapExceeded("approximate rule: configuration space exceeds the pattern cap");

  std::vector<Configuration> members, core;
  std::vector<int> cur(g->order(), 0);
  for (;;) {
    Configuration c = make_configuration(g, rho.k, cur);
    std::size_t n = 0;
    while (n < family.size() && sft_membership(family[n], c)) ++n;
    if (n >= N) members.push_back(c);
    if (n == family.size()) core.push_back(std::move(c));
    std::size_t i = 0;
    while (i < cur.size() && ++cur[i] == rho.k) cur[i++] = 0;
    if (i == cur.size()) break;
  }
  if (core.empty()) throw std::domain_error("approximate rule: the full intersection is empty");

  std::vector<std::pair<std::vector<int>, int>> table;
  for (const Configuration& z : core) {
    std::vector<int> pat = pattern_at(z, W, g->identity());
    auto v = rule_apply(rho, pat);
    if (!v) throw std::domain_error("approximate rule: rule undefined on a realized pattern");
    table.emplace_back(std::move(pat), *v);
  }
  std::sort(table.begin(), table.end());
  table.erase(std::unique(table.begin(), table.end()), table.end());
  LocalRule tilde = make_local_rule(g, rho.k, rho.m, W, std::move(table));

  std::vector<std::size_t> match;
  for (const Configuration& z : members) {
    std::optional<std::size_t> hit;
    for (std::size_t i = 0; i < core.size() && !hit; ++i)
      if (core[i].values == z.values) hit = i;  // a core member matches itself
    for (std::size_t i = 0; i < core.size() && !hit; ++i)
      if (detail::agree_on(core[i], z, cmp)) hit = i;
    if (!hit)
      throw std::domain_error("approximate rule: a member has no matching core configuration");
    const Configuration& zs = core[*hit];
    for (const Elem& d : D.elems()) {
      if (config_at(z, d) != config_at(zs, d))
        throw std::logic_error("approximate rule: matched point disagrees on D");
      auto tv = rule_at(tilde, z, d);
      auto rv = rule_at(rho, zs, d);
      if (!tv || !rv || *tv != *rv)
        throw std::logic_error("approximate rule: shifted values disagree on D");
    }
    if (!rule_at(tilde, z, g->identity()))
      throw std::logic_error("approximate rule: member pattern missing from the table");
    match.push_back(*hit);
  }
  return ApproxRule{std::move(tilde), std::move(members), std::move(core), std::move(match)};
}

}  // namespace shiftlab
