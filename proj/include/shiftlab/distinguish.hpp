#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "shiftlab/action.hpp"
#include "shiftlab/caps.hpp"
#include "shiftlab/config.hpp"
#include "shiftlab/csp.hpp"
#include "shiftlab/graph.hpp"
#include "shiftlab/group.hpp"
#include "shiftlab/rational.hpp"
#include "shiftlab/rng.hpp"
#include "shiftlab/subset.hpp"
#include "shiftlab/syndetic.hpp"

namespace shiftlab {

// Machinery for forcing a coding rule to tell a point apart from its gamma
// translate. A window rule tau induces an invariance set H (translations the
// rule cannot see), a rule stabilizer inside it, and conjugators that escape
// it; from these a cascade of finite sets D, N, S is built, a partition-driven
// CSP whose solutions are colorings with the distinguishing property, and
// per-constraint witness sets with an exact probability audit.

namespace detail {

// Enumerates proper ell-colorings of the graph where vertex v must avoid the
// colors in banned[v]. fn returns false to stop early. produced accumulates
// across calls and is capped.
inline void for_each_proper_coloring(const FiniteGraph& graph, int ell,
                                     const std::vector<std::vector<int>>& banned,
                                     const Caps& caps, std::uint64_t& produced,
                                     const std::function<bool(const std::vector<int>&)>& fn) {
  std::uint32_t n = graph.num_vertices();
  std::vector<int> colors(n, -1);
  bool stop = false;
  std::function<void(std::uint32_t)> rec = [&](std::uint32_t v) {
    if (stop) return;
    if (v == n) {
      check_cap(++produced, caps.pattern_count, "proper coloring enumeration");
      if (!fn(colors)) stop = true;
      return;
    }
    for (int c = 0; c < ell && !stop; ++c) {
      bool ok = true;
      if (!banned.empty())
        for (int b : banned[v])
          if (b == c) {
            ok = false;
            break;
          }
      if (ok)
        for (std::uint32_t u : graph.neighbors(v))
          if (u < v && colors[u] == c) {
            ok = false;
            break;
          }
      if (!ok) continue;
      colors[v] = c;
      rec(v + 1);
      colors[v] = -1;
    }
  };
  rec(0);
}

// Induced subgraph of the Schreier graph G(X,F) on a sorted point set; vertex
// i stands for pts[i].
inline GraphPtr induced_action_graph(const FiniteAction& a, const PointSet& pts,
                                     const GroupSubset& F) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::uint32_t i = 0; i < pts.size(); ++i)
    for (const auto& s : F.elems()) {
      if (a.group()->is_identity(s)) continue;
      std::uint32_t q = a.apply(s, pts[i]);
      auto it = std::lower_bound(pts.begin(), pts.end(), q);
      if (it != pts.end() && *it == q) {
        std::uint32_t j = static_cast<std::uint32_t>(it - pts.begin());
        if (i < j) edges.emplace_back(i, j);
      }
    }
  return FiniteGraph::create(pts.size(), edges);
}

}  // namespace detail

// Where the invariance set can live: W^2 u WFW.
inline GroupSubset invariance_candidates(const GroupSubset& F, const GroupSubset& W,
                                         const Caps& caps = default_caps()) {
  auto w2 = subset_product(W, W, caps);
  auto wfw = subset_product(subset_product(W, F, caps), W, caps);
  return subset_union(w2, wfw);
}

// Rule value of f at point p: defined iff f colors all of (window).p. The rule
// table must cover every pattern that actually occurs.
inline std::optional<int> rule_value_at(const LocalRule& tau, const FiniteAction& a,
                                        const std::vector<int>& values, std::uint32_t p) {
  std::vector<int> pattern;
  pattern.reserve(tau.window.size());
  for (const auto& w : tau.window.elems()) {
    int v = values[a.apply(w, p)];
    if (v < 0) return std::nullopt;
    pattern.push_back(v);
  }
  auto out = rule_apply(tau, pattern);
  if (!out) throw std::domain_error("rule has no value on an observed window pattern");
  return out;
}

// The sharp inequality: both rule values defined and different.
inline bool distinguished_at(const LocalRule& tau, const FiniteAction& a,
                             const std::vector<int>& values, std::uint32_t x, std::uint32_t y) {
  auto vx = rule_value_at(tau, a, values, x);
  if (!vx) return false;
  auto vy = rule_value_at(tau, a, values, y);
  return vy && *vx != *vy;
}

// h belongs to the invariance set iff no proper coloring of the Cayley window
// W u Wh gives the rule different values at 1 and at h. At ell >= |F|+1 every
// such finite coloring extends to the whole Cayley graph, so the window test
// is exact.
inline GroupSubset rule_invariance_set(const GroupPtr& g, const GroupSubset& F, int ell,
                                       const LocalRule& tau,
                                       const std::optional<GroupSubset>& candidates = std::nullopt,
                                       const Caps& caps = default_caps()) {
  require_same_group(g, F.group(), "rule invariance set");
  require_same_group(g, tau.window.group(), "rule invariance set");
  if (!F.is_symmetric() || F.contains_identity())
    throw std::domain_error("rule invariance set: F must be symmetric without identity");
  if (ell < static_cast<int>(F.size()) + 1)
    throw std::domain_error("rule invariance set: need ell >= |F| + 1");
  if (tau.k != ell) throw std::domain_error("rule invariance set: rule input alphabet is not ell");
  const GroupSubset& W = tau.window;
  if (!W.is_symmetric() || !W.contains_identity())
    throw std::domain_error("rule invariance set: window must be symmetric with identity");

  std::uint64_t produced = 0;
  {
    // the rule must cover every proper window pattern
    auto wg = graph_on_elements(g, W, F);
    bool covered = true;
    detail::for_each_proper_coloring(*wg, ell, {}, caps, produced,
                                     [&](const std::vector<int>& c) {
                                       if (!rule_apply(tau, c)) covered = false;
                                       return covered;
                                     });
    if (!covered)
      throw std::domain_error("rule invariance set: rule misses a proper window pattern");
  }

  GroupSubset cand = candidates ? *candidates : invariance_candidates(F, W, caps);
  std::vector<Elem> kept;
  for (const auto& h : cand.elems()) {
    GroupSubset wh = subset_product(W, GroupSubset(g, {h}), caps);
    GroupSubset window = subset_union(W, wh);
    auto wg = graph_on_elements(g, window, F);
    std::map<Elem, std::uint32_t> pos;
    for (std::uint32_t i = 0; i < window.size(); ++i) pos[window.elems()[i]] = i;
    std::vector<std::uint32_t> at_w, at_wh;
    for (const auto& w : W.elems()) {
      at_w.push_back(pos.at(w));
      at_wh.push_back(pos.at(g->mul(w, h)));
    }
    bool invariant = true;
    detail::for_each_proper_coloring(
        *wg, ell, {}, caps, produced, [&](const std::vector<int>& c) {
          std::vector<int> p1, p2;
          p1.reserve(at_w.size());
          p2.reserve(at_w.size());
          for (std::size_t i = 0; i < at_w.size(); ++i) {
            p1.push_back(c[at_w[i]]);
            p2.push_back(c[at_wh[i]]);
          }
          auto v1 = rule_apply(tau, p1);
          auto v2 = rule_apply(tau, p2);
          if (!v1 || !v2)
            throw std::logic_error("rule invariance set: proper restriction escaped the table");
          if (*v1 != *v2) invariant = false;
          return invariant;
        });
    if (invariant) kept.push_back(h);
  }
  return GroupSubset(g, std::move(kept));
}

// Elements of H all of whose conjugates stay in H. Exact form needs a finite
// group; the bounded form tests only conjugators from the given ball and so
// returns an upper bound, flagged as such.
struct RuleStabilizer {
  GroupSubset set;
  bool exact;
};

namespace detail {

inline RuleStabilizer stabilizer_under(const GroupSubset& H, const std::vector<Elem>& conjugators,
                                       bool exact) {
  const GroupPtr& g = H.group();
  std::vector<Elem> kept;
  for (const auto& h : H.elems()) {
    bool closed = true;
    for (const auto& q : conjugators)
      if (!H.contains(g->mul(g->mul(q, h), g->inv(q)))) {
        closed = false;
        break;
      }
    if (closed) kept.push_back(h);
  }
  return {GroupSubset(g, std::move(kept)), exact};
}

}  // namespace detail

inline RuleStabilizer rule_stabilizer(const GroupSubset& H) {
  const GroupPtr& g = H.group();
  if (!g->finite()) throw std::domain_error("exact rule stabilizer needs a finite group");
  return detail::stabilizer_under(H, g->first_elements(g->order()), true);
}

inline RuleStabilizer rule_stabilizer_bounded(const GroupSubset& H, const GroupSubset& ball) {
  require_same_group(H, ball, "rule stabilizer");
  return detail::stabilizer_under(H, ball.elems(), false);
}

// For each h in H outside the stabilizer, the first element in canonical order
// conjugating h out of H; Q collects them together with the identity.
struct ConjugatorMap {
  std::vector<std::pair<Elem, Elem>> pairs;  // (h, q) with q h q^-1 outside H
  GroupSubset Q;
};

inline ConjugatorMap conjugator_map(const GroupSubset& H, const GroupSubset& stab) {
  require_same_group(H, stab, "conjugator map");
  const GroupPtr& g = H.group();
  std::size_t budget = g->finite() ? static_cast<std::size_t>(g->order()) : 4096;
  std::vector<std::pair<Elem, Elem>> pairs;
  std::vector<Elem> qs{g->identity()};
  for (const auto& h : H.elems()) {
    if (stab.contains(h)) continue;
    bool found = false;
    for (const auto& q : g->first_elements(budget)) {
      if (!H.contains(g->mul(g->mul(q, h), g->inv(q)))) {
        pairs.emplace_back(h, q);
        qs.push_back(q);
        found = true;
        break;
      }
    }
    if (!found) throw std::domain_error("conjugator map: no conjugator found within scope");
  }
  return {std::move(pairs), GroupSubset(g, std::move(qs))};
}

struct DistinguishData {
  GroupPtr group;
  GroupSubset F;
  int ell;
  LocalRule tau;
  GroupSubset W;  // tau's window
  GroupSubset R, M;
  Elem gamma;
  std::uint64_t e_D, e_S, e_B;  // powers for D, S, and the recoloring margin
  GroupSubset H;
  RuleStabilizer stab;
  std::vector<std::pair<Elem, Elem>> conjugators;
  GroupSubset Q, D, N, S;
};

// Builds the full set cascade: H, its stabilizer, conjugators Q,
// D = (F u W u Q u Q^-1)^e_D, N = WDRM u MRDW, S = (N u {gamma+-})^e_S.
// e_B < e_D keeps (F u W)^e_B Q inside D, the margin the witness sets need.
inline DistinguishData distinguish_sets(const GroupPtr& g, const GroupSubset& F, int ell,
                                        const LocalRule& tau, const GroupSubset& R,
                                        const GroupSubset& M, const Elem& gamma,
                                        std::uint64_t e_D = 2, std::uint64_t e_S = 3,
                                        std::uint64_t e_B = 1,
                                        const std::optional<GroupSubset>& conjugator_ball =
                                            std::nullopt,
                                        const Caps& caps = default_caps()) {
  require_same_group(g, R.group(), "distinguish sets");
  require_same_group(g, M.group(), "distinguish sets");
  g->check_element(gamma);
  if (!R.is_symmetric() || !R.contains_identity())
    throw std::domain_error("distinguish sets: R must be symmetric with identity");
  if (!M.is_symmetric() || !M.contains_identity())
    throw std::domain_error("distinguish sets: M must be symmetric with identity");
  if (e_B < 1 || e_B >= e_D || e_S < 1)
    throw std::domain_error("distinguish sets: exponents need 1 <= e_B < e_D and e_S >= 1");

  GroupSubset H = rule_invariance_set(g, F, ell, tau, std::nullopt, caps);
  RuleStabilizer stab =
      conjugator_ball ? rule_stabilizer_bounded(H, *conjugator_ball) : rule_stabilizer(H);
  if (stab.set.contains(gamma))
    throw std::domain_error(stab.exact
                                ? "distinguish sets: gamma stabilizes the rule"
                                : "distinguish sets: cannot certify gamma outside the stabilizer");
  ConjugatorMap cm = conjugator_map(H, stab.set);

  const GroupSubset& W = tau.window;
  GroupSubset base = subset_union(subset_union(F, W), symmetrize(cm.Q, false));
  GroupSubset D = subset_power(base, e_D, caps);
  GroupSubset rm = subset_product(R, M, caps);
  GroupSubset N = subset_union(subset_product(subset_product(W, D, caps), rm, caps),
                               subset_product(subset_product(M, R, caps),
                                              subset_product(D, W, caps), caps));
  GroupSubset S = subset_power(subset_union(N, GroupSubset(g, {gamma, g->inv(gamma)})), e_S, caps);

  if (!D.is_symmetric() || !D.contains_identity() || !subset_of(base, D))
    throw std::logic_error("distinguish sets: D lost its base");
  if (!subset_of(subset_product(subset_power(subset_union(F, W), e_B, caps), cm.Q, caps), D))
    throw std::logic_error("distinguish sets: recoloring margin escapes D");
  if (!N.is_symmetric() || !N.contains_identity())
    throw std::logic_error("distinguish sets: N must be symmetric with identity");
  if (!subset_of(N, S) || !S.contains(gamma) || !S.contains(g->inv(gamma)))
    throw std::logic_error("distinguish sets: S must cover N and gamma");

  return DistinguishData{g,  F,         ell,   tau, W, R, M, gamma, e_D, e_S, e_B,
                         H,  stab,      cm.pairs,  cm.Q, D, N, S};
}

// The partition-driven CSP. Variables are the points of a maximal
// N^4-separated subset Z of the D-core of C; the list of a variable holds the
// admissible colorings of its block C n (N.z); a constraint per (z, beta in
// N^5) forbids the joint block colorings under which no nu in DRM tells nu.z
// apart from nu beta gamma beta^-1 . z.
struct DistinguishCsp {
  ActionPtr action;
  DistinguishData data;
  PointSet C0, C, U;
  PointSet core;  // D-core of C
  PointSet Z;     // variable order
  PointFunction g;
  std::vector<std::vector<Elem>> block_elems;  // per z: nu with nu.z in C, point-sorted
  std::vector<PointSet> block_pts;             // matching points, sorted
  std::vector<std::vector<std::vector<int>>> col;  // per z: admissible block colorings
  Csp csp;
  std::vector<std::pair<std::uint32_t, Elem>> tags;  // constraint -> (variable, beta)
  LllParams params;
  Int vdeg_cap;  // 256 |D|^14 |R|^7 |M|^7
};

inline DistinguishCsp distinguish_csp(const ActionPtr& action, const DistinguishData& data,
                                      const PointSet& C0_in, const PointSet& C_in,
                                      const PointSet& U_in, const PointFunction& f0,
                                      const Caps& caps = default_caps()) {
  const FiniteAction& a = *action;
  const GroupPtr& g = a.group();
  require_same_group(g, data.F.group(), "distinguishing csp");
  if (!action->is_free()) throw std::domain_error("distinguishing csp requires a free action");

  PointSet c0 = sorted_points(C0_in), c = sorted_points(C_in), u = sorted_points(U_in);
  if (!point_intersection(c0, c).empty() || !point_intersection(c0, u).empty() ||
      !point_intersection(c, u).empty() ||
      point_union(point_union(c0, c), u) != all_points(a))
    throw std::domain_error("distinguishing csp: C0, C, U must partition the points");
  if (!is_sd_syndetic(action, c, data.R, data.D))
    throw std::domain_error("distinguishing csp: C is not (R,D)-syndetic");
  auto usep = sd_separated(action, u, data.S, data.D, SdSearchMode::automatic, caps);
  if (!usep.witness) throw std::domain_error("distinguishing csp: U is not (S,D)-separated");

  if (f0.action.get() != action.get() || f0.k != data.ell)
    throw std::domain_error("distinguishing csp: base coloring mismatched");
  if (domain_of(f0) != c0)
    throw std::domain_error("distinguishing csp: base coloring must cover exactly C0");
  for (std::uint32_t p : c0)
    for (const auto& s : data.F.elems()) {
      std::uint32_t q = a.apply(s, p);
      if (point_in(c0, q) && f0.values[p] == f0.values[q])
        throw std::domain_error("distinguishing csp: base coloring is not proper");
    }

  PointSet core = core_set(action, c, data.D);
  auto n4 = subset_power(data.N, 4, caps);
  PointSet Z = greedy_separated(action, core, n4);
  if (Z.empty()) throw std::domain_error("distinguishing csp: the core has no points");
  if (!is_separated(action, Z, n4))
    throw std::logic_error("distinguishing csp: Z separation replay failed");
  if (!point_difference(core, set_image(a, n4, Z)).empty())
    throw std::logic_error("distinguishing csp: Z is not maximal in the core");
  if (!is_syndetic(action, Z, subset_product(n4, data.R, caps)))
    throw std::logic_error("distinguishing csp: Z lost its syndeticity");

  // base coloring g on C0 u (C \ N.Z)
  PointSet nz = set_image(a, data.N, Z);
  PointSet gdom = point_union(c0, point_difference(c, nz));
  PointFunction gfun = empty_point_function(action, data.ell);
  {
    auto ggraph = detail::induced_action_graph(a, gdom, data.F);
    PartialColoring start = empty_coloring(ggraph);
    for (std::uint32_t i = 0; i < gdom.size(); ++i)
      if (point_in(c0, gdom[i])) start.colors[i] = f0.values[gdom[i]];
    PartialColoring ext = extend_proper_coloring(ggraph, start, data.ell);
    for (std::uint32_t i = 0; i < gdom.size(); ++i) gfun.values[gdom[i]] = ext.colors[i];
  }

  // blocks
  std::vector<std::vector<Elem>> block_elems;
  std::vector<PointSet> block_pts;
  std::vector<std::int64_t> owner(a.size(), -1);
  for (std::uint32_t zi = 0; zi < Z.size(); ++zi) {
    std::vector<std::pair<std::uint32_t, Elem>> blk;
    for (const auto& nu : data.N.elems()) {
      std::uint32_t q = a.apply(nu, Z[zi]);
      if (point_in(c, q)) blk.emplace_back(q, nu);
    }
    std::sort(blk.begin(), blk.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    std::vector<Elem> elems;
    PointSet pts;
    for (auto& [q, nu] : blk) {
      if (owner[q] == zi) continue;  // same point reached by two nu is impossible when free
      if (owner[q] >= 0) throw std::logic_error("distinguishing csp: separated blocks overlap");
      owner[q] = zi;
      pts.push_back(q);
      elems.push_back(nu);
    }
    if (pts.empty()) throw std::logic_error("distinguishing csp: a block came out empty");
    block_elems.push_back(std::move(elems));
    block_pts.push_back(std::move(pts));
  }
  for (std::uint32_t zi = 0; zi < Z.size(); ++zi)
    for (std::uint32_t p : block_pts[zi])
      for (const auto& s : data.F.elems()) {
        std::int64_t other = owner[a.apply(s, p)];
        if (other >= 0 && other != zi)
          throw std::logic_error("distinguishing csp: separated blocks touch");
      }

  // admissible block colorings
  std::uint64_t produced = 0;
  std::vector<std::vector<std::vector<int>>> col(Z.size());
  for (std::uint32_t zi = 0; zi < Z.size(); ++zi) {
    const PointSet& pts = block_pts[zi];
    auto bgraph = detail::induced_action_graph(a, pts, data.F);
    std::vector<std::vector<int>> banned(pts.size());
    for (std::uint32_t i = 0; i < pts.size(); ++i)
      for (const auto& s : data.F.elems()) {
        int gv = gfun.values[a.apply(s, pts[i])];
        if (gv >= 0) banned[i].push_back(gv);
      }
    detail::for_each_proper_coloring(*bgraph, data.ell, banned, caps, produced,
                                     [&](const std::vector<int>& cc) {
                                       col[zi].push_back(cc);
                                       return true;
                                     });
    if (col[zi].empty())
      throw std::logic_error("distinguishing csp: a block has no admissible coloring");
  }

  // constraints
  auto drm = subset_product(data.D, subset_product(data.R, data.M, caps), caps);
  auto n5 = subset_power(data.N, 5, caps);
  std::vector<PointSet> norbit(Z.size());
  for (std::uint32_t zi = 0; zi < Z.size(); ++zi)
    norbit[zi] = set_image(a, data.N, {Z[zi]});

  std::vector<CspConstraint> constraints;
  std::vector<std::pair<std::uint32_t, Elem>> tags;
  std::vector<int> scratch = gfun.values;
  std::uint64_t rows_checked = 0;
  for (std::uint32_t zi = 0; zi < Z.size(); ++zi) {
    for (const auto& beta : n5.elems()) {
      Elem bgb = g->mul(g->mul(beta, data.gamma), g->inv(beta));
      PointSet target = point_union(norbit[zi], set_image(a, data.N, {a.apply(bgb, Z[zi])}));
      std::vector<std::uint32_t> delta;
      for (std::uint32_t z2 = 0; z2 < Z.size(); ++z2)
        if (!point_intersection(norbit[z2], target).empty()) delta.push_back(z2);
      if (delta.size() > 2)
        throw std::logic_error("distinguishing csp: dependency spread exceeds two blocks");
      if (std::find(delta.begin(), delta.end(), zi) == delta.end())
        throw std::logic_error("distinguishing csp: a constraint misses its own block");

      std::vector<std::vector<int>> rows;
      std::vector<std::size_t> idx(delta.size(), 0);
      for (;;) {
        check_cap(++rows_checked, caps.pattern_count, "distinguishing constraint rows");
        for (std::size_t d = 0; d < delta.size(); ++d) {
          const auto& row = col[delta[d]][idx[d]];
          const PointSet& pts = block_pts[delta[d]];
          for (std::size_t j = 0; j < pts.size(); ++j) scratch[pts[j]] = row[j];
        }
        bool violated = true;
        for (const auto& nu : drm.elems()) {
          std::uint32_t x1 = a.apply(nu, Z[zi]);
          std::uint32_t x2 = a.apply(g->mul(nu, bgb), Z[zi]);
          if (distinguished_at(data.tau, a, scratch, x1, x2)) {
            violated = false;
            break;
          }
        }
        if (violated) {
          std::vector<int> forb;
          for (std::size_t d = 0; d < delta.size(); ++d) forb.push_back(static_cast<int>(idx[d]));
          rows.push_back(std::move(forb));
        }
        for (std::size_t d = 0; d < delta.size(); ++d) {
          const PointSet& pts = block_pts[delta[d]];
          for (std::uint32_t q : pts) scratch[q] = gfun.values[q];
        }
        std::size_t d = 0;
        while (d < delta.size() && ++idx[d] == col[delta[d]].size()) idx[d++] = 0;
        if (d == delta.size()) break;
      }
      constraints.push_back(
          make_constraint(static_cast<std::uint32_t>(Z.size()), delta, std::move(rows)));
      tags.emplace_back(zi, beta);
    }
  }

  int num_colors = 1;
  std::vector<std::vector<int>> lists(Z.size());
  for (std::uint32_t zi = 0; zi < Z.size(); ++zi) {
    num_colors = std::max(num_colors, static_cast<int>(col[zi].size()));
    lists[zi].resize(col[zi].size());
    std::iota(lists[zi].begin(), lists[zi].end(), 0);
  }
  Csp csp = make_list_csp(num_colors, std::move(lists), std::move(constraints));
  LllParams params = compute_params(csp);
  if (params.ord > 2) throw std::logic_error("distinguishing csp: constraint order exceeds two");
  Int vdeg_cap = Int(256) * ipow(Int(data.D.size()), 14) * ipow(Int(data.R.size()), 7) *
                 ipow(Int(data.M.size()), 7);
  if (Int(params.vdeg) > vdeg_cap)
    throw std::logic_error("distinguishing csp: variable degree exceeds its structural bound");

  return DistinguishCsp{action,     data, std::move(c0),  std::move(c),     std::move(u),
                        std::move(core), std::move(Z),    std::move(gfun),  std::move(block_elems),
                        std::move(block_pts), std::move(col), std::move(csp), std::move(tags),
                        params,     vdeg_cap};
}

// Turns a list-valid CSP assignment into the corresponding coloring of
// C0 u C. Satisfaction is not required here; the rescan is the verdict.
inline PointFunction distinguish_coloring(const DistinguishCsp& dc,
                                          const std::vector<int>& assignment) {
  if (assignment.size() != dc.csp.num_vars)
    throw std::domain_error("distinguish coloring: assignment length mismatch");
  std::vector<int> values = dc.g.values;
  for (std::uint32_t v = 0; v < dc.csp.num_vars; ++v) {
    if (assignment[v] < 0 || assignment[v] >= static_cast<int>(dc.col[v].size()))
      throw std::domain_error("distinguish coloring: assignment outside a variable's list");
    const auto& row = dc.col[v][assignment[v]];
    for (std::size_t j = 0; j < dc.block_pts[v].size(); ++j)
      values[dc.block_pts[v][j]] = row[j];
  }
  const FiniteAction& a = *dc.action;
  for (std::uint32_t p = 0; p < a.size(); ++p) {
    if (values[p] < 0) continue;
    for (const auto& s : dc.data.F.elems()) {
      std::uint32_t q = a.apply(s, p);
      if (values[q] >= 0 && values[q] == values[p])
        throw std::logic_error("distinguish coloring: assembled coloring is not proper");
    }
  }
  return make_point_function(dc.action, dc.data.ell, std::move(values));
}

// Full replay of the distinguishing property: every point must admit a sigma
// in S with rule values defined and different at sigma.x and sigma gamma.x.
struct DistinguishRescan {
  bool ok;
  std::vector<std::optional<Elem>> witness;  // per point, first working sigma
};

inline DistinguishRescan distinguish_rescan(const ActionPtr& action, const DistinguishData& data,
                                            const PointFunction& f) {
  const FiniteAction& a = *action;
  DistinguishRescan out{true, std::vector<std::optional<Elem>>(a.size())};
  for (std::uint32_t x = 0; x < a.size(); ++x) {
    for (const auto& sigma : data.S.elems()) {
      std::uint32_t x1 = a.apply(sigma, x);
      std::uint32_t x2 = a.apply(a.group()->mul(sigma, data.gamma), x);
      if (distinguished_at(data.tau, a, f.values, x1, x2)) {
        out.witness[x] = sigma;
        break;
      }
    }
    if (!out.witness[x]) out.ok = false;
  }
  return out;
}

// Per-constraint witness set: translators nu along which the constraint can be
// defeated, thinned to make their recoloring zones pairwise disjoint.
struct WitnessChain {
  GroupSubset core_hits;       // nu in RM with nu.z in the D-core of C
  GroupSubset conjugation_ok;  // nu in Q.(core_hits) whose conjugate escapes H
  GroupSubset colored_ok;      // also W nu beta gamma beta^-1 . z fully colored
  GroupSubset chosen;          // greedy independent set in the overlap graph
  std::uint64_t conflict_degree;  // max degree of the overlap graph
  std::uint64_t degree_cap;       // 4|D|^2, strict bound
  std::uint64_t required;         // ceil(|M| / (8|D|^3|R|))
};

inline WitnessChain distinguish_witness_set(const DistinguishCsp& dc, std::uint32_t z_var,
                                            const Elem& beta, const Caps& caps = default_caps()) {
  const FiniteAction& a = *dc.action;
  const GroupPtr& g = a.group();
  const DistinguishData& data = dc.data;
  if (z_var >= dc.Z.size()) throw std::domain_error("witness set: no such variable");
  g->check_element(beta);
  std::uint32_t z = dc.Z[z_var];
  Elem bgb = g->mul(g->mul(beta, data.gamma), g->inv(beta));

  auto rm = subset_product(data.R, data.M, caps);
  std::vector<Elem> e1;
  for (const auto& nu : rm.elems())
    if (point_in(dc.core, a.apply(nu, z))) e1.push_back(nu);
  GroupSubset core_hits(g, std::move(e1));

  std::vector<Elem> e2;
  for (const auto& q : data.Q.elems())
    for (const auto& nu1 : core_hits.elems()) {
      Elem nu = g->mul(q, nu1);
      if (!data.H.contains(g->mul(g->mul(nu, bgb), g->inv(nu)))) e2.push_back(nu);
    }
  GroupSubset conjugation_ok(g, std::move(e2));

  std::vector<Elem> e3;
  for (const auto& nu : conjugation_ok.elems()) {
    bool colored = true;
    for (const auto& w : data.W.elems()) {
      std::uint32_t q = a.apply(g->mul(w, g->mul(nu, bgb)), z);
      if (point_in(dc.U, q)) {
        colored = false;
        break;
      }
    }
    if (colored) e3.push_back(nu);
  }
  GroupSubset colored_ok(g, std::move(e3));

  // overlap graph: nu ~ nu' iff their zones D nu u W nu beta gamma beta^-1 meet
  std::vector<GroupSubset> zones;
  for (const auto& nu : colored_ok.elems())
    zones.push_back(subset_union(
        subset_product(data.D, GroupSubset(g, {nu}), caps),
        subset_product(data.W, GroupSubset(g, {g->mul(nu, bgb)}), caps)));
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::uint32_t i = 0; i < zones.size(); ++i)
    for (std::uint32_t j = i + 1; j < zones.size(); ++j)
      if (!subset_intersection(zones[i], zones[j]).is_empty()) edges.emplace_back(i, j);
  auto overlap = FiniteGraph::create(zones.size(), edges);
  PointSet picked = greedy_mis(overlap, {});
  std::vector<Elem> chosen_elems;
  for (std::uint32_t i : picked) chosen_elems.push_back(colored_ok.elems()[i]);
  GroupSubset chosen(g, std::move(chosen_elems));

  WitnessChain out{std::move(core_hits), std::move(conjugation_ok), std::move(colored_ok),
                   std::move(chosen),    overlap->max_degree(),     0, 0};
  out.degree_cap = 4 * static_cast<std::uint64_t>(data.D.size()) * data.D.size();
  if (out.conflict_degree >= out.degree_cap)
    throw std::logic_error("witness set: overlap degree reaches its strict bound");
  {
    Int den = Int(8) * ipow(Int(data.D.size()), 3) * Int(data.R.size());
    Int need = (Int(data.M.size()) + den - 1) / den;
    out.required = need.convert_to<std::uint64_t>();
  }

  auto drm = subset_product(data.D, rm, caps);
  if (!subset_of(out.chosen, drm))
    throw std::logic_error("witness set: a witness escaped DRM");
  auto fwb = subset_power(subset_union(data.F, data.W), data.e_B, caps);
  for (const auto& nu : out.chosen.elems()) {
    if (data.H.contains(g->mul(g->mul(nu, bgb), g->inv(nu))))
      throw std::logic_error("witness set: a chosen conjugate fell back into H");
    for (const auto& t : fwb.elems())
      if (!point_in(dc.C, a.apply(g->mul(t, nu), z)))
        throw std::logic_error("witness set: recoloring zone leaves C");
    for (const auto& w : data.W.elems())
      if (point_in(dc.U, a.apply(g->mul(w, g->mul(nu, bgb)), z)))
        throw std::logic_error("witness set: a chosen witness sees the uncolored part");
  }
  for (std::size_t i = 0; i < picked.size(); ++i)
    for (std::size_t j = i + 1; j < picked.size(); ++j)
      if (!subset_intersection(zones[picked[i]], zones[picked[j]]).is_empty())
        throw std::logic_error("witness set: chosen zones overlap");
  if (out.chosen.size() < out.required)
    throw std::domain_error("witness set: size fell below ceil(|M| / (8|D|^3|R|))");
  return out;
}

// Exact audit of the bad-event probability for one constraint: over a uniform
// admissible extension of g to V = C n (N . Delta), the probability that every
// witness nu in E sees equal rule values. Counted by splitting V into the
// witness zones V_nu = (F u W)^e_B nu . z and the rest, and multiplying the
// per-zone extension counts; their disjointness makes this exact.
struct ProbabilityReport {
  Rat p;
  Int ext_total, ext_bad;
  Rat factor_bound;  // 1 - ell^{-|D|}
  Rat bound_for_e;   // factor_bound^|E|
  Rat bound_for_m;   // factor_bound^required
  bool within_e, within_m;
  bool factors_strict;  // every zone admits an extension breaking the equality
  std::uint64_t base_extensions;
  Rat constraint_p;  // the CSP's own probability for this (z, beta), never above p
};

inline ProbabilityReport distinguish_probability(const DistinguishCsp& dc, std::uint32_t z_var,
                                                 const Elem& beta, const WitnessChain& ws,
                                                 bool assert_bounds = true,
                                                 const Caps& caps = default_caps()) {
  const FiniteAction& a = *dc.action;
  const GroupPtr& g = a.group();
  const DistinguishData& data = dc.data;
  if (z_var >= dc.Z.size()) throw std::domain_error("probability audit: no such variable");
  std::uint32_t z = dc.Z[z_var];
  Elem bgb = g->mul(g->mul(beta, data.gamma), g->inv(beta));

  // V = C n (N . Delta(z, beta))
  PointSet target = point_union(set_image(a, data.N, {z}),
                                set_image(a, data.N, {a.apply(bgb, z)}));
  PointSet V;
  std::vector<std::uint32_t> delta;
  for (std::uint32_t z2 = 0; z2 < dc.Z.size(); ++z2)
    if (!point_intersection(set_image(a, data.N, {dc.Z[z2]}), target).empty()) {
      delta.push_back(z2);
      V = point_union(V, dc.block_pts[z2]);
    }

  auto fwb = subset_power(subset_union(data.F, data.W), data.e_B, caps);
  std::vector<PointSet> vnu;
  PointSet V1;
  for (const auto& nu : ws.chosen.elems()) {
    PointSet zone = sorted_points(set_image(a, fwb, {a.apply(nu, z)}));
    if (!point_difference(zone, V).empty())
      throw std::logic_error("probability audit: a witness zone leaves V");
    if (!point_intersection(zone, V1).empty())
      throw std::logic_error("probability audit: witness zones overlap");
    V1 = point_union(V1, zone);
    vnu.push_back(std::move(zone));
  }
  PointSet V0 = point_difference(V, V1);

  // for scratch evaluation: which rule values to compare per witness
  std::vector<std::pair<std::uint32_t, std::uint32_t>> compare;
  for (const auto& nu : ws.chosen.elems())
    compare.emplace_back(a.apply(nu, z), a.apply(g->mul(nu, bgb), z));

  auto graph0 = detail::induced_action_graph(a, V0, data.F);
  std::vector<int> scratch = dc.g.values;
  auto banned_for = [&](const PointSet& pts) {
    std::vector<std::vector<int>> banned(pts.size());
    for (std::uint32_t i = 0; i < pts.size(); ++i)
      for (const auto& s : data.F.elems()) {
        std::uint32_t q = a.apply(s, pts[i]);
        bool inside = point_in(pts, q);
        if (!inside && scratch[q] >= 0) banned[i].push_back(scratch[q]);
      }
    return banned;
  };

  Int total_sum = 0, bad_sum = 0;
  bool factors_strict = true;
  std::uint64_t base_extensions = 0;
  std::uint64_t produced = 0;
  detail::for_each_proper_coloring(
      *graph0, data.ell, banned_for(V0), caps, produced, [&](const std::vector<int>& psi) {
        ++base_extensions;
        for (std::uint32_t i = 0; i < V0.size(); ++i) scratch[V0[i]] = psi[i];
        Int total_here = 1, bad_here = 1;
        for (std::size_t k = 0; k < vnu.size(); ++k) {
          auto zgraph = detail::induced_action_graph(a, vnu[k], data.F);
          std::uint64_t zone_total = 0, zone_bad = 0;
          std::uint64_t inner = 0;
          detail::for_each_proper_coloring(
              *zgraph, data.ell, banned_for(vnu[k]), caps, inner,
              [&](const std::vector<int>& xi) {
                for (std::uint32_t i = 0; i < vnu[k].size(); ++i) scratch[vnu[k][i]] = xi[i];
                ++zone_total;
                auto v1 = rule_value_at(data.tau, a, scratch, compare[k].first);
                auto v2 = rule_value_at(data.tau, a, scratch, compare[k].second);
                if (!v1 || !v2)
                  throw std::logic_error("probability audit: a rule value came out undefined");
                if (*v1 == *v2) ++zone_bad;
                for (std::uint32_t i = 0; i < vnu[k].size(); ++i) scratch[vnu[k][i]] = -1;
                return true;
              });
          if (zone_total == 0)
            throw std::logic_error("probability audit: a zone admits no extension");
          if (zone_bad >= zone_total) factors_strict = false;
          total_here *= zone_total;
          bad_here *= zone_bad;
        }
        total_sum += total_here;
        bad_sum += bad_here;
        for (std::uint32_t q : V0) scratch[q] = dc.g.values[q];
        return true;
      });
  if (total_sum == 0) throw std::logic_error("probability audit: no extensions at all");

  ProbabilityReport out{Rat(bad_sum, total_sum),
                        total_sum,
                        bad_sum,
                        Rat(0),
                        Rat(0),
                        Rat(0),
                        false,
                        false,
                        factors_strict,
                        base_extensions,
                        Rat(0)};
  Int elld = ipow(Int(data.ell), data.D.size());
  out.factor_bound = Rat(elld - 1, elld);
  out.bound_for_e = rpow(out.factor_bound, ws.chosen.size());
  out.bound_for_m = rpow(out.factor_bound, ws.required);
  out.within_e = out.p <= out.bound_for_e;
  out.within_m = out.p <= out.bound_for_m;

  // the CSP's own violation probability can never exceed the audited p
  for (std::size_t i = 0; i < dc.tags.size(); ++i)
    if (dc.tags[i].first == z_var && dc.tags[i].second == beta) {
      out.constraint_p = constraint_probability(dc.csp.constraints[i], dc.csp);
      Int expected = 1;
      for (auto v : delta) expected *= static_cast<std::int64_t>(dc.col[v].size());
      if (expected != total_sum)
        throw std::logic_error("probability audit: extension count disagrees with the lists");
      if (out.constraint_p > out.p)
        throw std::logic_error("probability audit: lost to its own constraint");
      break;
    }

  if (assert_bounds && (!out.within_e || !out.within_m))
    throw std::domain_error("probability audit: bound violated at these exponents");
  return out;
}

// Monte-Carlo variant: uniform admissible extensions of g to V by rejection
// from uniform value tuples, then the same equal-values event. Returns a 99%
// confidence half-width; exact mode is preferred whenever it fits the caps.
struct SampledProbability {
  double estimate;
  double half_width;
  std::uint64_t attempts, accepted, bad;
  double bound_for_e;
  bool compatible;  // estimate - half_width does not exceed the bound
};

inline SampledProbability distinguish_probability_sampled(const DistinguishCsp& dc,
                                                          std::uint32_t z_var, const Elem& beta,
                                                          const WitnessChain& ws,
                                                          std::uint64_t seed,
                                                          std::uint64_t attempts) {
  const FiniteAction& a = *dc.action;
  const GroupPtr& g = a.group();
  const DistinguishData& data = dc.data;
  if (z_var >= dc.Z.size()) throw std::domain_error("probability audit: no such variable");
  std::uint32_t z = dc.Z[z_var];
  Elem bgb = g->mul(g->mul(beta, data.gamma), g->inv(beta));

  PointSet target = point_union(set_image(a, data.N, {z}),
                                set_image(a, data.N, {a.apply(bgb, z)}));
  PointSet V;
  for (std::uint32_t z2 = 0; z2 < dc.Z.size(); ++z2)
    if (!point_intersection(set_image(a, data.N, {dc.Z[z2]}), target).empty())
      V = point_union(V, dc.block_pts[z2]);

  std::vector<std::pair<std::uint32_t, std::uint32_t>> compare;
  for (const auto& nu : ws.chosen.elems())
    compare.emplace_back(a.apply(nu, z), a.apply(g->mul(nu, bgb), z));

  std::vector<int> scratch = dc.g.values;
  std::uint64_t accepted = 0, bad = 0;
  for (std::uint64_t t = 0; t < attempts; ++t) {
    for (std::uint32_t i = 0; i < V.size(); ++i)
      scratch[V[i]] = static_cast<int>(rng::uniform_below(seed, t, i, data.ell));
    bool proper = true;
    for (std::uint32_t i = 0; i < V.size() && proper; ++i)
      for (const auto& s : data.F.elems()) {
        std::uint32_t q = a.apply(s, V[i]);
        if (scratch[q] >= 0 && scratch[q] == scratch[V[i]] && q != V[i]) {
          proper = false;
          break;
        }
      }
    if (proper) {
      ++accepted;
      bool all_equal = true;
      for (const auto& [x1, x2] : compare) {
        auto v1 = rule_value_at(data.tau, a, scratch, x1);
        auto v2 = rule_value_at(data.tau, a, scratch, x2);
        if (!v1 || !v2 || *v1 != *v2) {
          all_equal = false;
          break;
        }
      }
      if (all_equal) ++bad;
    }
    for (std::uint32_t q : V) scratch[q] = dc.g.values[q];
  }

  SampledProbability out{0.0, 1.0, attempts, accepted, bad, 0.0, false};
  Int elld = ipow(Int(data.ell), data.D.size());
  out.bound_for_e =
      std::pow(1.0 - 1.0 / static_cast<double>(elld.convert_to<double>()),
               static_cast<double>(ws.chosen.size()));
  if (accepted > 0) {
    double phat = static_cast<double>(bad) / static_cast<double>(accepted);
    out.estimate = phat;
    out.half_width = 2.5758 * std::sqrt(std::max(phat * (1.0 - phat), 1e-12) /
                                        static_cast<double>(accepted));
    out.compatible = out.estimate - out.half_width <= out.bound_for_e;
  }
  return out;
}

}  // namespace shiftlab
