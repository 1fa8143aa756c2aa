#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "shiftlab/caps.hpp"
#include "shiftlab/group.hpp"
#include "shiftlab/subset.hpp"

namespace shiftlab {

// core: marker sets grow through D-core splits; T_0 = {1}, Q_n = first
// |T_n||D|^2 + 1 canonical elements, R_n = T_n.Q_n, S_n = symmetrized
// D^2.R_n.R_n^-1.D^2 with identity.
// plain: doubling through disjoint translates; T_0 given, delta_n = first
// canonical element with T_n and T_n.delta_n disjoint, R_n = their union,
// S_n = R_n.R_n^-1.
// Either way T_{n+1} = S_n.T_n.
enum class ScheduleMode { core, plain };

struct ScheduleEntry {
  GroupSubset T;
  GroupSubset R;
  GroupSubset S;
  std::optional<GroupSubset> Q;  // core mode
  std::optional<Elem> delta;     // plain mode
};

struct Schedule {
  ScheduleMode mode;
  GroupSubset D;
  std::vector<ScheduleEntry> entries;
  GroupSubset final_T;  // T_{count}, the set the next entry would start from
};

namespace detail {

inline Elem first_disjoint_translator(const GroupPtr& g, const GroupSubset& T,
                                      std::size_t entry) {
  std::size_t budget = g->finite() ? static_cast<std::size_t>(g->order()) : 4096;
  for (std::size_t count = 16;; count = count * 2) {
    if (count > budget) count = budget;
    for (const auto& delta : g->first_elements(count)) {
      bool disjoint = true;
      for (const auto& t : T.elems())
        if (T.contains(g->mul(t, delta))) {
          disjoint = false;
          break;
        }
      if (disjoint) return delta;
    }
    if (count == budget)
      throw std::domain_error("schedule: group too small for a disjoint translate at entry " +
                              std::to_string(entry));
  }
}

}  // namespace detail

// Builds `count` entries. D participates only in core mode. Throws when a
// finite group cannot supply enough distinct elements for an entry.
inline Schedule schedule_sets(ScheduleMode mode, const GroupPtr& g, const GroupSubset& D,
                              const GroupSubset& T0, std::size_t count,
                              const Caps& caps = default_caps()) {
  require_same_group(g, D.group(), "schedule");
  require_same_group(g, T0.group(), "schedule");
  if (mode == ScheduleMode::core) {
    if (!(T0 == GroupSubset::identity_of(g)))
      throw std::domain_error("schedule: core mode starts from T = {identity}");
    if (D.is_empty()) throw std::domain_error("schedule: core mode needs nonempty D");
  }
  if (T0.is_empty()) throw std::domain_error("schedule: T must be nonempty");

  Schedule out{mode, D, {}, T0};
  GroupSubset T = T0;
  for (std::size_t n = 0; n < count; ++n) {
    ScheduleEntry entry{T, GroupSubset::empty(g), GroupSubset::empty(g), std::nullopt,
                        std::nullopt};
    if (mode == ScheduleMode::core) {
      std::size_t need = T.size() * D.size() * D.size() + 1;
      if (g->finite() && need > g->order())
        throw std::domain_error("schedule: group too small for Q at entry " + std::to_string(n));
      GroupSubset Q(g, g->first_elements(need));
      if (Q.size() != need)
        throw std::domain_error("schedule: group too small for Q at entry " + std::to_string(n));
      entry.Q = Q;
      entry.R = subset_product(T, Q, caps);
      auto d2 = subset_power(D, 2, caps);
      entry.S = symmetrize(
          subset_product(subset_product(d2, subset_product(entry.R, subset_inverse(entry.R), caps),
                                        caps),
                         d2, caps),
          true);
    } else {
      Elem delta = detail::first_disjoint_translator(g, T, n);
      entry.delta = delta;
      auto t_delta = subset_product(T, GroupSubset(g, {delta}), caps);
      entry.R = subset_union(T, t_delta);
      if (entry.R.size() != 2 * T.size())
        throw std::logic_error("schedule: translate overlap slipped through");
      entry.S = symmetrize(subset_product(entry.R, subset_inverse(entry.R), caps), true);
    }
    T = subset_product(entry.S, T, caps);
    out.entries.push_back(std::move(entry));
  }
  out.final_T = T;
  return out;
}

// Replays every structural invariant of a built schedule; returns the first
// failure description or nothing when clean.
inline std::optional<std::string> schedule_audit(const Schedule& s,
                                                 const Caps& caps = default_caps()) {
  const GroupPtr& g = s.D.group();
  for (std::size_t n = 0; n < s.entries.size(); ++n) {
    const auto& e = s.entries[n];
    auto tag = [&](const char* what) {
      return std::string("entry ") + std::to_string(n) + ": " + what;
    };
    if (!e.S.is_symmetric() || !e.S.contains_identity())
      return tag("S not symmetric with identity");
    const GroupSubset& next = n + 1 < s.entries.size() ? s.entries[n + 1].T : s.final_T;
    if (!(next == subset_product(e.S, e.T, caps))) return tag("T_next is not S.T");
    if (s.mode == ScheduleMode::core) {
      if (!e.Q) return tag("missing Q");
      if (e.Q->size() <= e.T.size() * s.D.size() * s.D.size()) return tag("|Q| too small");
      if (!(e.R == subset_product(e.T, *e.Q, caps))) return tag("R is not T.Q");
      auto d2 = subset_power(s.D, 2, caps);
      auto req = subset_product(
          subset_product(d2, subset_product(e.R, subset_inverse(e.R), caps), caps), d2, caps);
      if (!subset_of(req, e.S)) return tag("S misses D^2.R.R^-1.D^2");
    } else {
      if (!e.delta) return tag("missing delta");
      auto t_delta = subset_product(e.T, GroupSubset(g, {*e.delta}), caps);
      if (!subset_intersection(e.T, t_delta).is_empty()) return tag("T meets T.delta");
      if (!(e.R == subset_union(e.T, t_delta))) return tag("R is not T plus T.delta");
      if (!subset_of(subset_product(e.R, subset_inverse(e.R), caps), e.S))
        return tag("S misses R.R^-1");
    }
  }
  return std::nullopt;
}

}  // namespace shiftlab
