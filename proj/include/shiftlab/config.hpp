#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "caps.hpp"
#include "group.hpp"
#include "subset.hpp"

namespace shiftlab {

// Total map from a finite group into {0..k-1}, stored in canonical element
// order. The shift convention is (g.x)(d) = x(d*g).
struct Configuration {
  GroupPtr group;
  int k = 0;
  std::vector<int> values;
};

inline Configuration make_configuration(GroupPtr group, int k, std::vector<int> values) {
  if (!group->finite())
    throw std::domain_error("configuration: group must be finite");
  if (k < 1) throw std::domain_error("configuration: alphabet must be nonempty");
  if (values.size() != group->order())
    throw std::domain_error("configuration: wrong number of values");
  for (int v : values)
    if (v < 0 || v >= k) throw std::domain_error("configuration: value out of range");
  return Configuration{std::move(group), k, std::move(values)};
}

inline int config_at(const Configuration& x, const Elem& d) {
  return x.values[x.group->index_of(d)];
}

inline Configuration shift(const Configuration& x, const Elem& g) {
  x.group->check_element(g);
  Configuration out{x.group, x.k, std::vector<int>(x.values.size())};
  for (std::uint64_t i = 0; i < x.group->order(); ++i)
    out.values[i] = x.values[x.group->index_of(x.group->mul(x.group->element_at(i), g))];
  return out;
}

inline GroupSubset stabilizer(const Configuration& x) {
  std::vector<Elem> st;
  for (std::uint64_t i = 0; i < x.group->order(); ++i) {
    Elem g = x.group->element_at(i);
    if (shift(x, g).values == x.values) st.push_back(std::move(g));
  }
  return GroupSubset(x.group, std::move(st));
}

inline bool has_trivial_stabilizer(const Configuration& x) {
  for (std::uint64_t i = 1; i < x.group->order(); ++i)
    if (shift(x, x.group->element_at(i)).values == x.values) return false;
  return true;
}

// All configurations with trivial stabilizer, in lexicographic value order.
inline std::vector<Configuration> free_part(const GroupPtr& group, int k,
                                            const Caps& caps = default_caps()) {
  if (!group->finite()) throw std::domain_error("free_part: group must be finite");
  if (k < 1) throw std::domain_error("free_part: alphabet must be nonempty");
  const std::uint64_t n = group->order();
  std::uint64_t space = 1;
  for (std::uint64_t i = 0; i < n; ++i) {
    if (space > caps.table_entries / static_cast<std::uint64_t>(k))
      throw CapExceeded("free_part: configuration space over cap");
    space *= static_cast<std::uint64_t>(k);
  }
  check_cap(space, caps.table_entries, "free_part table");
  std::vector<Configuration> out;
  std::vector<int> v(n, 0);
  for (;;) {
    Configuration x{group, k, v};
    if (has_trivial_stabilizer(x)) out.push_back(x);
    std::size_t i = n;
    while (i > 0 && v[i - 1] == k - 1) --i;
    if (i == 0) break;
    ++v[i - 1];
    for (std::size_t j = i; j < n; ++j) v[j] = 0;
  }
  return out;
}

// Subshift of finite type: window W plus the list of allowed patterns on W.
// x is a member iff for every g the pattern d -> x(d*g) over d in W is allowed.
struct Sft {
  GroupPtr group;
  int k = 0;
  GroupSubset window;
  std::vector<std::vector<int>> allowed;  // sorted, each aligned with window.elems()
};

inline Sft make_sft(GroupPtr group, int k, GroupSubset window,
                    std::vector<std::vector<int>> allowed) {
  if (window.is_empty()) throw std::domain_error("sft: window must be nonempty");
  if (window.group().get() != group.get())
    throw std::domain_error("sft: window lives in a different group");
  if (k < 1) throw std::domain_error("sft: alphabet must be nonempty");
  for (const auto& p : allowed) {
    if (p.size() != window.size())
      throw std::domain_error("sft: pattern not total on window");
    for (int v : p)
      if (v < 0 || v >= k) throw std::domain_error("sft: pattern value out of range");
  }
  std::sort(allowed.begin(), allowed.end());
  allowed.erase(std::unique(allowed.begin(), allowed.end()), allowed.end());
  return Sft{std::move(group), k, std::move(window), std::move(allowed)};
}

// Proper-coloring shift: window F + {1}, allowed patterns are those whose
// value at the identity differs from the value at every element of F.
inline Sft proper_coloring_sft(const GroupPtr& group, const GroupSubset& F, int ell,
                               const Caps& caps = default_caps()) {
  if (F.group().get() != group.get())
    throw std::domain_error("proper_coloring_sft: F lives in a different group");
  if (F.contains_identity())
    throw std::domain_error("proper_coloring_sft: F must not contain the identity");
  if (!F.is_symmetric())
    throw std::domain_error("proper_coloring_sft: F must be symmetric");
  if (ell < 1) throw std::domain_error("proper_coloring_sft: need at least one color");
  GroupSubset window = subset_union(F, GroupSubset::identity_of(group));
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < window.size(); ++i) {
    if (total > caps.pattern_count / static_cast<std::uint64_t>(ell))
      throw CapExceeded("proper_coloring_sft: pattern space over cap");
    total *= static_cast<std::uint64_t>(ell);
  }
  std::size_t id_pos = 0;
  const auto& w = window.elems();
  for (std::size_t i = 0; i < w.size(); ++i)
    if (group->is_identity(w[i])) id_pos = i;
  std::vector<std::vector<int>> allowed;
  std::vector<int> p(window.size(), 0);
  for (;;) {
    bool good = true;
    for (std::size_t i = 0; i < w.size(); ++i)
      if (i != id_pos && p[i] == p[id_pos]) {
        good = false;
        break;
      }
    if (good) allowed.push_back(p);
    std::size_t i = p.size();
    while (i > 0 && p[i - 1] == ell - 1) --i;
    if (i == 0) break;
    ++p[i - 1];
    for (std::size_t j = i; j < p.size(); ++j) p[j] = 0;
  }
  return make_sft(group, ell, std::move(window), std::move(allowed));
}

inline std::vector<int> pattern_at(const Configuration& x, const GroupSubset& window,
                                   const Elem& g) {
  std::vector<int> p;
  p.reserve(window.size());
  for (const auto& w : window.elems())
    p.push_back(x.values[x.group->index_of(x.group->mul(w, g))]);
  return p;
}

inline bool sft_membership(const Sft& s, const Configuration& x) {
  if (s.group.get() != x.group.get())
    throw std::domain_error("sft_membership: configuration lives in a different group");
  if (s.k != x.k) throw std::domain_error("sft_membership: alphabet mismatch");
  for (std::uint64_t i = 0; i < x.group->order(); ++i) {
    auto p = pattern_at(x, s.window, x.group->element_at(i));
    if (!std::binary_search(s.allowed.begin(), s.allowed.end(), p)) return false;
  }
  return true;
}

// Window-level check for partial data: every window translate that sees at
// least one point of V must be completable to an allowed pattern. Works over
// infinite groups.
inline bool sft_local_check(const Sft& s, const GroupSubset& V,
                            const std::vector<int>& values) {
  if (V.size() != values.size())
    throw std::domain_error("sft_local_check: values not aligned with V");
  const auto& g = s.group;
  auto value_at = [&](const Elem& e) -> std::optional<int> {
    const auto& ve = V.elems();
    auto it = std::lower_bound(ve.begin(), ve.end(), e,
                               [&](const Elem& a, const Elem& b) { return g->less(a, b); });
    if (it == ve.end() || *it != e) return std::nullopt;
    return values[static_cast<std::size_t>(it - ve.begin())];
  };
  // candidate translates: t = w^-1 v
  std::vector<Elem> candidates;
  for (const auto& w : s.window.elems())
    for (const auto& v : V.elems()) candidates.push_back(g->mul(g->inv(w), v));
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  for (const auto& t : candidates) {
    std::vector<int> visible(s.window.size(), -1);
    const auto& w = s.window.elems();
    for (std::size_t i = 0; i < w.size(); ++i) {
      auto v = value_at(g->mul(w[i], t));
      if (v) visible[i] = *v;
    }
    bool completable = false;
    for (const auto& p : s.allowed) {
      bool agrees = true;
      for (std::size_t i = 0; i < p.size(); ++i)
        if (visible[i] >= 0 && visible[i] != p[i]) {
          agrees = false;
          break;
        }
      if (agrees) {
        completable = true;
        break;
      }
    }
    if (!completable) return false;
  }
  return true;
}

// Partial map from window patterns to an output alphabet.
struct LocalRule {
  GroupPtr group;
  int k = 0;  // input alphabet
  int m = 0;  // output alphabet
  GroupSubset window;
  std::vector<std::pair<std::vector<int>, int>> table;  // sorted by pattern
};

inline LocalRule make_local_rule(GroupPtr group, int k, int m, GroupSubset window,
                                 std::vector<std::pair<std::vector<int>, int>> table) {
  if (window.is_empty()) throw std::domain_error("local rule: window must be nonempty");
  if (window.group().get() != group.get())
    throw std::domain_error("local rule: window lives in a different group");
  if (k < 1 || m < 1) throw std::domain_error("local rule: empty alphabet");
  for (const auto& [p, v] : table) {
    if (p.size() != window.size())
      throw std::domain_error("local rule: pattern not total on window");
    for (int pv : p)
      if (pv < 0 || pv >= k) throw std::domain_error("local rule: pattern value out of range");
    if (v < 0 || v >= m) throw std::domain_error("local rule: output out of range");
  }
  std::sort(table.begin(), table.end());
  for (std::size_t i = 0; i + 1 < table.size(); ++i)
    if (table[i].first == table[i + 1].first) {
      if (table[i].second != table[i + 1].second)
        throw std::domain_error("local rule: conflicting entries");
    }
  table.erase(std::unique(table.begin(), table.end()), table.end());
  return LocalRule{std::move(group), k, m, std::move(window), std::move(table)};
}

inline std::optional<int> rule_apply(const LocalRule& r, const std::vector<int>& pattern) {
  auto it = std::lower_bound(
      r.table.begin(), r.table.end(), pattern,
      [](const auto& entry, const std::vector<int>& p) { return entry.first < p; });
  if (it == r.table.end() || it->first != pattern) return std::nullopt;
  return it->second;
}

// Rule value of the shifted configuration g.x, i.e. the pattern w -> x(w*g).
inline std::optional<int> rule_at(const LocalRule& r, const Configuration& x,
                                  const Elem& g) {
  return rule_apply(r, pattern_at(x, r.window, g));
}

// Evaluation rule: window {1}, value the symbol itself.
inline LocalRule evaluation_rule(const GroupPtr& group, int k) {
  std::vector<std::pair<std::vector<int>, int>> table;
  for (int v = 0; v < k; ++v) table.push_back({{v}, v});
  return make_local_rule(group, k, k, GroupSubset::identity_of(group), std::move(table));
}

}  // namespace shiftlab
