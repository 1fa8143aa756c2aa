#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "caps.hpp"
#include "group.hpp"

namespace shiftlab {

// Finite subset of a group, always sorted in the group's canonical order and
// duplicate-free. Operations on two subsets require the same Group instance.
class GroupSubset {
 public:
  GroupSubset() = default;

  GroupSubset(GroupPtr g, std::vector<Elem> elems) : group_(std::move(g)) {
    if (!group_) throw std::domain_error("subset: null group");
    for (const auto& e : elems) group_->check_element(e);
    std::sort(elems.begin(), elems.end(),
              [this](const Elem& a, const Elem& b) { return group_->less(a, b); });
    elems.erase(std::unique(elems.begin(), elems.end()), elems.end());
    elems_ = std::move(elems);
  }

  static GroupSubset empty(GroupPtr g) { return GroupSubset(std::move(g), {}); }

  static GroupSubset identity_of(GroupPtr g) {
    Elem e = g->identity();
    return GroupSubset(std::move(g), {std::move(e)});
  }

  const GroupPtr& group() const { return group_; }
  const std::vector<Elem>& elems() const { return elems_; }
  std::size_t size() const { return elems_.size(); }
  bool is_empty() const { return elems_.empty(); }

  bool contains(const Elem& e) const {
    return std::binary_search(
        elems_.begin(), elems_.end(), e,
        [this](const Elem& a, const Elem& b) { return group_->less(a, b); });
  }

  bool contains_identity() const { return contains(group_->identity()); }

  bool is_symmetric() const {
    for (const auto& e : elems_)
      if (!contains(group_->inv(e))) return false;
    return true;
  }

  bool operator==(const GroupSubset& o) const {
    return group_.get() == o.group_.get() && elems_ == o.elems_;
  }

 private:
  GroupPtr group_;
  std::vector<Elem> elems_;
};

inline void require_same_group(const GroupPtr& a, const GroupPtr& b, const char* op) {
  if (a.get() != b.get())
    throw std::domain_error(std::string(op) + ": operands live in different groups");
}

inline void require_same_group(const GroupSubset& a, const GroupSubset& b,
                               const char* op) {
  if (a.group().get() != b.group().get())
    throw std::domain_error(std::string(op) + ": operands live in different groups");
}

inline GroupSubset subset_product(const GroupSubset& a, const GroupSubset& b,
                                  const Caps& caps = default_caps()) {
  require_same_group(a, b, "product");
  check_cap(static_cast<std::uint64_t>(a.size()) * b.size(), caps.pattern_count,
            "subset product");
  std::vector<Elem> out;
  out.reserve(a.size() * b.size());
  for (const auto& x : a.elems())
    for (const auto& y : b.elems()) out.push_back(a.group()->mul(x, y));
  return GroupSubset(a.group(), std::move(out));
}

// A^0 = {identity}, including for empty A.
inline GroupSubset subset_power(const GroupSubset& a, std::uint64_t e,
                                const Caps& caps = default_caps()) {
  GroupSubset acc = GroupSubset::identity_of(a.group());
  for (std::uint64_t i = 0; i < e; ++i) acc = subset_product(acc, a, caps);
  return acc;
}

inline GroupSubset subset_inverse(const GroupSubset& a) {
  std::vector<Elem> out;
  out.reserve(a.size());
  for (const auto& x : a.elems()) out.push_back(a.group()->inv(x));
  return GroupSubset(a.group(), std::move(out));
}

inline GroupSubset symmetrize(const GroupSubset& a, bool include_identity) {
  std::vector<Elem> out(a.elems());
  for (const auto& x : a.elems()) out.push_back(a.group()->inv(x));
  if (include_identity) out.push_back(a.group()->identity());
  return GroupSubset(a.group(), std::move(out));
}

inline GroupSubset subset_union(const GroupSubset& a, const GroupSubset& b) {
  require_same_group(a, b, "union");
  std::vector<Elem> out(a.elems());
  out.insert(out.end(), b.elems().begin(), b.elems().end());
  return GroupSubset(a.group(), std::move(out));
}

inline GroupSubset subset_intersection(const GroupSubset& a, const GroupSubset& b) {
  require_same_group(a, b, "intersection");
  std::vector<Elem> out;
  for (const auto& x : a.elems())
    if (b.contains(x)) out.push_back(x);
  return GroupSubset(a.group(), std::move(out));
}

inline GroupSubset subset_difference(const GroupSubset& a, const GroupSubset& b) {
  require_same_group(a, b, "difference");
  std::vector<Elem> out;
  for (const auto& x : a.elems())
    if (!b.contains(x)) out.push_back(x);
  return GroupSubset(a.group(), std::move(out));
}

inline bool subset_of(const GroupSubset& a, const GroupSubset& b) {
  require_same_group(a, b, "subset_of");
  for (const auto& x : a.elems())
    if (!b.contains(x)) return false;
  return true;
}

inline GroupSubset ball(const GroupPtr& g, const std::vector<Elem>& gens,
                        std::uint64_t r, const Caps& caps = default_caps()) {
  GroupSubset base = symmetrize(GroupSubset(g, gens), /*include_identity=*/true);
  return subset_power(base, r, caps);
}

// Smallest canonical-prefix-driven symmetric set containing the identity with
// at least min_size elements: walk elements in canonical order, adding each
// together with its inverse.
inline GroupSubset symmetric_canonical_set(const GroupPtr& g, std::size_t min_size) {
  std::vector<Elem> out{g->identity()};
  std::size_t next = 1;
  std::size_t distinct = 1;
  while (distinct < min_size) {
    if (g->finite() && next >= g->order())
      throw std::domain_error("symmetric_canonical_set: group too small for size " +
                              std::to_string(min_size));
    Elem e = g->finite() ? g->element_at(next) : g->first_elements(next + 1).back();
    ++next;
    bool fresh = std::find(out.begin(), out.end(), e) == out.end();
    if (!fresh) continue;
    out.push_back(e);
    ++distinct;
    Elem ei = g->inv(e);
    if (std::find(out.begin(), out.end(), ei) == out.end()) {
      out.push_back(ei);
      ++distinct;
    }
  }
  return GroupSubset(g, std::move(out));
}

namespace detail {

inline std::vector<std::uint32_t> subgroup_closure(const Group& g,
                                                   std::vector<std::uint32_t> seed) {
  const std::uint64_t n = g.order();
  std::vector<char> in(n, 0);
  std::vector<std::uint32_t> list;
  auto add = [&](std::uint32_t i) {
    if (!in[i]) {
      in[i] = 1;
      list.push_back(i);
    }
  };
  add(0);
  for (auto s : seed) add(s);
  for (std::size_t i = 0; i < list.size(); ++i)
    for (std::size_t j = 0; j < list.size(); ++j) {
      Elem p = g.mul(g.element_at(list[i]), g.element_at(list[j]));
      add(static_cast<std::uint32_t>(g.index_of(p)));
    }
  std::sort(list.begin(), list.end());
  return list;
}

}  // namespace detail

// All subgroups of a finite group, found by saturating generator closures.
inline std::vector<GroupSubset> all_subgroups(const GroupPtr& g,
                                              const Caps& caps = default_caps()) {
  if (!g->finite()) throw std::domain_error("all_subgroups: group must be finite");
  const std::uint64_t n = g->order();
  std::vector<std::vector<std::uint32_t>> found;
  std::vector<std::size_t> work;
  std::uint64_t closures = 0;
  auto push = [&](std::vector<std::uint32_t> h) {
    if (std::find(found.begin(), found.end(), h) == found.end()) {
      found.push_back(std::move(h));
      work.push_back(found.size() - 1);
    }
  };
  push(detail::subgroup_closure(*g, {}));
  while (!work.empty()) {
    std::size_t idx = work.back();
    work.pop_back();
    std::vector<std::uint32_t> base = found[idx];
    for (std::uint32_t e = 1; e < n; ++e) {
      if (std::binary_search(base.begin(), base.end(), e)) continue;
      check_cap(++closures, caps.search_nodes, "all_subgroups closures");
      auto ext = base;
      ext.push_back(e);
      push(detail::subgroup_closure(*g, std::move(ext)));
    }
  }
  std::sort(found.begin(), found.end(),
            [](const auto& a, const auto& b) {
              if (a.size() != b.size()) return a.size() < b.size();
              return a < b;
            });
  std::vector<GroupSubset> out;
  out.reserve(found.size());
  for (const auto& h : found) {
    std::vector<Elem> elems;
    elems.reserve(h.size());
    for (auto i : h) elems.push_back(g->element_at(i));
    out.emplace_back(g, std::move(elems));
  }
  return out;
}

inline bool is_subgroup(const GroupSubset& h) {
  if (!h.contains_identity()) return false;
  for (const auto& a : h.elems()) {
    if (!h.contains(h.group()->inv(a))) return false;
    for (const auto& b : h.elems())
      if (!h.contains(h.group()->mul(a, b))) return false;
  }
  return true;
}

inline bool is_normal_subgroup(const GroupSubset& h) {
  const auto& g = h.group();
  if (!g->finite()) throw std::domain_error("is_normal_subgroup: group must be finite");
  if (!is_subgroup(h)) return false;
  for (std::uint64_t i = 0; i < g->order(); ++i) {
    Elem c = g->element_at(i);
    Elem ci = g->inv(c);
    for (const auto& x : h.elems())
      if (!h.contains(g->mul(g->mul(c, x), ci))) return false;
  }
  return true;
}

inline std::vector<GroupSubset> normal_subgroups(const GroupPtr& g,
                                                 const Caps& caps = default_caps()) {
  std::vector<GroupSubset> out;
  for (auto& h : all_subgroups(g, caps))
    if (is_normal_subgroup(h)) out.push_back(std::move(h));
  return out;
}

}  // namespace shiftlab
