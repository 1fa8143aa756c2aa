#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "config.hpp"
#include "group.hpp"
#include "subset.hpp"

namespace shiftlab {

// Left action of a finite group on a finite point set, held as one permutation
// per group element. Shift actions keep their configurations as payload so
// point predicates can inspect symbols.
class FiniteAction {
 public:
  using Ptr = std::shared_ptr<const FiniteAction>;

  static Ptr translation(GroupPtr group) {
    if (!group->finite()) throw std::domain_error("translation action: group must be finite");
    auto a = std::make_shared<FiniteAction>(Private{});
    a->group_ = group;
    a->n_ = group->order();
    a->build_tables([&](std::uint64_t gi, std::uint32_t p) {
      return static_cast<std::uint32_t>(
          group->index_of(group->mul(group->element_at(gi), group->element_at(p))));
    });
    return a;
  }

  // Shift action on an explicit set of configurations; the set must be closed
  // under the shift. Points are sorted by value vector.
  static Ptr shift_action(std::vector<Configuration> configs) {
    if (configs.empty()) throw std::domain_error("shift action: no points");
    GroupPtr group = configs[0].group;
    int k = configs[0].k;
    for (const auto& c : configs) {
      if (c.group.get() != group.get() || c.k != k)
        throw std::domain_error("shift action: mixed configurations");
    }
    std::sort(configs.begin(), configs.end(),
              [](const Configuration& a, const Configuration& b) {
                return a.values < b.values;
              });
    configs.erase(std::unique(configs.begin(), configs.end(),
                              [](const Configuration& a, const Configuration& b) {
                                return a.values == b.values;
                              }),
                  configs.end());
    auto find = [&](const std::vector<int>& v) -> std::int64_t {
      auto it = std::lower_bound(configs.begin(), configs.end(), v,
                                 [](const Configuration& c, const std::vector<int>& w) {
                                   return c.values < w;
                                 });
      if (it == configs.end() || it->values != v) return -1;
      return it - configs.begin();
    };
    auto a = std::make_shared<FiniteAction>(Private{});
    a->group_ = group;
    a->n_ = configs.size();
    a->configs_ = configs;
    a->build_tables([&](std::uint64_t gi, std::uint32_t p) {
      Configuration moved = shift(configs[p], group->element_at(gi));
      std::int64_t idx = find(moved.values);
      if (idx < 0) throw std::domain_error("shift action: set not closed under shift");
      return static_cast<std::uint32_t>(idx);
    });
    return a;
  }

  static Ptr custom(GroupPtr group, std::size_t n,
                    const std::function<std::uint32_t(std::uint64_t, std::uint32_t)>& fn) {
    if (!group->finite()) throw std::domain_error("action: group must be finite");
    if (n == 0) throw std::domain_error("action: no points");
    auto a = std::make_shared<FiniteAction>(Private{});
    a->group_ = group;
    a->n_ = n;
    a->build_tables(fn);
    return a;
  }

  const GroupPtr& group() const { return group_; }
  std::size_t size() const { return n_; }
  bool has_configs() const { return !configs_.empty(); }
  const std::vector<Configuration>& configs() const { return configs_; }

  std::uint32_t apply_index(std::uint64_t gi, std::uint32_t p) const {
    return act_[gi][p];
  }

  std::uint32_t apply(const Elem& g, std::uint32_t p) const {
    return act_[group_->index_of(g)][p];
  }

  GroupSubset point_stabilizer(std::uint32_t p) const {
    std::vector<Elem> st;
    for (std::uint64_t gi = 0; gi < group_->order(); ++gi)
      if (act_[gi][p] == p) st.push_back(group_->element_at(gi));
    return GroupSubset(group_, std::move(st));
  }

  // Nonidentity elements of F must move every point.
  bool free_over(const GroupSubset& F) const {
    for (const auto& s : F.elems()) {
      if (group_->is_identity(s)) continue;
      const auto& row = act_[group_->index_of(s)];
      for (std::uint32_t p = 0; p < n_; ++p)
        if (row[p] == p) return false;
    }
    return true;
  }

  bool is_free() const {
    for (std::uint64_t gi = 1; gi < group_->order(); ++gi)
      for (std::uint32_t p = 0; p < n_; ++p)
        if (act_[gi][p] == p) return false;
    return true;
  }

  struct Private {};
  explicit FiniteAction(Private) {}

 private:
  template <typename Fn>
  void build_tables(const Fn& fn) {
    const std::uint64_t ord = group_->order();
    act_.assign(ord, std::vector<std::uint32_t>(n_));
    for (std::uint64_t gi = 0; gi < ord; ++gi)
      for (std::uint32_t p = 0; p < n_; ++p) {
        std::uint32_t q = fn(gi, p);
        if (q >= n_) throw std::domain_error("action: image out of range");
        act_[gi][p] = q;
      }
    // identity must fix everything
    for (std::uint32_t p = 0; p < n_; ++p)
      if (act_[group_->index_of(group_->identity())][p] != p)
        throw std::domain_error("action: identity moves a point");
    // left action law, exhaustively
    for (std::uint64_t a = 0; a < ord; ++a)
      for (std::uint64_t b = 0; b < ord; ++b) {
        std::uint64_t ab = group_->index_of(
            group_->mul(group_->element_at(a), group_->element_at(b)));
        for (std::uint32_t p = 0; p < n_; ++p)
          if (act_[ab][p] != act_[a][act_[b][p]])
            throw std::domain_error("action: composition law fails");
      }
  }

  GroupPtr group_;
  std::size_t n_ = 0;
  std::vector<std::vector<std::uint32_t>> act_;
  std::vector<Configuration> configs_;
};

using ActionPtr = FiniteAction::Ptr;

// Subset of points, sorted.
using PointSet = std::vector<std::uint32_t>;

inline PointSet sorted_points(PointSet v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

inline bool point_in(const PointSet& s, std::uint32_t p) {
  return std::binary_search(s.begin(), s.end(), p);
}

inline PointSet set_image(const FiniteAction& a, const GroupSubset& S, const PointSet& v) {
  PointSet out;
  for (const auto& s : S.elems())
    for (auto p : v) out.push_back(a.apply(s, p));
  return sorted_points(std::move(out));
}

inline PointSet point_difference(const PointSet& a, const PointSet& b) {
  PointSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline PointSet point_union(const PointSet& a, const PointSet& b) {
  PointSet out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline PointSet point_intersection(const PointSet& a, const PointSet& b) {
  PointSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline PointSet all_points(const FiniteAction& a) {
  PointSet out(a.size());
  for (std::uint32_t i = 0; i < a.size(); ++i) out[i] = i;
  return out;
}

// Partial function from points to {0..k-1}; -1 marks undefined.
struct PointFunction {
  ActionPtr action;
  int k = 0;
  std::vector<int> values;
};

inline PointFunction make_point_function(ActionPtr action, int k,
                                         std::vector<int> values) {
  if (k < 1) throw std::domain_error("point function: empty alphabet");
  if (values.size() != action->size())
    throw std::domain_error("point function: wrong number of values");
  for (int v : values)
    if (v < -1 || v >= k) throw std::domain_error("point function: value out of range");
  return PointFunction{std::move(action), k, std::move(values)};
}

inline PointFunction empty_point_function(ActionPtr action, int k) {
  std::size_t n = action->size();
  return make_point_function(std::move(action), k, std::vector<int>(n, -1));
}

inline bool is_total(const PointFunction& f) {
  for (int v : f.values)
    if (v < 0) return false;
  return true;
}

inline PointSet domain_of(const PointFunction& f) {
  PointSet out;
  for (std::uint32_t p = 0; p < f.values.size(); ++p)
    if (f.values[p] >= 0) out.push_back(p);
  return out;
}

// pi_f(x)(g) = f(g.x); defined only for total f.
inline Configuration coding_map_at(const PointFunction& f, std::uint32_t p) {
  const auto& a = *f.action;
  const auto& g = a.group();
  std::vector<int> vals(g->order());
  for (std::uint64_t gi = 0; gi < g->order(); ++gi) {
    int v = f.values[a.apply_index(gi, p)];
    if (v < 0) throw std::domain_error("coding map: function not total on orbit");
    vals[gi] = v;
  }
  return make_configuration(g, f.k, std::move(vals));
}

// Equivariant map X -> k^G, one configuration per point.
struct EquivariantMap {
  ActionPtr action;
  std::vector<Configuration> images;
};

inline EquivariantMap coding_map(const PointFunction& f) {
  EquivariantMap m;
  m.action = f.action;
  m.images.reserve(f.action->size());
  for (std::uint32_t p = 0; p < f.action->size(); ++p)
    m.images.push_back(coding_map_at(f, p));
  return m;
}

inline bool is_equivariant(const EquivariantMap& m) {
  const auto& a = *m.action;
  const auto& g = a.group();
  if (m.images.size() != a.size()) return false;
  for (std::uint32_t p = 0; p < a.size(); ++p)
    for (std::uint64_t gi = 0; gi < g->order(); ++gi) {
      Configuration moved = shift(m.images[p], g->element_at(gi));
      if (moved.values != m.images[a.apply_index(gi, p)].values) return false;
    }
  return true;
}

// Inverse of coding_map: f(x) = pi(x)(identity). Errors on non-equivariant
// input, making the two directions mutually inverse.
inline PointFunction rule_of_map(const EquivariantMap& m) {
  if (!is_equivariant(m)) throw std::domain_error("rule_of_map: map is not equivariant");
  std::vector<int> values;
  values.reserve(m.images.size());
  int k = m.images.empty() ? 1 : m.images[0].k;
  std::uint64_t id = m.action->group()->index_of(m.action->group()->identity());
  for (const auto& c : m.images) values.push_back(c.values[id]);
  return make_point_function(m.action, k, std::move(values));
}

// Intersection of the stabilizers of all coding-map images; always verified to
// be closed (a subgroup).
inline GroupSubset map_stabilizer(const PointFunction& f) {
  const auto& a = *f.action;
  const auto& g = a.group();
  std::vector<char> keep(g->order(), 1);
  for (std::uint32_t p = 0; p < a.size(); ++p) {
    Configuration img = coding_map_at(f, p);
    for (std::uint64_t gi = 0; gi < g->order(); ++gi)
      if (keep[gi] && shift(img, g->element_at(gi)).values != img.values) keep[gi] = 0;
  }
  std::vector<Elem> st;
  for (std::uint64_t gi = 0; gi < g->order(); ++gi)
    if (keep[gi]) st.push_back(g->element_at(gi));
  GroupSubset result(g, std::move(st));
  if (!is_subgroup(result))
    throw std::logic_error("map_stabilizer: intersection failed subgroup audit");
  return result;
}

// f(x) = 0 if x vanishes somewhere on H, else 1. Needs the action to carry
// configurations.
inline PointFunction coset_indicator_rule(const ActionPtr& action, const GroupSubset& H,
                                          int k) {
  if (!action->has_configs())
    throw std::domain_error("coset indicator: action has no configuration payload");
  if (H.group().get() != action->group().get())
    throw std::domain_error("coset indicator: H lives in a different group");
  if (H.is_empty()) throw std::domain_error("coset indicator: H must be nonempty");
  if (k < 2) throw std::domain_error("coset indicator: needs at least two symbols");
  std::vector<int> values;
  values.reserve(action->size());
  for (const auto& c : action->configs()) {
    bool zero = false;
    for (const auto& h : H.elems())
      if (config_at(c, h) == 0) {
        zero = true;
        break;
      }
    values.push_back(zero ? 0 : 1);
  }
  return make_point_function(action, k, std::move(values));
}

}  // namespace shiftlab
