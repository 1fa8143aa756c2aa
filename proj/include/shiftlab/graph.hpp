#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "shiftlab/action.hpp"
#include "shiftlab/group.hpp"
#include "shiftlab/subset.hpp"

namespace shiftlab {

// Simple undirected graph on vertices 0..n-1. Adjacency lists are sorted;
// self-loops are rejected, parallel edges collapsed.
class FiniteGraph {
 public:
  using Ptr = std::shared_ptr<const FiniteGraph>;

  static Ptr create(std::uint32_t n,
                    const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges) {
    auto g = std::make_shared<FiniteGraph>(Private{});
    g->adj_.resize(n);
    for (const auto& [u, v] : edges) {
      if (u >= n || v >= n) throw std::domain_error("graph edge endpoint out of range");
      if (u == v) throw std::domain_error("graph edge is a self-loop");
      g->adj_[u].push_back(v);
      g->adj_[v].push_back(u);
    }
    g->max_degree_ = 0;
    g->num_edges_ = 0;
    for (auto& row : g->adj_) {
      std::sort(row.begin(), row.end());
      row.erase(std::unique(row.begin(), row.end()), row.end());
      g->max_degree_ = std::max<std::uint32_t>(g->max_degree_,
                                               static_cast<std::uint32_t>(row.size()));
      g->num_edges_ += row.size();
    }
    g->num_edges_ /= 2;
    return g;
  }

  std::uint32_t num_vertices() const { return static_cast<std::uint32_t>(adj_.size()); }
  std::size_t num_edges() const { return num_edges_; }
  const std::vector<std::uint32_t>& neighbors(std::uint32_t v) const { return adj_.at(v); }
  bool has_edge(std::uint32_t u, std::uint32_t v) const {
    const auto& row = adj_.at(u);
    return std::binary_search(row.begin(), row.end(), v);
  }
  std::uint32_t degree(std::uint32_t v) const {
    return static_cast<std::uint32_t>(adj_.at(v).size());
  }
  std::uint32_t max_degree() const { return max_degree_; }

  std::vector<std::pair<std::uint32_t, std::uint32_t>> edge_list() const {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    out.reserve(num_edges_);
    for (std::uint32_t u = 0; u < num_vertices(); ++u)
      for (auto v : adj_[u])
        if (u < v) out.emplace_back(u, v);
    return out;
  }

  struct Private {};
  explicit FiniteGraph(Private) {}

 private:
  std::vector<std::vector<std::uint32_t>> adj_;
  std::uint32_t max_degree_ = 0;
  std::size_t num_edges_ = 0;
};

using GraphPtr = FiniteGraph::Ptr;

inline bool is_independent(const GraphPtr& g, const PointSet& vertices) {
  for (auto v : vertices) {
    for (auto w : g->neighbors(v))
      if (point_in(vertices, w)) return false;
  }
  return true;
}

// Vertices x, y adjacent iff y = sigma.x for some sigma in F or its inverse,
// with x != y. Requires the action to be F-free: no nonidentity element of
// symmetrize(F) may fix a point.
inline GraphPtr schreier_graph(const ActionPtr& action, const GroupSubset& F) {
  if (F.group() != action->group())
    throw std::domain_error("schreier_graph: F lives in a different group");
  auto steps = symmetrize(F, false);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (const auto& sigma : steps.elems()) {
    if (action->group()->is_identity(sigma)) continue;
    for (std::uint32_t p = 0; p < action->size(); ++p) {
      auto q = action->apply(sigma, p);
      if (q == p)
        throw std::domain_error("schreier_graph: action is not F-free");
      edges.emplace_back(p, q);
    }
  }
  return FiniteGraph::create(action->size(), edges);
}

// Graph on an explicit element list: u ~ v iff v = sigma*u for sigma in
// symmetrize(F), u != v. Works over infinite groups since only the listed
// elements are touched.
inline GraphPtr graph_on_elements(const GroupPtr& g, const GroupSubset& vertices,
                                  const GroupSubset& F) {
  require_same_group(g, vertices.group(), "graph_on_elements");
  require_same_group(g, F.group(), "graph_on_elements");
  auto steps = symmetrize(F, false);
  const auto& verts = vertices.elems();
  auto index_of = [&](const Elem& e) -> std::int64_t {
    auto it = std::lower_bound(verts.begin(), verts.end(), e,
                               [&](const Elem& a, const Elem& b) { return g->less(a, b); });
    if (it == verts.end() || *it != e) return -1;
    return it - verts.begin();
  };
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::uint32_t u = 0; u < verts.size(); ++u) {
    for (const auto& sigma : steps.elems()) {
      if (g->is_identity(sigma)) continue;
      auto idx = index_of(g->mul(sigma, verts[u]));
      if (idx >= 0 && static_cast<std::uint32_t>(idx) != u)
        edges.emplace_back(u, static_cast<std::uint32_t>(idx));
    }
  }
  return FiniteGraph::create(static_cast<std::uint32_t>(verts.size()), edges);
}

// Coloring defined on part of the vertex set; -1 marks an uncolored vertex.
struct PartialColoring {
  GraphPtr graph;
  std::vector<int> colors;
};

inline PartialColoring empty_coloring(const GraphPtr& g) {
  return PartialColoring{g, std::vector<int>(g->num_vertices(), -1)};
}

inline bool coloring_proper(const PartialColoring& c) {
  for (std::uint32_t u = 0; u < c.graph->num_vertices(); ++u) {
    if (c.colors[u] < 0) continue;
    for (auto v : c.graph->neighbors(u))
      if (c.colors[v] == c.colors[u]) return false;
  }
  return true;
}

inline PartialColoring make_partial_coloring(const GraphPtr& g,
                                             const std::vector<int>& colors) {
  if (colors.size() != g->num_vertices())
    throw std::domain_error("partial coloring not aligned with vertex set");
  PartialColoring c{g, colors};
  if (!coloring_proper(c)) throw std::domain_error("partial coloring is not proper");
  return c;
}

inline bool coloring_total(const PartialColoring& c) {
  return std::none_of(c.colors.begin(), c.colors.end(), [](int v) { return v < 0; });
}

inline PointSet coloring_domain(const PartialColoring& c) {
  PointSet d;
  for (std::uint32_t v = 0; v < c.colors.size(); ++v)
    if (c.colors[v] >= 0) d.push_back(v);
  return d;
}

inline PointSet color_class(const PartialColoring& c, int i) {
  PointSet out;
  for (std::uint32_t v = 0; v < c.colors.size(); ++v)
    if (c.colors[v] == i) out.push_back(v);
  return out;
}

// Greedy maximal independent set containing the seed, scanning vertices in
// index order. The seed must itself be independent.
inline PointSet greedy_mis(const GraphPtr& g, const PointSet& seed) {
  if (!is_independent(g, seed)) throw std::domain_error("greedy_mis: seed not independent");
  std::vector<char> in(g->num_vertices(), 0);
  for (auto v : seed) in.at(v) = 1;
  for (std::uint32_t v = 0; v < g->num_vertices(); ++v) {
    if (in[v]) continue;
    bool blocked = false;
    for (auto w : g->neighbors(v))
      if (in[w]) {
        blocked = true;
        break;
      }
    if (!blocked) in[v] = 1;
  }
  PointSet out;
  for (std::uint32_t v = 0; v < g->num_vertices(); ++v)
    if (in[v]) out.push_back(v);
  return out;
}

// Greedy sequential coloring; classes are the color classes, at most
// max_degree+1 of them, disjointly covering the vertex set.
inline std::vector<PointSet> partition_independent(const GraphPtr& g) {
  std::vector<int> color(g->num_vertices(), -1);
  int classes = 0;
  for (std::uint32_t v = 0; v < g->num_vertices(); ++v) {
    std::vector<char> used(static_cast<std::size_t>(g->max_degree()) + 1, 0);
    for (auto w : g->neighbors(v))
      if (color[w] >= 0) used[static_cast<std::size_t>(color[w])] = 1;
    int c = 0;
    while (used[static_cast<std::size_t>(c)]) ++c;
    color[v] = c;
    classes = std::max(classes, c + 1);
  }
  std::vector<PointSet> out(static_cast<std::size_t>(classes));
  for (std::uint32_t v = 0; v < g->num_vertices(); ++v)
    out[static_cast<std::size_t>(color[v])].push_back(v);
  return out;
}

// Extends a proper partial coloring to a total proper coloring with ell
// colors, ell >= max_degree+1. Class i is the greedy maximal independent set,
// seeded with the vertices precolored i, in the graph with earlier classes
// and later-seeded vertices removed. The classes must cover every vertex.
inline PartialColoring extend_proper_coloring(const GraphPtr& g, const PartialColoring& start,
                                              int ell) {
  if (start.graph != g) throw std::domain_error("extend_proper_coloring: graph mismatch");
  if (ell <= static_cast<int>(g->max_degree()))
    throw std::domain_error("extend_proper_coloring: need more colors than max degree");
  if (!coloring_proper(start))
    throw std::domain_error("extend_proper_coloring: start coloring not proper");
  for (int c : start.colors)
    if (c >= ell) throw std::domain_error("extend_proper_coloring: start color out of range");

  std::vector<int> result(g->num_vertices(), -1);
  for (int i = 0; i < ell; ++i) {
    // eligible: unassigned and not seeded for a later class
    std::vector<char> in(g->num_vertices(), 0);
    auto eligible = [&](std::uint32_t v) {
      return result[v] < 0 && (start.colors[v] < 0 || start.colors[v] <= i);
    };
    for (std::uint32_t v = 0; v < g->num_vertices(); ++v)
      if (start.colors[v] == i) in[v] = 1;
    for (std::uint32_t v = 0; v < g->num_vertices(); ++v) {
      if (in[v] || !eligible(v)) continue;
      bool blocked = false;
      for (auto w : g->neighbors(v))
        if (in[w]) {
          blocked = true;
          break;
        }
      if (!blocked) in[v] = 1;
    }
    for (std::uint32_t v = 0; v < g->num_vertices(); ++v)
      if (in[v]) result[v] = i;
  }
  for (std::uint32_t v = 0; v < g->num_vertices(); ++v)
    if (result[v] < 0) throw std::logic_error("extend_proper_coloring: classes failed to cover");
  PartialColoring out{g, result};
  if (!coloring_proper(out))
    throw std::logic_error("extend_proper_coloring: result not proper");
  for (std::uint32_t v = 0; v < g->num_vertices(); ++v)
    if (start.colors[v] >= 0 && result[v] != start.colors[v])
      throw std::logic_error("extend_proper_coloring: extension disagrees with start");
  return out;
}

}  // namespace shiftlab
