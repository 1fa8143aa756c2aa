#include <algorithm>
#include <cstdint>
#include <exception>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <shiftlab/graph.hpp>
#include <shiftlab/rng.hpp>
#include <shiftlab/scenario.hpp>

#include "support/oracles.hpp"

// One check per acceptance criterion, each printing a single verdict line.
// Exits nonzero when any criterion fails.

using namespace shiftlab;

namespace {

int failures = 0;

void criterion(int n, const char* label, const std::function<void()>& body) {
  std::string detail;
  bool ok = true;
  try {
    body();
  } catch (const std::exception& e) {
    ok = false;
    detail = e.what();
  }
  std::cout << "criterion " << n << ": " << (ok ? "pass" : "FAIL") << " - " << label;
  if (!ok) std::cout << " (" << detail << ")";
  std::cout << "\n";
  if (!ok) ++failures;
}

void require(bool cond, const std::string& what) {
  if (!cond) throw std::runtime_error(what);
}

// Deterministic scrambled instance built from the counter generator; mirrors
// the fixture the unit suite uses.
Csp random_csp(std::uint64_t seed) {
  auto pick = [&](std::uint64_t step, std::uint64_t lane, std::uint64_t m) {
    return rng::uniform_below(seed, step, lane, m);
  };
  auto num_vars = static_cast<std::uint32_t>(3 + pick(0, 0, 4));
  int colors = static_cast<int>(2 + pick(0, 1, 3));
  auto num_constraints = 2 + pick(0, 2, 5);
  std::vector<CspConstraint> cs;
  for (std::uint64_t i = 0; i < num_constraints; ++i) {
    auto width = 1 + pick(1 + i, 0, std::min<std::uint64_t>(3, num_vars));
    std::vector<std::uint32_t> domain;
    for (std::uint64_t v = 0; v < num_vars && domain.size() < width; ++v)
      if (pick(1 + i, 10 + v, 2) == 0 || num_vars - v <= width - domain.size())
        domain.push_back(static_cast<std::uint32_t>(v));
    auto rows = pick(1 + i, 40, 4);
    std::vector<std::vector<int>> forbidden;
    for (std::uint64_t r = 0; r < rows; ++r) {
      std::vector<int> row;
      for (std::size_t j = 0; j < domain.size(); ++j)
        row.push_back(static_cast<int>(pick(1 + i, 50 + r * 8 + j, colors)));
      forbidden.push_back(std::move(row));
    }
    cs.push_back(make_constraint(num_vars, std::move(domain), std::move(forbidden)));
  }
  Csp uniform = make_csp(num_vars, colors, std::move(cs));
  for (std::uint32_t v = 0; v < num_vars; ++v) {
    std::vector<int> list;
    for (int c = 0; c < colors; ++c)
      if (pick(1000, v * 8 + c, 3) > 0) list.push_back(c);
    if (!list.empty()) uniform.lists[v] = list;
  }
  return uniform;
}

GraphPtr cycle_cayley(int n) {
  auto g = Group::cyclic(n);
  return schreier_graph(FiniteAction::translation(g),
                        GroupSubset(g, {Elem{1}, Elem{n - 1}}));
}

// Brute count through the library properness predicate.
std::uint64_t library_coloring_count(const GraphPtr& g, int colors) {
  std::vector<int> vals(g->num_vertices(), 0);
  std::uint64_t count = 0;
  for (;;) {
    if (coloring_proper(PartialColoring{g, vals})) ++count;
    std::size_t i = 0;
    while (i < vals.size() && ++vals[i] == colors) vals[i++] = 0;
    if (i == vals.size()) break;
  }
  return count;
}

std::vector<Elem> full_direction_list(const GroupPtr& g) {
  // gamma order: second canonical element first, trading places with the
  // first, then the canonical rest
  std::vector<Elem> out;
  for (std::uint64_t i = 0; i < g->order(); ++i)
    if (!g->is_identity(g->element_at(i))) out.push_back(g->element_at(i));
  if (out.size() >= 2) std::swap(out[0], out[1]);
  return out;
}

void check_free_image_group(const GroupPtr& g, const GroupSubset& T0) {
  ActionPtr action = FiniteAction::translation(g);
  const FiniteAction& a = *action;
  std::vector<Elem> gammas = full_direction_list(g);
  Schedule sched =
      schedule_prefix(ScheduleMode::plain, g, GroupSubset::empty(g), T0, gammas.size());
  auto out = free_image_coloring(action, 2, sched, gammas);

  require(is_total(out.f), "coloring is not total");
  for (std::uint32_t p = 0; p < a.size(); ++p) {
    std::vector<int> vals;
    for (std::uint64_t i = 0; i < g->order(); ++i)
      vals.push_back(out.f.values[a.apply(g->element_at(i), p)]);
    require(has_trivial_stabilizer(make_configuration(g, 2, vals)),
            "coding image of point " + std::to_string(p) + " is periodic");
  }

  // certificates replay against the final coloring and the colored prefix
  std::vector<char> mask(a.size(), 0);
  for (std::size_t n = 0; n < out.stages.size(); ++n) {
    for (auto p : out.stages[n].block) mask[p] = 1;
    for (std::uint32_t x = 0; x < a.size(); ++x) {
      const Elem& sigma = out.stages[n].sigma[x];
      std::uint32_t p = a.apply(sigma, x);
      std::uint32_t q = a.apply(g->mul(sigma, out.stages[n].gamma), x);
      require(out.stages[n].S.contains(sigma) && mask[p] && mask[q] &&
                  out.f.values[p] != out.f.values[q],
              "stage " + std::to_string(n) + " certificate fails at point " +
                  std::to_string(x));
    }
  }
}

}  // namespace

int main() {
  criterion(1, "coloring oracle and seeded extension corpus", [] {
    require(library_coloring_count(cycle_cayley(5), 3) == 30, "Z5 count is not 30");
    require(oracle::count_proper_colorings(oracle::cycle_graph(5), 3) == 30 &&
                oracle::cycle_chromatic(5, 3) == 30,
            "independent Z5 oracle disagrees");
    require(library_coloring_count(cycle_cayley(6), 3) == 66, "Z6 count is not 66");
    require(oracle::count_proper_colorings(oracle::cycle_graph(6), 3) == 66 &&
                oracle::cycle_chromatic(6, 3) == 66,
            "independent Z6 oracle disagrees");
    for (int n = 4; n <= 9; ++n)
      require(library_coloring_count(cycle_cayley(n), 3) ==
                  static_cast<std::uint64_t>(oracle::cycle_chromatic(n, 3)),
              "chromatic polynomial cross-check fails");

    for (std::uint64_t s = 0; s < 50; ++s) {
      auto n = static_cast<std::uint32_t>(6 + rng::uniform_below(s, 0, 0, 9));
      std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
      for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = i + 1; j < n; ++j)
          if (rng::uniform_below(s, 1, i * 32 + j, 4) == 0) edges.push_back({i, j});
      auto graph = FiniteGraph::create(n, edges);
      int ell = static_cast<int>(graph->max_degree()) + 1;

      std::vector<int> seed_colors(n, -1);
      for (std::uint32_t v = 0; v < n; ++v) {
        if (rng::uniform_below(s, 2, v, 3) != 0) continue;
        std::vector<char> used(ell, 0);
        for (auto w : graph->neighbors(v))
          if (seed_colors[w] >= 0) used[seed_colors[w]] = 1;
        int c = 0;
        while (used[c]) ++c;
        seed_colors[v] = c;
      }
      PartialColoring seeded{graph, seed_colors};
      auto ext = extend_proper_coloring(graph, seeded, ell);
      require(coloring_proper(ext), "extension is not proper");
      for (std::uint32_t v = 0; v < n; ++v) {
        require(ext.colors[v] >= 0 && ext.colors[v] < ell, "extension is not total");
        if (seed_colors[v] >= 0)
          require(ext.colors[v] == seed_colors[v], "extension does not extend the seed");
      }
    }
  });

  criterion(2, "free part sizes and stabilizer brute force", [] {
    require(free_part(Group::cyclic(3), 2).size() == 6, "|Free(2^Z3)| is not 6");
    require(free_part(Group::cyclic(4), 2).size() == 12, "|Free(2^Z4)| is not 12");
    for (int n = 1; n <= 8; ++n) {
      auto g = Group::cyclic(n);
      std::vector<int> vals(n, 0);
      for (;;) {
        Configuration x = make_configuration(g, 2, vals);
        std::vector<Elem> naive;
        for (std::uint64_t i = 0; i < g->order(); ++i) {
          Elem e = g->element_at(i);
          if (shift(x, e).values == x.values) naive.push_back(e);
        }
        require(stabilizer(x).elems() == naive, "stabilizer disagrees with brute force");
        require(has_trivial_stabilizer(x) == (naive.size() == 1),
                "triviality flag disagrees");
        std::size_t i = 0;
        while (i < vals.size() && ++vals[i] == 2) vals[i++] = 0;
        if (i == vals.size()) break;
      }
    }
  });

  criterion(3, "local-lemma parameters and verdicts on 200 instances", [] {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      auto csp = random_csp(seed);
      auto lib = compute_params(csp);
      auto naive = oracle::naive_params(csp);
      require(lib.p == naive.p && lib.d == naive.d && lib.vdeg == naive.vdeg &&
                  lib.ord == naive.ord,
              "parameters diverge at seed " + std::to_string(seed));

      Rat x = naive.p * Rat(Int(naive.d) + 1);
      LllVerdict direct = euler_upper() * x <= 1
                              ? LllVerdict::pass
                              : (euler_lower() * x > 1 ? LllVerdict::fail
                                                       : LllVerdict::undecidable);
      require(check_symmetric_lll(csp).verdict == direct, "symmetric verdict diverges");

      Rat y = naive.p;
      for (std::uint64_t i = 0; i < naive.ord; ++i) y *= Rat(Int(naive.vdeg));
      require(check_continuous_lll(csp).verdict ==
                  (y < 1 ? LllVerdict::pass : LllVerdict::fail),
              "continuous verdict diverges");
    }
  });

  criterion(4, "solver soundness and effectiveness", [] {
    int found = 0;
    for (std::uint64_t seed = 0; found < 100; ++seed) {
      require(seed < 100000, "not enough eligible instances");
      auto csp = random_csp(seed);
      if (check_symmetric_lll(csp).verdict != LllVerdict::pass) continue;
      ++found;
      auto mt = moser_tardos(csp, seed + 1, 1000000);
      require(mt.status == SolveStatus::solved, "eligible instance left unsolved");
      require(csp_satisfied(csp, mt.assignment), "solved output fails the violation scan");
    }
    for (std::uint64_t seed = 500; seed < 700; ++seed) {
      auto csp = random_csp(seed);
      auto exact = brute_force(csp);
      auto mt = moser_tardos(csp, seed, 20000);
      if (mt.status == SolveStatus::solved) {
        require(csp_satisfied(csp, mt.assignment), "solved output fails the scan");
        require(exact.has_value(), "solver solved an unsatisfiable instance");
      }
      if (!exact.has_value())
        require(mt.status == SolveStatus::budget_exhausted,
                "verdicts contradict brute force");
    }
  });

  criterion(5, "list reduction preserves probabilities and solution counts", [] {
    for (std::uint64_t seed = 2000; seed < 2050; ++seed) {
      auto csp = random_csp(seed);
      auto red = list_reduction(csp);
      for (std::size_t i = 0; i < csp.constraints.size(); ++i)
        require(constraint_probability(csp.constraints[i], csp) ==
                    constraint_probability(red.reduced.constraints[i], red.reduced),
                "probability changed under reduction");
      std::uint64_t multiplicity = 1;
      for (std::uint32_t v = 0; v < csp.num_vars; ++v)
        multiplicity *= red.n / csp.lists[v].size();
      require(count_satisfying(red.reduced) == count_satisfying(csp) * multiplicity,
              "solution multiplicity is off");
      auto rsol = brute_force(red.reduced);
      if (rsol) {
        auto decoded = red.decode(*rsol);
        require(csp_satisfied(csp, decoded), "decoded solution violates a constraint");
        for (std::uint32_t v = 0; v < csp.num_vars; ++v)
          require(value_in_list(csp.lists[v], decoded[v]), "decoded value leaves its list");
      }
    }
  });

  criterion(6, "coset indicator stabilizers across groups and alphabets", [] {
    struct Case {
      GroupPtr g;
      std::vector<Elem> h;
    };
    auto z2z2 = [] { return Group::product({Group::cyclic(2), Group::cyclic(2)}); };
    std::vector<Case> cases;
    cases.push_back({Group::cyclic(6), {{0}, {3}}});
    cases.push_back({Group::cyclic(4), {{0}, {2}}});
    cases.push_back({z2z2(), {{0}, {1}}});
    cases.push_back({z2z2(), {{0}, {2}}});
    cases.push_back({z2z2(), {{0}, {3}}});
    for (const auto& c : cases)
      for (int k = 2; k <= 3; ++k) {
        auto rep = verify_coset_stabilizer(c.g, GroupSubset(c.g, c.h), k);
        require(rep.image_in_sft, "coding image leaves the coset pattern set");
        require(rep.stab_matches, "map stabilizer differs from the subgroup");
      }
  });

  criterion(7, "trivial-stabilizer coloring on Z7 and Z9", [] {
    for (int n : {7, 9}) {
      auto g = Group::cyclic(n);
      GroupSubset F(g, {Elem{1}, Elem{n - 1}});
      auto rep = trivial_stab_coloring(g, F, 3);
      const FiniteAction& a = *rep.action;
      for (std::uint32_t x = 0; x < a.size(); ++x)
        for (const Elem& delta : F.elems())
          require(rep.f.values[x] != rep.f.values[a.apply(delta, x)],
                  "coloring is not proper");
      require(rep.stab == GroupSubset::identity_of(g), "map stabilizer is not trivial");
      // exhaustive: every nonidentity translation moves the coloring somewhere
      for (std::uint64_t i = 1; i < g->order(); ++i) {
        Elem sigma = g->element_at(i);
        bool moved = false;
        for (std::uint32_t x = 0; x < a.size() && !moved; ++x)
          moved = rep.f.values[a.apply(sigma, x)] != rep.f.values[x];
        require(moved, "a nonidentity translation fixes the coloring");
      }
    }
  });

  criterion(8, "distinguishing pipeline on three groups", [] {
    auto run_case = [](const GroupPtr& g, const Elem& gamma, std::uint64_t seed) {
      ActionPtr action = FiniteAction::translation(g);
      GroupSubset F(g, {Elem{1}, g->inv(Elem{1})});
      GroupSubset one = GroupSubset::identity_of(g);
      auto data =
          distinguish_sets(g, F, 3, evaluation_rule(g, 3), one, one, gamma, 2, 6, 1);
      auto dc = distinguish_csp(action, data, {}, all_points(*action), {},
                                empty_point_function(action, 3));
      auto solved = moser_tardos(dc.csp, seed, 50000);
      require(solved.status == SolveStatus::solved, "solver missed its budget");
      auto colored = distinguish_coloring(dc, solved.assignment);
      auto scan = distinguish_rescan(action, data, colored);
      require(scan.ok, "a point has no distinguishing translate");
      return dc;
    };

    auto z24 = run_case(Group::cyclic(24), Elem{1}, 5);
    require(z24.Z == PointSet{0, 9} && z24.csp.constraints.size() == 42,
            "Z24 net or constraint set is off");
    require(count_satisfying(z24.csp) == 441, "Z24 solution count is off");

    auto d12 = run_case(Group::dihedral(6), Elem{6}, 17);
    require(d12.Z == PointSet{0, 6} && d12.csp.constraints.size() == 12,
            "D12 net or constraint set is off");
    require(d12.params.ord == 2, "D12 constraints should couple two blocks");

    auto layers = run_case(Group::product({Group::cyclic(2), Group::cyclic(16)}),
                           Elem{16}, 3);
    require(layers.Z == PointSet{0, 16} && layers.csp.constraints.size() == 32,
            "layer net or constraint set is off");
    require(count_satisfying(layers.csp) == 462, "layer solution count is off");
    for (const auto& c : layers.csp.constraints)
      require(c.forbidden.size() == 22, "layer constraints should ban the 22 copy pairs");
  });

  criterion(9, "decay-bound reports and thresholds", [] {
    auto rep = bound_report(2, 1, 1, 1285);
    require(rep.a == 256 && rep.c == Rat(1, 8) && rep.base == Rat(1, 2),
            "closed-form constants are off");
    struct Row {
      std::uint64_t ell, d, r, want;
    };
    for (const Row& row : std::vector<Row>{{2, 1, 1, 1285},
                                           {3, 1, 1, 2365},
                                           {2, 2, 1, 39771},
                                           {2, 1, 2, 3076}}) {
      auto r = bound_report(row.ell, row.d, row.r, row.want);
      require(r.threshold == row.want, "threshold moved");
      require(r.product_below_one, "product is not below one at the threshold");
      require(!bound_product_below_one(row.ell, row.d, row.r, row.want - 1),
              "threshold is not least");
    }
  });

  criterion(10, "free-image colorings with trivial stabilizers", [] {
    for (int n = 5; n <= 16; ++n) {
      auto g = Group::cyclic(n);
      GroupSubset T0 = n % 4 == 2 ? GroupSubset(g, {Elem{0}, Elem{n / 2}})
                                  : GroupSubset::identity_of(g);
      check_free_image_group(g, T0);
    }
    auto g = Group::product({Group::cyclic(2), Group::cyclic(4)});
    check_free_image_group(g, GroupSubset::identity_of(g));
  });

  criterion(11, "seeded scenario reports are byte-identical", [] {
    Json gam = Json::array();
    for (int v : {2, 1, 3, 4, 5, 6, 7}) gam.push_back(Json::array({v}));
    Json s;
    s["mode"] = "free_image";
    s["group"] = Json{{"kind", "cyclic"}, {"n", 8}};
    s["params"] = Json{{"k", 2},
                       {"schedule_mode", "lemma43"},
                       {"t0", Json::array({Json::array({0})})},
                       {"gammas", gam}};
    s["seed"] = 7;
    auto a = run_scenario(s);
    auto b = run_scenario(s);
    require(a.ok && b.ok, "scenario run failed");
    require(a.report.dump(2) == b.report.dump(2), "reports differ between runs");

    Json l;
    l["mode"] = "lemma41";
    l["group"] = Json{{"kind", "cyclic"}, {"n", 24}};
    l["params"] = Json{{"f", Json::array({Json::array({1}), Json::array({23})})},
                       {"ell", 3},
                       {"gamma", Json::array({1})},
                       {"e_s", 6}};
    l["seed"] = 5;
    auto c = run_scenario(l);
    auto d = run_scenario(l);
    require(c.ok && d.ok, "seeded solver scenario failed");
    require(c.report.dump(2) == d.report.dump(2), "solver reports differ between runs");
  });

  std::cout << (11 - failures) << "/11 criteria pass\n";
  return failures == 0 ? 0 : 1;
}
