#include <catch2/catch_amalgamated.hpp>

#include "shiftlab/csp.hpp"
#include "shiftlab/moser_tardos.hpp"
#include "shiftlab/rng.hpp"

#include "support/oracles.hpp"

using namespace shiftlab;

namespace {

// One inequality constraint per cycle edge: the two endpoints may not agree.
Csp cycle_coloring_csp(std::uint32_t n, int colors) {
  std::vector<CspConstraint> cs;
  for (std::uint32_t i = 0; i < n; ++i) {
    std::vector<std::vector<int>> equal;
    for (int c = 0; c < colors; ++c) equal.push_back({c, c});
    cs.push_back(make_constraint(n, {i, (i + 1) % n}, equal));
  }
  return make_csp(n, colors, std::move(cs));
}

// Deterministic scrambled instance built from the counter generator.
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
  // thin some lists out, keeping them nonempty
  for (std::uint32_t v = 0; v < num_vars; ++v) {
    std::vector<int> list;
    for (int c = 0; c < colors; ++c)
      if (pick(1000, v * 8 + c, 3) > 0) list.push_back(c);
    if (!list.empty()) uniform.lists[v] = list;
  }
  return uniform;
}

}  // namespace

TEST_CASE("constraint probabilities follow the product rule") {
  auto two = make_csp(2, 2, {make_constraint(2, {0, 1}, {{0, 1}})});
  CHECK(constraint_probability(two.constraints[0], two) == Rat(1, 4));

  auto all = make_csp(2, 2, {make_constraint(2, {0, 1}, {{0, 0}, {0, 1}, {1, 0}, {1, 1}})});
  CHECK(constraint_probability(all.constraints[0], all) == Rat(1));

  auto lists = make_list_csp(3, {{0, 1}, {0, 1, 2}}, {make_constraint(2, {0, 1}, {{1, 2}})});
  CHECK(constraint_probability(lists.constraints[0], lists) == Rat(1, 6));

  // rows outside the lists can never fire
  auto dead = make_list_csp(3, {{0, 1}, {0, 1, 2}}, {make_constraint(2, {0, 1}, {{2, 0}})});
  CHECK(constraint_probability(dead.constraints[0], dead) == Rat(0));
}

TEST_CASE("constraint validation rejects malformed inputs") {
  CHECK_THROWS_AS(make_constraint(3, {}, {}), std::domain_error);
  CHECK_THROWS_AS(make_constraint(3, {0, 0}, {{1, 1}}), std::domain_error);
  CHECK_THROWS_AS(make_constraint(3, {0, 5}, {{1, 1}}), std::domain_error);
  CHECK_THROWS_AS(make_constraint(3, {0, 1}, {{1}}), std::domain_error);
  CHECK_THROWS_AS(make_list_csp(2, {{0}, {}}, {}), std::domain_error);
}

TEST_CASE("parameters match their definitional recomputation") {
  auto single = make_csp(4, 2, {make_constraint(4, {0, 2, 3}, {{0, 0, 0}})});
  auto ps = compute_params(single);
  CHECK(ps.d == 0);
  CHECK(ps.vdeg == 1);
  CHECK(ps.ord == 3);
  CHECK(ps.p == Rat(1, 8));

  auto sharing = make_csp(
      3, 2, {make_constraint(3, {0, 1}, {{0, 0}}), make_constraint(3, {1, 2}, {{0, 0}})});
  CHECK(compute_params(sharing).d == 1);

  auto cyc = cycle_coloring_csp(5, 3);
  auto pc = compute_params(cyc);
  CHECK(pc.p == Rat(1, 3));
  CHECK(pc.d == 2);
  CHECK(pc.vdeg == 2);
  CHECK(pc.ord == 2);

  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    auto csp = random_csp(seed);
    auto mine = compute_params(csp);
    auto theirs = oracle::naive_params(csp);
    CHECK(mine.p == theirs.p);
    CHECK(mine.d == theirs.d);
    CHECK(mine.vdeg == theirs.vdeg);
    CHECK(mine.ord == theirs.ord);
  }
}

TEST_CASE("symmetric condition is decided through the rational interval") {
  auto pass = symmetric_lll_from(Rat(1, 4), 0);
  CHECK(pass.verdict == LllVerdict::pass);
  CHECK(pass.margin > 0);

  auto fail = symmetric_lll_from(Rat(1), 3);
  CHECK(fail.verdict == LllVerdict::fail);
  CHECK(fail.margin < 0);

  // e * 3/8 just exceeds 1
  auto close = symmetric_lll_from(Rat(1, 8), 2);
  CHECK(close.verdict == LllVerdict::fail);

  // product pinned inside the enclosure gap: 2e10 / 54365636569
  auto gap = symmetric_lll_from(Rat(Int("20000000000"), Int("54365636569")), 0);
  CHECK(gap.verdict == LllVerdict::undecidable);

  auto cyc = cycle_coloring_csp(5, 3);
  // p=1/3, d=2: e * 1 > 1
  CHECK(check_symmetric_lll(cyc).verdict == LllVerdict::fail);
  auto many = cycle_coloring_csp(5, 12);
  // p=1/12, d=2: e/4 < 1
  CHECK(check_symmetric_lll(many).verdict == LllVerdict::pass);
}

TEST_CASE("continuous condition is exact and strict") {
  CHECK(continuous_lll_from(Rat(1, 4), 1, 2).verdict == LllVerdict::pass);
  auto boundary = continuous_lll_from(Rat(1, 4), 2, 2);
  CHECK(boundary.verdict == LllVerdict::fail);
  CHECK(boundary.margin == Rat(0));

  auto cyc = cycle_coloring_csp(5, 5);
  // p=1/5, vdeg=2, ord=2: 4/5 < 1
  auto check = check_continuous_lll(cyc);
  CHECK(check.verdict == LllVerdict::pass);
  CHECK(check.margin == Rat(1, 5));
}

TEST_CASE("brute force scans lexicographically and proves unsatisfiability") {
  auto blocked = make_csp(1, 2, {make_constraint(1, {0}, {{0}, {1}})});
  CHECK_FALSE(brute_force(blocked).has_value());

  CHECK_FALSE(brute_force(cycle_coloring_csp(5, 2)).has_value());

  auto sol = brute_force(cycle_coloring_csp(5, 3));
  REQUIRE(sol.has_value());
  CHECK(*sol == std::vector<int>{0, 1, 0, 1, 2});
  CHECK(csp_satisfied(cycle_coloring_csp(5, 3), *sol));

  CHECK(count_satisfying(cycle_coloring_csp(5, 3)) == 30);
  CHECK(count_satisfying(cycle_coloring_csp(6, 2)) == 2);

  Caps tiny;
  tiny.brute_force_space = 100;
  CHECK_THROWS_AS(brute_force(cycle_coloring_csp(20, 3), tiny), CapExceeded);
}

TEST_CASE("solver resamples until no constraint is violated") {
  auto free_csp = make_csp(3, 2, {});
  auto r = moser_tardos(free_csp, 7, 100);
  CHECK(r.status == SolveStatus::solved);
  CHECK(r.resamples == 0);

  auto cyc = cycle_coloring_csp(5, 3);
  auto s = moser_tardos(cyc, 42, 100000);
  REQUIRE(s.status == SolveStatus::solved);
  CHECK(csp_satisfied(cyc, s.assignment));

  auto again = moser_tardos(cyc, 42, 100000);
  CHECK(again.assignment == s.assignment);
  CHECK(again.resamples == s.resamples);

  auto unsat = cycle_coloring_csp(5, 2);
  auto exhausted = moser_tardos(unsat, 3, 500);
  CHECK(exhausted.status == SolveStatus::budget_exhausted);
  CHECK(exhausted.resamples == 500);

  auto lists = make_list_csp(4, {{0, 1}, {1, 2}, {2, 3}},
                             {make_constraint(3, {0, 1}, {{1, 1}}),
                              make_constraint(3, {1, 2}, {{2, 2}})});
  auto ls = moser_tardos(lists, 11, 100000);
  REQUIRE(ls.status == SolveStatus::solved);
  for (std::uint32_t v = 0; v < 3; ++v) CHECK(value_in_list(lists.lists[v], ls.assignment[v]));
}

TEST_CASE("list reduction uniformizes colors and preserves probabilities") {
  auto csp = make_list_csp(3, {{0, 1}, {0, 1, 2}, {2}},
                           {make_constraint(3, {0, 1}, {{0, 0}, {1, 1}}),
                            make_constraint(3, {1, 2}, {{2, 2}})});
  auto red = list_reduction(csp);
  CHECK(red.n == 6);
  CHECK(red.decode_table[0] == std::vector<int>{0, 0, 0, 1, 1, 1});
  CHECK(red.decode_table[1] == std::vector<int>{0, 0, 1, 1, 2, 2});
  CHECK(red.decode_table[2] == std::vector<int>{2, 2, 2, 2, 2, 2});

  for (std::size_t i = 0; i < csp.constraints.size(); ++i)
    CHECK(constraint_probability(csp.constraints[i], csp) ==
          constraint_probability(red.reduced.constraints[i], red.reduced));

  // each original solution corresponds to exactly prod(n/|C_x|) reduced ones
  std::uint64_t multiplicity = 3 * 2 * 6;
  CHECK(count_satisfying(csp) == 2);
  CHECK(count_satisfying(red.reduced) == 2 * multiplicity);

  auto rsol = brute_force(red.reduced);
  REQUIRE(rsol.has_value());
  auto decoded = red.decode(*rsol);
  CHECK(csp_satisfied(csp, decoded));
  for (std::uint32_t v = 0; v < csp.num_vars; ++v)
    CHECK(value_in_list(csp.lists[v], decoded[v]));

  // already-uniform lists: n colors, probabilities unchanged
  auto uni = make_csp(2, 2, {make_constraint(2, {0, 1}, {{0, 1}})});
  auto ured = list_reduction(uni);
  CHECK(ured.n == 2);
  CHECK(constraint_probability(ured.reduced.constraints[0], ured.reduced) == Rat(1, 4));

  Caps tight;
  tight.reduced_colors = 4;
  CHECK_THROWS_AS(list_reduction(csp, tight), CapExceeded);
}

TEST_CASE("random instances respect the solver and oracle cross-checks") {
  int solved_both = 0;
  for (std::uint64_t seed = 100; seed < 140; ++seed) {
    auto csp = random_csp(seed);
    auto exact = brute_force(csp);
    auto mt = moser_tardos(csp, seed, 20000);
    if (mt.status == SolveStatus::solved) {
      CHECK(csp_satisfied(csp, mt.assignment));
      CHECK(exact.has_value());
      ++solved_both;
    }
    if (!exact.has_value()) CHECK(mt.status == SolveStatus::budget_exhausted);
  }
  CHECK(solved_both > 0);
}
