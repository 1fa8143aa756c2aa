#pragma once

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <initializer_list>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "shiftlab/action.hpp"
#include "shiftlab/bounds.hpp"
#include "shiftlab/caps.hpp"
#include "shiftlab/config.hpp"
#include "shiftlab/distinguish.hpp"
#include "shiftlab/group.hpp"
#include "shiftlab/moser_tardos.hpp"
#include "shiftlab/pipelines.hpp"
#include "shiftlab/schedule.hpp"
#include "shiftlab/subset.hpp"

// JSON scenario front end. A scenario file names a mode, a group, and the
// mode's parameters; running it produces a report whose audit rows each carry
// {name, status, witness}. Schema problems throw ScenarioError and never
// yield a report; runtime failures inside a mode become a failing audit row
// so the report is still written.

namespace shiftlab {

using Json = nlohmann::json;

// The file cannot be run at all: missing or ill-typed fields, unknown mode,
// unparseable element encodings. Distinct from audit failures.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(const std::string& where, const std::string& what)
      : std::runtime_error(where + ": " + what) {}
};

struct AuditRow {
  std::string name;
  bool pass = false;
  std::string witness;
};

struct ScenarioRun {
  Json report;
  bool ok = false;  // every audit row passed
};

namespace scenario_detail {

inline const Json& require_field(const Json& obj, const std::string& path, const char* key) {
  if (!obj.is_object())
    throw ScenarioError(path, std::string("expected an object, got ") + obj.type_name());
  auto it = obj.find(key);
  if (it == obj.end()) throw ScenarioError(path + "." + key, "missing required field");
  return *it;
}

inline void check_keys(const Json& obj, const std::string& path,
                       std::initializer_list<const char*> allowed) {
  if (!obj.is_object())
    throw ScenarioError(path, std::string("expected an object, got ") + obj.type_name());
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : allowed) known = known || item.key() == k;
    if (!known) throw ScenarioError(path + "." + item.key(), "unknown field");
  }
}

inline std::int64_t as_int(const Json& v, const std::string& path) {
  if (!v.is_number_integer())
    throw ScenarioError(path, std::string("expected an integer, got ") + v.type_name());
  return v.get<std::int64_t>();
}

inline std::uint64_t as_uint(const Json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  std::int64_t n = as_int(v, path);
  if (n < 0) throw ScenarioError(path, "expected a nonnegative integer");
  return static_cast<std::uint64_t>(n);
}

inline std::string as_string(const Json& v, const std::string& path) {
  if (!v.is_string())
    throw ScenarioError(path, std::string("expected a string, got ") + v.type_name());
  return v.get<std::string>();
}

inline Elem elem_from_json(const Json& v, const std::string& path) {
  if (!v.is_array())
    throw ScenarioError(path, "expected a group element as an array of integers");
  Elem e;
  e.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    e.push_back(as_int(v[i], path + "[" + std::to_string(i) + "]"));
  return e;
}

inline std::vector<Elem> elems_from_json(const Json& v, const std::string& path) {
  if (!v.is_array()) throw ScenarioError(path, "expected an array of group elements");
  std::vector<Elem> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(elem_from_json(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline GroupSubset subset_from_json(const GroupPtr& g, const Json& v, const std::string& path) {
  auto elems = elems_from_json(v, path);
  try {
    return GroupSubset(g, std::move(elems));
  } catch (const std::exception& e) {
    throw ScenarioError(path, e.what());
  }
}

inline GroupPtr group_from_json(const Json& v, const std::string& path) {
  std::string kind = as_string(require_field(v, path, "kind"), path + ".kind");
  try {
    if (kind == "cyclic") {
      check_keys(v, path, {"kind", "n"});
      return Group::cyclic(as_int(require_field(v, path, "n"), path + ".n"));
    }
    if (kind == "dihedral") {
      check_keys(v, path, {"kind", "n"});
      return Group::dihedral(as_int(require_field(v, path, "n"), path + ".n"));
    }
    if (kind == "lattice") {
      check_keys(v, path, {"kind", "dim"});
      return Group::lattice(static_cast<int>(as_int(require_field(v, path, "dim"), path + ".dim")));
    }
    if (kind == "product") {
      check_keys(v, path, {"kind", "factors"});
      const Json& f = require_field(v, path, "factors");
      if (!f.is_array() || f.empty())
        throw ScenarioError(path + ".factors", "expected a nonempty array of group descriptors");
      std::vector<GroupPtr> factors;
      for (std::size_t i = 0; i < f.size(); ++i)
        factors.push_back(group_from_json(f[i], path + ".factors[" + std::to_string(i) + "]"));
      return Group::product(std::move(factors));
    }
  } catch (const ScenarioError&) {
    throw;
  } catch (const std::exception& e) {
    throw ScenarioError(path, e.what());
  }
  throw ScenarioError(path + ".kind", "unknown group kind '" + kind + "'");
}

inline Json elem_to_json(const Elem& e) {
  Json a = Json::array();
  for (std::int64_t v : e) a.push_back(v);
  return a;
}

inline Json subset_to_json(const GroupSubset& s) {
  Json a = Json::array();
  for (const Elem& e : s.elems()) a.push_back(elem_to_json(e));
  return a;
}

inline Json audit_rows_to_json(const std::vector<AuditRow>& rows) {
  Json arr = Json::array();
  for (const auto& r : rows)
    arr.push_back(Json{{"name", r.name},
                       {"status", r.pass ? "pass" : "fail"},
                       {"witness", r.witness}});
  return arr;
}

inline ScheduleMode schedule_mode_from(const Json& v, const std::string& path) {
  std::string s = as_string(v, path);
  if (s == "lemma17") return ScheduleMode::core;
  if (s == "lemma43") return ScheduleMode::plain;
  throw ScenarioError(path, "unknown schedule mode '" + s + "' (expected lemma17 or lemma43)");
}

struct ModeOutput {
  std::vector<AuditRow> audits;
  Json payload = Json::object();
  Json work = Json::object();
};

inline ModeOutput run_verify_prop15(const GroupPtr& g, const Json& params, const Caps& caps) {
  check_keys(params, "scenario.params", {"h", "k"});
  GroupSubset H =
      subset_from_json(g, require_field(params, "scenario.params", "h"), "scenario.params.h");
  int k = static_cast<int>(as_int(require_field(params, "scenario.params", "k"),
                                  "scenario.params.k"));
  auto rep = verify_coset_stabilizer(g, H, k, caps);

  ModeOutput out;
  std::string n_images = std::to_string(rep.action->size());
  out.audits.push_back({"image_in_coset_sft", rep.image_in_sft,
                        rep.image_in_sft
                            ? "all " + n_images + " coding images stay inside the pattern set"
                            : "some coding image leaves the pattern set"});
  out.audits.push_back({"stabilizer_matches", rep.stab_matches,
                        "map stabilizer " + subset_to_json(rep.stab).dump() +
                            (rep.stab_matches ? " equals h" : " differs from h")});
  out.payload["free_points"] = rep.action->size();
  out.payload["stabilizer"] = subset_to_json(rep.stab);
  out.payload["sft_patterns"] = rep.coset_sft.allowed.size();
  out.payload["symbols"] = k;
  out.work["coding_images"] = rep.action->size();
  return out;
}

inline ModeOutput run_trivial_stab(const GroupPtr& g, const Json& params, const Caps& caps) {
  check_keys(params, "scenario.params", {"f", "ell"});
  GroupSubset F =
      subset_from_json(g, require_field(params, "scenario.params", "f"), "scenario.params.f");
  int ell = static_cast<int>(as_int(require_field(params, "scenario.params", "ell"),
                                    "scenario.params.ell"));
  auto rep = trivial_stab_coloring(g, F, ell, caps);
  const FiniteAction& a = *rep.action;

  bool proper = true;
  std::string collision;
  for (std::uint32_t x = 0; x < a.size() && proper; ++x)
    for (const Elem& delta : F.elems())
      if (rep.f.values[x] == rep.f.values[a.apply(delta, x)]) {
        proper = false;
        collision = "point " + std::to_string(x) + " collides along " +
                    elem_to_json(delta).dump();
        break;
      }

  bool trivial = rep.stab == GroupSubset::identity_of(g);

  ModeOutput out;
  out.audits.push_back({"coloring_proper", proper,
                        proper ? "no translate collision across " + std::to_string(a.size()) +
                                     " points"
                               : collision});
  out.audits.push_back({"marker_sets_nonempty", !rep.J0.empty() && !rep.J1.empty(),
                        "|J0| = " + std::to_string(rep.J0.size()) +
                            ", |J1| = " + std::to_string(rep.J1.size())});
  out.audits.push_back({"stabilizer_trivial", trivial,
                        "map stabilizer " + subset_to_json(rep.stab).dump()});
  out.payload["points"] = a.size();
  out.payload["j0"] = rep.J0.size();
  out.payload["j1"] = rep.J1.size();
  out.payload["colors"] = ell;
  if (a.size() <= 4096) out.payload["coloring"] = rep.f.values;
  out.work["points"] = a.size();
  return out;
}

inline ModeOutput run_lemma41(const GroupPtr& g, const Json& params, std::uint64_t seed,
                              const Caps& caps) {
  check_keys(params, "scenario.params",
             {"f", "ell", "r", "m", "gamma", "e_d", "e_s", "e_b", "budget"});
  GroupSubset F =
      subset_from_json(g, require_field(params, "scenario.params", "f"), "scenario.params.f");
  int ell = static_cast<int>(as_int(require_field(params, "scenario.params", "ell"),
                                    "scenario.params.ell"));
  GroupSubset one = GroupSubset::identity_of(g);
  GroupSubset R = params.contains("r") ? subset_from_json(g, params["r"], "scenario.params.r")
                                       : one;
  GroupSubset M = params.contains("m") ? subset_from_json(g, params["m"], "scenario.params.m")
                                       : one;
  Elem gamma = elem_from_json(require_field(params, "scenario.params", "gamma"),
                              "scenario.params.gamma");
  std::uint64_t e_d = params.contains("e_d") ? as_uint(params["e_d"], "scenario.params.e_d") : 2;
  std::uint64_t e_s = params.contains("e_s") ? as_uint(params["e_s"], "scenario.params.e_s") : 3;
  std::uint64_t e_b = params.contains("e_b") ? as_uint(params["e_b"], "scenario.params.e_b") : 1;
  std::uint64_t budget =
      params.contains("budget") ? as_uint(params["budget"], "scenario.params.budget") : 1000000;

  ActionPtr action = FiniteAction::translation(g);
  auto data = distinguish_sets(g, F, ell, evaluation_rule(g, ell), R, M, gamma, e_d, e_s, e_b,
                               std::nullopt, caps);
  auto dc = distinguish_csp(action, data, {}, all_points(*action), {},
                            empty_point_function(action, ell), caps);
  auto solved = moser_tardos(dc.csp, seed, budget);

  ModeOutput out;
  bool ok = solved.status == SolveStatus::solved;
  out.audits.push_back({"solver_solved", ok,
                        ok ? "resamples = " + std::to_string(solved.resamples) +
                                 ", seed = " + std::to_string(seed)
                           : "budget exhausted after " + std::to_string(solved.resamples) +
                                 " resamples"});
  if (ok) {
    auto colored = distinguish_coloring(dc, solved.assignment);
    auto scan = distinguish_rescan(action, data, colored);
    std::string w = "every point carries a distinguishing translate";
    if (!scan.ok)
      for (std::uint32_t x = 0; x < scan.witness.size(); ++x)
        if (!scan.witness[x]) {
          w = "point " + std::to_string(x) + " has no distinguishing translate";
          break;
        }
    out.audits.push_back({"rescan_distinguished", scan.ok, w});
  } else {
    out.audits.push_back(
        {"rescan_distinguished", false, "not reached: solver returned no coloring"});
  }
  out.payload["blocks"] = dc.Z.size();
  out.payload["constraints"] = dc.csp.constraints.size();
  out.payload["lll_p"] = dc.params.p.str();
  out.payload["dependency_degree"] = dc.params.d;
  out.payload["resamples"] = solved.resamples;
  out.work["constraints"] = dc.csp.constraints.size();
  out.work["resamples"] = solved.resamples;
  return out;
}

inline ModeOutput run_schedule(const GroupPtr& g, const Json& params, const Caps& caps) {
  check_keys(params, "scenario.params", {"schedule_mode", "d", "t0", "count"});
  ScheduleMode mode = schedule_mode_from(
      require_field(params, "scenario.params", "schedule_mode"), "scenario.params.schedule_mode");
  std::size_t count = static_cast<std::size_t>(
      as_uint(require_field(params, "scenario.params", "count"), "scenario.params.count"));
  GroupSubset D = params.contains("d") ? subset_from_json(g, params["d"], "scenario.params.d")
                                       : GroupSubset::empty(g);
  if (mode == ScheduleMode::core && !params.contains("d"))
    throw ScenarioError("scenario.params.d", "lemma17 schedules need a core set");
  GroupSubset T0 = params.contains("t0") ? subset_from_json(g, params["t0"], "scenario.params.t0")
                                         : GroupSubset::identity_of(g);

  Schedule s = schedule_sets(mode, g, D, T0, count, caps);
  auto bad = schedule_audit(s, caps);

  ModeOutput out;
  out.audits.push_back({"entries_built", s.entries.size() == count,
                        "built " + std::to_string(s.entries.size()) + " entries"});
  out.audits.push_back(
      {"entry_invariants", !bad.has_value(), bad.value_or("every entry replays clean")});
  Json entries = Json::array();
  for (const auto& e : s.entries) {
    Json row;
    row["t_size"] = e.T.size();
    row["r_size"] = e.R.size();
    row["s_size"] = e.S.size();
    if (e.Q) row["q_size"] = e.Q->size();
    if (e.delta) row["delta"] = elem_to_json(*e.delta);
    entries.push_back(std::move(row));
  }
  out.payload["entries"] = std::move(entries);
  out.payload["final_t_size"] = s.final_T.size();
  out.work["entries"] = count;
  return out;
}

inline ModeOutput run_free_image(const GroupPtr& g, const Json& params, std::uint64_t seed,
                                 const Caps& caps) {
  check_keys(params, "scenario.params", {"k", "t0", "d", "schedule_mode", "gammas"});
  int k = params.contains("k")
              ? static_cast<int>(as_int(params["k"], "scenario.params.k"))
              : 2;
  ScheduleMode mode = params.contains("schedule_mode")
                          ? schedule_mode_from(params["schedule_mode"],
                                               "scenario.params.schedule_mode")
                          : ScheduleMode::plain;
  GroupSubset T0 = params.contains("t0") ? subset_from_json(g, params["t0"], "scenario.params.t0")
                                         : GroupSubset::identity_of(g);
  GroupSubset D = params.contains("d") ? subset_from_json(g, params["d"], "scenario.params.d")
                                       : GroupSubset::empty(g);
  if (mode == ScheduleMode::core && !params.contains("d"))
    throw ScenarioError("scenario.params.d", "lemma17 schedules need a core set");

  std::vector<Elem> gammas;
  if (params.contains("gammas")) {
    gammas = elems_from_json(params["gammas"], "scenario.params.gammas");
  } else if (g->finite()) {
    for (std::uint64_t i = 0; i < g->order(); ++i)
      if (!g->is_identity(g->element_at(i))) gammas.push_back(g->element_at(i));
  }

  ActionPtr action = FiniteAction::translation(g);
  Schedule sched = schedule_prefix(mode, g, D, T0, gammas.size(), caps);
  auto rep = free_image_coloring(action, k, sched, gammas, seed, caps);
  const FiniteAction& a = *action;

  // replay every stage certificate against the final coloring and the prefix
  // of points colored so far
  bool replay = true;
  std::string replay_w = "every stage certificate replays";
  {
    std::vector<char> mask(a.size(), 0);
    for (std::size_t n = 0; n < rep.stages.size() && replay; ++n) {
      const auto& st = rep.stages[n];
      for (auto p : st.block) mask[p] = 1;
      for (std::uint32_t x = 0; x < a.size(); ++x) {
        const Elem& sigma = st.sigma[x];
        std::uint32_t p = a.apply(sigma, x);
        std::uint32_t q = a.apply(g->mul(sigma, st.gamma), x);
        if (!st.S.contains(sigma) || !mask[p] || !mask[q] ||
            rep.f.values[p] == rep.f.values[q]) {
          replay = false;
          replay_w = "stage " + std::to_string(n) + " certificate fails at point " +
                     std::to_string(x);
          break;
        }
      }
    }
  }

  // exhaustive: along every listed direction, every coding image moves
  bool free_images = true;
  std::string free_w =
      "every coding image moves along all " + std::to_string(gammas.size()) + " directions";
  for (std::uint32_t x = 0; x < a.size() && free_images; ++x)
    for (const Elem& gamma : gammas) {
      bool moved = false;
      for (std::uint64_t i = 0; i < g->order() && !moved; ++i) {
        const Elem sigma = g->element_at(i);
        moved = rep.f.values[a.apply(g->mul(sigma, gamma), x)] !=
                rep.f.values[a.apply(sigma, x)];
      }
      if (!moved) {
        free_images = false;
        free_w = "point " + std::to_string(x) + " is fixed along " + elem_to_json(gamma).dump();
        break;
      }
    }

  ModeOutput out;
  out.audits.push_back({"certificates_replay", replay, replay_w});
  out.audits.push_back({"coding_images_free", free_images, free_w});
  out.audits.push_back({"all_points_colored", is_total(rep.f),
                        "leftover points filled with color 0: " +
                            std::to_string(rep.leftover.size())});
  out.payload["coloring"] = rep.f.values;
  Json stages = Json::array();
  for (const auto& st : rep.stages)
    stages.push_back(Json{{"gamma", elem_to_json(st.gamma)},
                          {"block_size", st.block.size()},
                          {"degraded", st.degraded}});
  out.payload["stages"] = std::move(stages);
  out.payload["leftover"] = rep.leftover.size();
  out.payload["schedule_entries"] = sched.entries.size();
  out.work["points"] = a.size();
  out.work["stages"] = gammas.size();
  return out;
}

inline ModeOutput run_lemma16(const GroupPtr& g, const Json& params, const Caps& caps) {
  check_keys(params, "scenario.params", {"k", "exponent", "t1_cap", "extension_set"});
  int k = params.contains("k")
              ? static_cast<int>(as_int(params["k"], "scenario.params.k"))
              : 2;
  StabTransferParams sp;
  if (params.contains("exponent"))
    sp.exponent = as_uint(params["exponent"], "scenario.params.exponent");
  if (params.contains("t1_cap"))
    sp.t1_cap = static_cast<std::size_t>(as_uint(params["t1_cap"], "scenario.params.t1_cap"));
  if (params.contains("extension_set"))
    sp.extension_set =
        subset_from_json(g, params["extension_set"], "scenario.params.extension_set");

  auto configs = free_part(g, k, caps);
  ActionPtr action = FiniteAction::shift_action(std::move(configs));
  std::vector<int> vals;
  vals.reserve(action->size());
  for (const auto& c : action->configs()) vals.push_back(config_at(c, g->identity()));
  PointFunction rho = make_point_function(action, k, std::move(vals));

  auto rep = stab_transfer_pipeline(rho, sp, caps);

  ModeOutput out;
  for (const auto& a : rep.audits) out.audits.push_back({a.name, a.pass, a.witness});
  out.audits.push_back({"pipeline_stages", !rep.failed_stage.has_value(),
                        rep.failed_stage ? "first broken stage: " + *rep.failed_stage
                                         : "all stages hold"});
  out.payload["free_points"] = action->size();
  out.payload["ell"] = rep.ell;
  out.payload["colorings"] = rep.col ? rep.col->size() : 0;
  out.payload["a_size"] = rep.A.size();
  out.payload["t0_size"] = rep.T0.size();
  out.payload["t1_size"] = rep.T1.size();
  out.payload["t_size"] = rep.T.size();
  out.payload["b_size"] = rep.B.size();
  out.payload["d_size"] = rep.D.size();
  out.payload["f_size"] = rep.F.size();
  out.payload["witnesses"] = rep.witnesses.size();
  out.payload["j0"] = rep.J0.size();
  out.payload["j1"] = rep.J1.size();
  out.payload["copy_a"] = rep.copyA.size();
  out.payload["k_core"] = rep.K.size();
  out.payload["copy_b"] = rep.copyB.size();
  out.payload["c0"] = rep.C0.size();
  out.payload["failed_stage"] = rep.failed_stage ? Json(*rep.failed_stage) : Json(nullptr);
  out.work["colorings"] = rep.col ? rep.col->size() : 0;
  out.work["points"] = action->size();
  return out;
}

inline ModeOutput run_approx_rule(const GroupPtr& g, const Json& params, const Caps& caps) {
  check_keys(params, "scenario.params", {"rule", "family", "d", "n"});
  const Json& rj = require_field(params, "scenario.params", "rule");
  check_keys(rj, "scenario.params.rule", {"k", "m", "window", "table"});
  int k = static_cast<int>(as_int(require_field(rj, "scenario.params.rule", "k"),
                                  "scenario.params.rule.k"));
  int m = static_cast<int>(as_int(require_field(rj, "scenario.params.rule", "m"),
                                  "scenario.params.rule.m"));
  GroupSubset rw = subset_from_json(g, require_field(rj, "scenario.params.rule", "window"),
                                    "scenario.params.rule.window");
  const Json& tj = require_field(rj, "scenario.params.rule", "table");
  if (!tj.is_array()) throw ScenarioError("scenario.params.rule.table", "expected an array");
  std::vector<std::pair<std::vector<int>, int>> table;
  for (std::size_t i = 0; i < tj.size(); ++i) {
    const std::string p = "scenario.params.rule.table[" + std::to_string(i) + "]";
    const Json& row = tj[i];
    if (!row.is_array() || row.size() != 2)
      throw ScenarioError(p, "expected a [pattern, value] pair");
    if (!row[0].is_array()) throw ScenarioError(p + "[0]", "expected an array of symbols");
    std::vector<int> pat;
    for (std::size_t j = 0; j < row[0].size(); ++j)
      pat.push_back(static_cast<int>(as_int(row[0][j], p + "[0][" + std::to_string(j) + "]")));
    table.emplace_back(std::move(pat), static_cast<int>(as_int(row[1], p + "[1]")));
  }
  LocalRule rule;
  try {
    rule = make_local_rule(g, k, m, rw, std::move(table));
  } catch (const std::exception& e) {
    throw ScenarioError("scenario.params.rule", e.what());
  }

  const Json& fj = require_field(params, "scenario.params", "family");
  if (!fj.is_array() || fj.empty())
    throw ScenarioError("scenario.params.family", "expected a nonempty array");
  std::vector<Sft> family;
  for (std::size_t i = 0; i < fj.size(); ++i) {
    const std::string p = "scenario.params.family[" + std::to_string(i) + "]";
    check_keys(fj[i], p, {"window", "allowed"});
    GroupSubset w = subset_from_json(g, require_field(fj[i], p, "window"), p + ".window");
    const Json& aj = require_field(fj[i], p, "allowed");
    if (!aj.is_array()) throw ScenarioError(p + ".allowed", "expected an array of patterns");
    std::vector<std::vector<int>> allowed;
    for (std::size_t j = 0; j < aj.size(); ++j) {
      const std::string q = p + ".allowed[" + std::to_string(j) + "]";
      if (!aj[j].is_array()) throw ScenarioError(q, "expected an array of symbols");
      std::vector<int> pat;
      for (std::size_t t = 0; t < aj[j].size(); ++t)
        pat.push_back(static_cast<int>(as_int(aj[j][t], q + "[" + std::to_string(t) + "]")));
      allowed.push_back(std::move(pat));
    }
    try {
      family.push_back(make_sft(g, k, std::move(w), std::move(allowed)));
    } catch (const std::exception& e) {
      throw ScenarioError(p, e.what());
    }
  }

  GroupSubset D =
      subset_from_json(g, require_field(params, "scenario.params", "d"), "scenario.params.d");
  std::size_t N = static_cast<std::size_t>(
      as_uint(require_field(params, "scenario.params", "n"), "scenario.params.n"));

  auto rep = approx_local_rule(family, rule, D, N, caps);

  ModeOutput out;
  out.audits.push_back({"family_core_nonempty", !rep.core.empty(),
                        "core configurations: " + std::to_string(rep.core.size())});
  out.audits.push_back({"members_matched", rep.match.size() == rep.members.size(),
                        std::to_string(rep.match.size()) + " of " +
                            std::to_string(rep.members.size()) +
                            " members matched to a core configuration"});
  out.payload["members"] = rep.members.size();
  out.payload["core"] = rep.core.size();
  out.payload["rule_table"] = rep.rule.table.size();
  out.work["members"] = rep.members.size();
  return out;
}

inline ModeOutput run_bound_report(const Json& params) {
  check_keys(params, "scenario.params", {"ell", "d_size", "r_size", "m_size"});
  std::uint64_t ell =
      as_uint(require_field(params, "scenario.params", "ell"), "scenario.params.ell");
  std::uint64_t d_size =
      as_uint(require_field(params, "scenario.params", "d_size"), "scenario.params.d_size");
  std::uint64_t r_size =
      as_uint(require_field(params, "scenario.params", "r_size"), "scenario.params.r_size");
  std::uint64_t m_size =
      as_uint(require_field(params, "scenario.params", "m_size"), "scenario.params.m_size");

  auto rep = bound_report(ell, d_size, r_size, m_size);
  bool least = bound_product_below_one(ell, d_size, r_size, rep.threshold) &&
               (rep.threshold == 1 ||
                !bound_product_below_one(ell, d_size, r_size, rep.threshold - 1));
  bool row_ok = rep.product_below_one == (m_size >= rep.threshold);

  ModeOutput out;
  out.audits.push_back({"threshold_least", least,
                        "threshold = " + std::to_string(rep.threshold) +
                            " is the least size with product < 1"});
  out.audits.push_back({"row_verdict_consistent", row_ok,
                        "m_size " + std::to_string(m_size) + " vs threshold " +
                            std::to_string(rep.threshold)});
  out.payload["ell"] = rep.ell;
  out.payload["d_size"] = rep.d_size;
  out.payload["r_size"] = rep.r_size;
  out.payload["m_size"] = rep.m_size;
  out.payload["a"] = rep.a.str();
  out.payload["c"] = rep.c.str();
  out.payload["base"] = rep.base.str();
  out.payload["product_below_one"] = rep.product_below_one;
  out.payload["product_decimal"] = rep.product_decimal;
  out.payload["threshold"] = rep.threshold;
  out.work["verdict_evaluations"] = 3;
  return out;
}

inline Caps caps_from_scenario(const Json& scenario,
                               std::optional<std::uint64_t> cap_override) {
  Caps c{};
  if (scenario.contains("caps")) {
    const Json& cj = scenario["caps"];
    check_keys(cj, "scenario.caps",
               {"table_entries", "pattern_count", "search_nodes", "brute_force_space",
                "reduced_colors"});
    auto grab = [&](const char* key, std::uint64_t& slot) {
      if (!cj.contains(key)) return;
      std::uint64_t v = as_uint(cj[key], std::string("scenario.caps.") + key);
      if (v == 0) throw ScenarioError(std::string("scenario.caps.") + key, "cap must be positive");
      slot = v;
    };
    grab("table_entries", c.table_entries);
    grab("pattern_count", c.pattern_count);
    grab("search_nodes", c.search_nodes);
    grab("brute_force_space", c.brute_force_space);
    grab("reduced_colors", c.reduced_colors);
  }
  if (const char* env = std::getenv("SHIFTLAB_CAP")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0' && v > 0) {
      c.table_entries = v;
      c.pattern_count = v;
      c.search_nodes = v;
      c.brute_force_space = v;
      c.reduced_colors = v;
    }
  }
  if (cap_override) {
    c.table_entries = *cap_override;
    c.pattern_count = *cap_override;
    c.search_nodes = *cap_override;
    c.brute_force_space = *cap_override;
    c.reduced_colors = *cap_override;
  }
  return c;
}

}  // namespace scenario_detail

inline ScenarioRun run_scenario(const Json& scenario,
                                std::optional<std::uint64_t> seed_override = std::nullopt,
                                std::optional<std::uint64_t> cap_override = std::nullopt) {
  using namespace scenario_detail;
  if (!scenario.is_object())
    throw ScenarioError("scenario",
                        std::string("expected an object, got ") + scenario.type_name());
  check_keys(scenario, "scenario", {"mode", "group", "params", "seed", "caps", "out"});
  std::string mode =
      as_string(require_field(scenario, "scenario", "mode"), "scenario.mode");
  static const std::vector<std::string> modes = {"verify_prop15", "trivial_stab", "lemma41",
                                                 "schedule",      "free_image",   "lemma16",
                                                 "approx_rule",   "bound_report"};
  if (std::find(modes.begin(), modes.end(), mode) == modes.end())
    throw ScenarioError("scenario.mode", "unknown mode '" + mode + "'");

  Caps caps = caps_from_scenario(scenario, cap_override);

  std::optional<std::uint64_t> seed;
  if (scenario.contains("seed")) seed = as_uint(scenario["seed"], "scenario.seed");
  if (seed_override) seed = seed_override;
  if (mode == "lemma41" && !seed)
    throw ScenarioError("scenario.seed", "seed is mandatory for mode 'lemma41'");

  const Json params = scenario.contains("params") ? scenario["params"] : Json::object();
  if (!params.is_object())
    throw ScenarioError("scenario.params",
                        std::string("expected an object, got ") + params.type_name());

  GroupPtr g;
  if (mode != "bound_report")
    g = group_from_json(require_field(scenario, "scenario", "group"), "scenario.group");

  ModeOutput out;
  try {
    if (mode == "verify_prop15") out = run_verify_prop15(g, params, caps);
    else if (mode == "trivial_stab") out = run_trivial_stab(g, params, caps);
    else if (mode == "lemma41") out = run_lemma41(g, params, *seed, caps);
    else if (mode == "schedule") out = run_schedule(g, params, caps);
    else if (mode == "free_image") out = run_free_image(g, params, seed.value_or(0), caps);
    else if (mode == "lemma16") out = run_lemma16(g, params, caps);
    else if (mode == "approx_rule") out = run_approx_rule(g, params, caps);
    else out = run_bound_report(params);
  } catch (const ScenarioError&) {
    throw;
  } catch (const std::exception& e) {
    out = ModeOutput{};
    out.audits.push_back({"run_completed", false, e.what()});
  }

  bool ok = !out.audits.empty();
  for (const auto& r : out.audits) ok = ok && r.pass;

  Json echo = scenario;
  if (mode == "lemma41" || mode == "free_image") echo["seed"] = seed.value_or(0);

  Json report;
  report["mode"] = mode;
  report["ok"] = ok;
  report["scenario"] = std::move(echo);
  report["audits"] = audit_rows_to_json(out.audits);
  report["payload"] = std::move(out.payload);
  report["work"] = std::move(out.work);
  return {std::move(report), ok};
}

// Cartesian sweep over a template: each grid key is a dotted path into the
// template, each value list one axis. Rows never abort the sweep; schema or
// runtime trouble is captured in the row itself.
inline Json sweep_table(const Json& tmpl, const Json& grid, unsigned jobs,
                        std::optional<std::uint64_t> cap_override = std::nullopt) {
  using namespace scenario_detail;
  if (!grid.is_object())
    throw ScenarioError("grid", std::string("expected an object, got ") + grid.type_name());

  std::vector<std::pair<std::string, std::vector<Json>>> axes;
  for (const auto& item : grid.items()) {
    if (!item.value().is_array())
      throw ScenarioError("grid." + item.key(), "expected an array of values");
    axes.emplace_back(item.key(),
                      std::vector<Json>(item.value().begin(), item.value().end()));
  }

  std::uint64_t total = axes.empty() ? 0 : 1;
  for (const auto& [key, vals] : axes) {
    (void)key;
    total *= vals.size();
    if (total > 100000) throw ScenarioError("grid", "more than 100000 grid points");
  }

  std::vector<Json> assignments;
  assignments.reserve(total);
  for (std::uint64_t idx = 0; idx < total; ++idx) {
    Json point = Json::object();
    std::uint64_t rest = idx;
    for (const auto& [key, vals] : axes) {
      point[key] = vals[rest % vals.size()];
      rest /= vals.size();
    }
    assignments.push_back(std::move(point));
  }

  std::vector<Json> rows(assignments.size());
  auto run_one = [&](std::size_t i) {
    Json row;
    row["grid"] = assignments[i];
    try {
      Json s = tmpl;
      for (const auto& item : assignments[i].items()) {
        std::string pointer = "/" + item.key();
        std::replace(pointer.begin(), pointer.end(), '.', '/');
        s[Json::json_pointer(pointer)] = item.value();
      }
      ScenarioRun r = run_scenario(s, std::nullopt, cap_override);
      row["status"] = r.ok ? "pass" : "fail";
      std::uint64_t passed = 0, failed = 0;
      std::string first;
      for (const auto& a : r.report["audits"]) {
        if (a["status"] == "pass") ++passed;
        else {
          ++failed;
          if (first.empty()) first = a["name"].get<std::string>();
        }
      }
      row["audits_passed"] = passed;
      row["audits_failed"] = failed;
      row["first_failure"] = first.empty() ? Json(nullptr) : Json(first);
      Json metrics = Json::object();
      for (const auto& item : r.report["payload"].items())
        if (item.value().is_number() || item.value().is_boolean() || item.value().is_string())
          metrics[item.key()] = item.value();
      row["metrics"] = std::move(metrics);
    } catch (const std::exception& e) {
      row["status"] = "error";
      row["message"] = e.what();
    }
    rows[i] = std::move(row);
  };

  unsigned width = std::max(1u, jobs);
  if (width <= 1 || rows.size() <= 1) {
    for (std::size_t i = 0; i < rows.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next.fetch_add(1); i < rows.size(); i = next.fetch_add(1))
        run_one(i);
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < std::min<std::size_t>(width, rows.size()); ++t)
      pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::sort(rows.begin(), rows.end(),
            [](const Json& a, const Json& b) { return a["grid"].dump() < b["grid"].dump(); });

  Json table;
  table["template"] = tmpl;
  table["grid"] = grid;
  table["rows"] = rows;
  table["total"] = rows.size();
  return table;
}

// Renders one audit row of a report; throws ScenarioError when the report has
// no such row.
inline std::string explain_audit(const Json& report, const std::string& name) {
  if (!report.is_object() || !report.contains("audits") || !report["audits"].is_array())
    throw ScenarioError("report", "missing audits array");
  for (const auto& row : report["audits"]) {
    if (row.value("name", "") != name) continue;
    std::string out = name + ": " + row.value("status", "?") + "\n";
    if (report.contains("mode") && report["mode"].is_string())
      out += "mode: " + report["mode"].get<std::string>() + "\n";
    if (report.contains("scenario") && report["scenario"].is_object() &&
        report["scenario"].contains("seed"))
      out += "seed: " + report["scenario"]["seed"].dump() + "\n";
    out += "witness: " + row.value("witness", "") + "\n";
    return out;
  }
  std::string names;
  for (const auto& row : report["audits"]) names += " " + row.value("name", "?");
  throw ScenarioError("audit", "unknown audit '" + name + "'; report has:" + names);
}

}  // namespace shiftlab
