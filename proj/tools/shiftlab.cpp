#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <shiftlab/scenario.hpp>

// Exit codes: 0 every audit passed, 1 some audit failed (report still
// written), 2 schema violation or unreadable input.

namespace {

shiftlab::Json load_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw shiftlab::ScenarioError(path, "cannot open file");
  try {
    return shiftlab::Json::parse(in);
  } catch (const shiftlab::Json::parse_error& e) {
    throw shiftlab::ScenarioError(path, e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw shiftlab::ScenarioError(path, "cannot open output file");
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finite shift-space scenario runner"};
  app.require_subcommand(1);

  std::string scenario_path, out_path, template_path, grid_path, report_path, audit_name;
  std::uint64_t seed = 0;
  std::uint64_t cap = 0;
  unsigned jobs = 1;

  auto* run = app.add_subcommand("run", "run one scenario file and write its audit report");
  run->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  run->add_option("--out", out_path, "report JSON output path")->required();
  auto* run_seed = run->add_option("--seed", seed, "override the scenario seed");
  auto* run_cap = run->add_option("--cap-override", cap, "override every resource cap");

  auto* sweep = app.add_subcommand("sweep", "run a scenario template across a parameter grid");
  sweep->add_option("--template", template_path, "scenario template JSON file")->required();
  sweep->add_option("--grid", grid_path, "grid JSON file: dotted path -> value list")
      ->required();
  sweep->add_option("--out", out_path, "aggregated table output path")->required();
  sweep->add_option("--jobs", jobs, "parallel row width");
  auto* sweep_cap = sweep->add_option("--cap-override", cap, "override every resource cap");

  auto* explain = app.add_subcommand("explain", "print one audit row from a report");
  explain->add_option("--report", report_path, "report JSON file")->required();
  explain->add_option("--audit", audit_name, "audit row name")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      shiftlab::Json scenario = load_json(scenario_path);
      auto result = shiftlab::run_scenario(
          scenario, run_seed->count() ? std::optional<std::uint64_t>(seed) : std::nullopt,
          run_cap->count() ? std::optional<std::uint64_t>(cap) : std::nullopt);
      write_text(out_path, result.report.dump(2) + "\n");
      return result.ok ? 0 : 1;
    }
    if (sweep->parsed()) {
      shiftlab::Json tmpl = load_json(template_path);
      shiftlab::Json grid = load_json(grid_path);
      shiftlab::Json table = shiftlab::sweep_table(
          tmpl, grid, jobs,
          sweep_cap->count() ? std::optional<std::uint64_t>(cap) : std::nullopt);
      write_text(out_path, table.dump(2) + "\n");
      return 0;
    }
    shiftlab::Json report = load_json(report_path);
    std::cout << shiftlab::explain_audit(report, audit_name);
    return 0;
  } catch (const shiftlab::ScenarioError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
