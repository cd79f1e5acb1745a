// rmtsim: run, campaign and sweep verbs over a scenario file.
// Exit codes: 0 success, 1 configuration error, 2 runtime error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rmt/experiment.hpp"

namespace {

constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Redundant multithreading simulator"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_path;
  std::string format = "csv";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
    cmd->add_option("--out", out_path, "Output file (default: stdout)");
    cmd->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--seed", seed, "Overrides campaign.seed");
  };
  auto* run = app.add_subcommand("run", "Native baseline plus one replicated run");
  auto* campaign = app.add_subcommand("campaign", "Seeded fault-injection campaign");
  auto* sweep = app.add_subcommand("sweep", "Compare configurations along one axis");
  for (auto* cmd : {run, campaign, sweep}) add_common(cmd);
  campaign->add_option("--jobs", jobs, "Worker threads (default: campaign.jobs)")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  rmt::Scenario scenario;
  rmt::ReportFormat fmt{};
  try {
    fmt = rmt::parse_format(format);
    scenario = rmt::load_scenario(scenario_path);
  } catch (const rmt::ParseError& e) {
    std::cerr << "rmtsim: " << scenario_path << ": workload " << e.what() << "\n";
    return kConfigError;
  } catch (const rmt::ConfigError& e) {
    std::cerr << "rmtsim: " << scenario_path << ": " << e.what() << "\n";
    return kConfigError;
  }

  try {
    rmt::Report report;
    if (run->parsed()) report = rmt::cmd_run(scenario);
    if (campaign->parsed()) report = rmt::cmd_campaign(scenario, seed, jobs);
    if (sweep->parsed()) report = rmt::cmd_sweep(scenario);
    if (out_path.empty()) {
      std::cout << rmt::render(report, fmt);
    } else {
      rmt::emit(report, fmt, out_path);
    }
  } catch (const rmt::ConfigError& e) {
    std::cerr << "rmtsim: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "rmtsim: " << e.what() << "\n";
    return kRuntimeError;
  }
  return 0;
}
