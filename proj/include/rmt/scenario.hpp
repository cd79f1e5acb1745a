#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rmt/campaign.hpp"
#include "rmt/master.hpp"

namespace rmt {

struct Workload {
  std::string name;
  std::filesystem::path path;
  Program program;
  std::vector<std::vector<std::uint8_t>> input;
};

struct CampaignSpec {
  std::uint64_t seed = 1;
  std::size_t runs = 100;
  FaultSpace space;
  std::size_t jobs = 1;
};

enum class SweepAxis : std::uint8_t { Placement, Mechanism, Replicas, Faults };

std::string_view to_string(SweepAxis a);

struct SweepSpec {
  SweepAxis axis = SweepAxis::Placement;
  std::vector<std::string> values;
  std::vector<Workload> workloads;  // defaults to the scenario workload
};

/// A fully validated experiment description. Every module-level invariant
/// is checked while loading, before anything runs.
struct Scenario {
  std::string id;
  Workload workload;
  ReplicationConfig replication;
  PlatformConfig platform;
  std::vector<FaultSpec> faults;
  std::optional<CampaignSpec> campaign;
  std::optional<SweepSpec> sweep;
};

/// Throws ConfigError (bad schema, unknown key, missing file, invalid value)
/// or ParseError (workload does not assemble).
Scenario load_scenario(const std::filesystem::path& file);
/// `base` resolves relative program paths.
Scenario parse_scenario(std::string_view json_text, const std::filesystem::path& base, std::string id);

/// Applies one sweep axis value to a copy of the configuration.
void apply_axis_value(SweepAxis axis, const std::string& value, ReplicationConfig& replication,
                      PlatformConfig& platform);

}  // namespace rmt
