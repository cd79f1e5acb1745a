#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rmt/faults.hpp"
#include "rmt/master.hpp"

namespace rmt {

enum class FaultFamily : std::uint8_t { Register, Memory, Backing, Core, Channel };

std::string_view to_string(FaultFamily f);
FaultFamily parse_family(std::string_view text);

/// Families to sample with relative weights (order matters for sampling).
struct FaultSpace {
  std::vector<std::pair<FaultFamily, double>> weights;
};

/// Bounds from a fault-free profiling run, so triggers land in the live range.
struct ProgramProfile {
  std::uint64_t total_instructions = 0;
  std::uint64_t events = 0;
  std::vector<PageIndex> mapped_pages;
  std::size_t replicas = 1;
  std::vector<CoreId> cores;  // cores of the initial placement
};

ProgramProfile profile_program(const Program& program, const ReplicationConfig& config, const PlatformConfig& platform,
                               const std::vector<std::vector<std::uint8_t>>& input_script);

/// One FaultSpec per run, drawn from a per-run sub-seed of `seed`. Throws
/// EmptySpace if no family with positive weight can produce a target.
std::vector<FaultSpec> plan_campaign(std::uint64_t seed, const FaultSpace& space, std::size_t runs,
                                     const ProgramProfile& profile);

/// Precedence Hang > DetectedUnrecoverable > SDC > DetectedCorrected > Masked.
/// `golden` is a fault-free native run of the same program and inputs.
OutcomeClass classify_outcome(const RunReport& report, const RunReport& golden);

/// Payloads, exit code and termination kind agree.
bool same_output(const RunReport& a, const RunReport& b);

struct CampaignRun {
  std::size_t index = 0;
  FaultSpec fault;
  RunReport report;
  OutcomeClass outcome = OutcomeClass::Masked;
};

struct CampaignResult {
  RunReport golden;
  std::vector<CampaignRun> runs;  // ordered by index
  std::array<std::size_t, 5> histogram{};

  std::size_t count(OutcomeClass o) const { return histogram[static_cast<std::size_t>(o)]; }
};

struct CampaignSetup {
  const Program* program = nullptr;
  ReplicationConfig replication;
  PlatformConfig platform;
  std::vector<std::vector<std::uint8_t>> input_script;
  std::uint64_t seed = 1;
  FaultSpace space;
  std::size_t runs = 0;
  std::size_t jobs = 1;  // worker threads; results do not depend on it
};

CampaignResult run_campaign(const CampaignSetup& setup);

}  // namespace rmt
