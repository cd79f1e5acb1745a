#include "rmt/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

namespace rmt {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool family_possible(FaultFamily f, const ProgramProfile& p) {
  switch (f) {
    case FaultFamily::Register: return p.total_instructions > 0 && p.replicas > 0;
    case FaultFamily::Memory: return p.total_instructions > 0 && !p.mapped_pages.empty();
    case FaultFamily::Backing: return p.events > 0 && !p.mapped_pages.empty();
    case FaultFamily::Core: return p.events > 0 && !p.cores.empty();
    case FaultFamily::Channel: return p.events > 0 && p.replicas > 0;
  }
  return false;
}

}  // namespace

std::string_view to_string(FaultFamily f) {
  switch (f) {
    case FaultFamily::Register: return "register";
    case FaultFamily::Memory: return "memory";
    case FaultFamily::Backing: return "backing";
    case FaultFamily::Core: return "core";
    case FaultFamily::Channel: return "channel";
  }
  return "?";
}

FaultFamily parse_family(std::string_view text) {
  for (auto f : {FaultFamily::Register, FaultFamily::Memory, FaultFamily::Backing, FaultFamily::Core,
                 FaultFamily::Channel}) {
    if (to_string(f) == text) return f;
  }
  throw ConfigError("unknown fault family '" + std::string(text) + "'");
}

ProgramProfile profile_program(const Program& program, const ReplicationConfig& config, const PlatformConfig& platform,
                               const std::vector<std::vector<std::uint8_t>>& input_script) {
  ExternalWorld world;
  world.input_script = input_script;
  ReplicationConfig native;
  native.hang_watermark = config.hang_watermark;
  native.event_cap = config.event_cap;
  native.honor_hints = false;
  RunOptions options;
  options.instrumented = false;
  PlatformConfig plat = platform;
  if (plat.strategy == PlacementStrategy::Adaptive) plat.strategy = plat.adaptive.initial;
  LockstepMaster master(program, native, plat, {}, world, options);
  const RunReport report = master.run();

  ProgramProfile profile;
  profile.total_instructions = report.instructions;
  profile.events = report.events_handled;
  for (const auto& [first, region] : master.replicas().replica(0).space.regions()) {
    for (std::uint32_t i = 0; i < region.pages; ++i) profile.mapped_pages.push_back(first + i);
  }
  profile.replicas = config.initial_replicas();
  std::vector<ReplicaId> ids(profile.replicas);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<ReplicaId>(i);
  const PlacementStrategy layout =
      platform.strategy == PlacementStrategy::Adaptive ? platform.adaptive.initial : platform.strategy;
  for (const auto& [id, core] : place(layout, ids, platform.topology).cores) profile.cores.push_back(core);
  return profile;
}

std::vector<FaultSpec> plan_campaign(std::uint64_t seed, const FaultSpace& space, std::size_t runs,
                                     const ProgramProfile& profile) {
  std::vector<std::pair<FaultFamily, double>> usable;
  double total = 0.0;
  for (const auto& [family, weight] : space.weights) {
    if (weight < 0.0) throw ConfigError("fault family weights must be >= 0");
    if (weight > 0.0 && family_possible(family, profile)) {
      usable.emplace_back(family, weight);
      total += weight;
    }
  }
  if (usable.empty()) throw EmptySpace("fault space has no sampleable family");

  std::vector<FaultSpec> plan;
  plan.reserve(runs);
  for (std::size_t run = 0; run < runs; ++run) {
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(run)));
    auto below = [&](std::uint64_t bound) { return rng() % bound; };

    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * total;
    FaultFamily family = usable.back().first;
    double acc = 0.0;
    for (const auto& [f, w] : usable) {
      acc += w;
      if (u < acc) {
        family = f;
        break;
      }
    }

    const auto replica = static_cast<ReplicaId>(below(profile.replicas));
    FaultSpec spec;
    switch (family) {
      case FaultFamily::Register:
        spec.target = RegisterBit{replica, static_cast<std::uint8_t>(below(kRegisterCount)),
                                  static_cast<std::uint8_t>(below(64))};
        spec.trigger = AtInstruction{below(profile.total_instructions)};
        break;
      case FaultFamily::Memory:
        spec.target = MemoryBit{replica, profile.mapped_pages[below(profile.mapped_pages.size())],
                                static_cast<std::uint16_t>(below(kPageSize)), static_cast<std::uint8_t>(below(8))};
        spec.trigger = AtInstruction{below(profile.total_instructions)};
        break;
      case FaultFamily::Backing:
        spec.target = BackingBit{replica, profile.mapped_pages[below(profile.mapped_pages.size())],
                                 static_cast<std::uint16_t>(below(kPageSize)), static_cast<std::uint8_t>(below(8))};
        spec.trigger = AtEventIndex{below(profile.events)};
        break;
      case FaultFamily::Core:
        spec.target = CorePermanent{profile.cores[below(profile.cores.size())]};
        spec.trigger = AtEventIndex{below(profile.events)};
        break;
      case FaultFamily::Channel:
        spec.target = ChannelBit{replica, static_cast<std::uint8_t>(below(64))};
        spec.trigger = AtEventIndex{below(profile.events)};
        break;
    }
    plan.push_back(spec);
  }
  return plan;
}

bool same_output(const RunReport& a, const RunReport& b) {
  if (a.output_log.size() != b.output_log.size()) return false;
  for (std::size_t i = 0; i < a.output_log.size(); ++i) {
    if (a.output_log[i].bytes != b.output_log[i].bytes) return false;
  }
  return a.exit_code == b.exit_code && a.termination == b.termination;
}

OutcomeClass classify_outcome(const RunReport& report, const RunReport& golden) {
  if (report.termination == Termination::Hang || report.termination == Termination::EventCap) {
    return OutcomeClass::Hang;
  }
  if (report.termination == Termination::NoMajority) return OutcomeClass::DetectedUnrecoverable;
  if (report.termination == Termination::VmFault && golden.termination != Termination::VmFault) {
    return OutcomeClass::DetectedUnrecoverable;
  }
  if (!same_output(report, golden)) return OutcomeClass::SDC;
  if (report.minority_votes > 0 || report.recoveries > 0 || report.retirements > 0) {
    return OutcomeClass::DetectedCorrected;
  }
  return OutcomeClass::Masked;
}

CampaignResult run_campaign(const CampaignSetup& setup) {
  if (setup.program == nullptr) throw ConfigError("campaign without a program");
  const Program& program = *setup.program;

  CampaignResult result;
  {
    ExternalWorld world;
    world.input_script = setup.input_script;
    result.golden = run_native(program, setup.platform, world, setup.replication.hang_watermark);
  }
  const ProgramProfile profile = profile_program(program, setup.replication, setup.platform, setup.input_script);
  const auto plan = plan_campaign(setup.seed, setup.space, setup.runs, profile);

  result.runs.resize(plan.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= plan.size()) return;
      try {
        ExternalWorld world;
        world.input_script = setup.input_script;
        CampaignRun& run = result.runs[i];
        run.index = i;
        run.fault = plan[i];
        run.report = run_replicated(program, setup.replication, setup.platform, {plan[i]}, world);
        run.outcome = classify_outcome(run.report, result.golden);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = plan.size();
      }
    }
  };

  const std::size_t jobs = std::clamp<std::size_t>(setup.jobs, 1, std::max<std::size_t>(1, plan.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (const auto& run : result.runs) ++result.histogram[static_cast<std::size_t>(run.outcome)];
  return result;
}

}  // namespace rmt
