#include "rmt/master.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace rmt {

std::string_view to_string(WakeupMode m) { return m == WakeupMode::Cow ? "cow" : "eager"; }

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::Running: return "running";
    case Termination::Exit: return "exit";
    case Termination::Halt: return "halt";
    case Termination::VmFault: return "vm_fault";
    case Termination::NoMajority: return "no_majority";
    case Termination::Hang: return "hang";
    case Termination::EventCap: return "event_cap";
  }
  return "?";
}

void ReplicationConfig::validate() const {
  if (replicas == 0) throw ConfigError("replication.replicas must be >= 1");
  if (faults_tolerated && replicas != 1 && replicas != required_replicas(*faults_tolerated)) {
    throw ConfigError("replication.replicas must equal 2f+1 when f is given");
  }
  if (max_replicas && *max_replicas < initial_replicas()) {
    throw ConfigError("replication.max_replicas is below the initial group size");
  }
  if (hang_watermark == 0) throw ConfigError("replication.hang_watermark must be > 0");
  if (event_cap == 0) throw ConfigError("replication.event_cap must be > 0");
  if (free_budget == 0) throw ConfigError("replication.free_budget must be > 0");
}

std::size_t ReplicationConfig::initial_replicas() const {
  return faults_tolerated ? required_replicas(*faults_tolerated) : replicas;
}

std::size_t ReplicationConfig::replica_cap() const { return max_replicas.value_or(initial_replicas()); }

void PlatformConfig::validate() const {
  topology.validate();
  costs.validate();
  if (mechanism == NotificationMechanism::SharedPolling && !shared_channel) {
    throw ConfigError("shared_polling requires a shared channel");
  }
  if (adaptive.miss_threshold < 0.0 || adaptive.miss_threshold > 1.0) {
    throw ConfigError("placement.miss_threshold must be within [0, 1]");
  }
  if (adaptive.window_events == 0 || adaptive.window_instructions == 0) {
    throw ConfigError("adaptive window bounds must be > 0");
  }
  if (adaptive.initial == PlacementStrategy::Adaptive) {
    throw ConfigError("adaptive initial placement must be a static strategy");
  }
}

ExternalWorld ExternalWorld::with_input(const std::vector<std::string>& script) {
  ExternalWorld world;
  for (const auto& s : script) world.input_script.emplace_back(s.begin(), s.end());
  return world;
}

LockstepMaster::LockstepMaster(const Program& program, ReplicationConfig config, PlatformConfig platform,
                               std::vector<FaultSpec> faults, ExternalWorld& world, RunOptions options)
    : program_(program),
      config_(std::move(config)),
      platform_(std::move(platform)),
      faults_(std::move(faults)),
      world_(world),
      options_(options),
      manager_(config_.free_budget) {
  config_.validate();
  platform_.validate();
  for (const auto& f : faults_) {
    f.validate();
    if (std::holds_alternative<ChannelBit>(f.target) && platform_.mechanism != NotificationMechanism::SharedPolling) {
      throw ConfigError("channel faults need the shared_polling mechanism");
    }
  }
  fired_.assign(faults_.size(), false);

  const std::size_t n = config_.initial_replicas();
  const auto ids = manager_.create_replicas(program_, n);
  adaptive_ = platform_.strategy == PlacementStrategy::Adaptive;
  const PlacementStrategy layout = adaptive_ ? platform_.adaptive.initial : platform_.strategy;
  placement_ = place(layout, ids, platform_.topology);
  for (auto id : ids) manager_.replica(id).core = placement_.cores.at(id);

  report_.initial_replicas = n;
  report_.replica_trace.push_back({0, n});
}

std::vector<ReplicaId> LockstepMaster::running() const {
  std::vector<ReplicaId> ids;
  for (const auto& r : manager_.replicas()) {
    if (r.active()) ids.push_back(r.id);
  }
  return ids;
}

RunReport LockstepMaster::run() {
  while (step()) {
  }
  return report_;
}

bool LockstepMaster::step() {
  if (done_) return false;
  if (report_.events_handled >= config_.event_cap) {
    terminate(Termination::EventCap);
    return false;
  }
  const std::uint64_t k = report_.events_handled;
  fire_event_faults(k, {}, false);

  std::vector<ReplicaId> order = running();
  if (options_.resume_shuffle_seed != 0) {
    std::mt19937_64 rng(options_.resume_shuffle_seed ^ (k * 0x9e3779b97f4a7c15ULL));
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<Ballot> ballots;
  std::vector<ReplicaSegment> segments;
  for (auto id : order) run_replica(id, ballots, segments);
  std::sort(ballots.begin(), ballots.end(), [](const auto& a, const auto& b) { return a.replica < b.replica; });
  std::sort(segments.begin(), segments.end(), [](const auto& a, const auto& b) { return a.replica < b.replica; });

  fire_event_faults(k, ballots, true);

  const SegmentCost seg_cost = segment_cost(segments, platform_.topology, platform_.costs);
  report_.ledger.charge(CostCategory::Execution, seg_cost.execution);
  report_.ledger.charge(CostCategory::LlcMiss, seg_cost.llc_miss);
  if (adaptive_ && options_.instrumented) {
    window_.accesses += seg_cost.accesses;
    const SocketInfo* home =
        platform_.topology.socket(platform_.topology.socket_of(platform_.topology.master_core).value_or(0));
    window_.contention_misses += shared_llc_contention(segments, home != nullptr ? home->llc_capacity_bytes : 0);
    window_.instructions += seg_cost.max_instructions;
    window_.events += 1;
  }

  if (options_.instrumented) {
    std::vector<CoreId> cores;
    for (const auto& seg : segments) cores.push_back(seg.core);
    const EventCost ec =
        event_cost(cores, platform_.mechanism, platform_.shared_channel, platform_.topology, platform_.costs);
    report_.ledger.charge(CostCategory::Notification, ec.notification);
    report_.ledger.charge(CostCategory::Compare, ec.compare);
    report_.ledger.charge(CostCategory::Proxy, ec.proxy);
  }

  for (const auto& b : ballots) {
    if (!b.event) ++report_.hang_detections;
  }

  last_vote_ = compare_and_vote(ballots);
  if (last_vote_.verdict == Verdict::NoMajority) {
    const bool any_event = std::any_of(ballots.begin(), ballots.end(), [](const auto& b) { return b.event; });
    charge_privatizations();
    terminate(any_event ? Termination::NoMajority : Termination::Hang);
    return false;
  }
  if (last_vote_.verdict == Verdict::Majority) {
    ++report_.minority_votes;
    recover(last_vote_.minority, last_vote_.supporters.front());
  }

  const ExternalizationEvent canonical = *last_vote_.canonical;
  report_.event_digests.push_back(canonical.digest);
  report_.instructions = manager_.replica(last_vote_.supporters.front()).state.instr_count;
  proxy(canonical, k);
  ++report_.events_handled;
  for (auto id : running()) manager_.replica(id).status = ReplicaStatus::AtEvent;

  if (!done_) {
    apply_scale_request();
    manager_.drain_free_queue();

    if (adaptive_ && options_.instrumented &&
        (window_.events >= platform_.adaptive.window_events ||
         window_.instructions >= platform_.adaptive.window_instructions)) {
      const AdaptDecision d = adapt_placement(window_, placement_, platform_.adaptive.miss_threshold,
                                              switched_last_window_, platform_.topology, failed_cores_);
      if (d.switched) {
        placement_ = d.placement;
        for (const auto& [id, core] : placement_.cores) manager_.replica(id).core = core;
        report_.ledger.charge(CostCategory::Scaling, d.moved * platform_.costs.migration_cost_cycles);
        report_.placement_trace.push_back({report_.events_handled, placement_.strategy, d.moved});
      }
      switched_last_window_ = d.switched;
      window_ = {};
    }
  }
  charge_privatizations();
  if (options_.check_invariants) manager_.check_invariants();
  return !done_;
}

void LockstepMaster::run_replica(ReplicaId id, std::vector<Ballot>& ballots, std::vector<ReplicaSegment>& segments) {
  Replica& r = manager_.replica(id);
  r.status = ReplicaStatus::Running;
  r.state.access_stats = {};
  ReplicaSegment seg;
  seg.replica = id;
  seg.core = r.core.value_or(0);
  const std::uint64_t stall = config_.hang_watermark * platform_.costs.cpi;

  if (r.core && failed_cores_.contains(*r.core)) {
    // A dead core never reaches the next trap; the watermark expires.
    seg.stalled_cycles = stall;
    ballots.push_back({id, std::nullopt});
    segments.push_back(seg);
    r.status = ReplicaStatus::Faulted;
    return;
  }

  std::uint64_t executed = 0;
  for (;;) {
    SegmentLimits limits;
    limits.max_instructions = config_.hang_watermark - executed;
    limits.stop_at = next_instruction_trigger(id, r.state.instr_count);
    const std::uint64_t before = r.state.access_stats.instructions;
    Trap trap = run_segment(program_, r.state, r.space, limits);
    executed += r.state.access_stats.instructions - before;

    switch (trap.kind) {
      case TrapKind::InjectionPoint:
        fire_instruction_faults(id, r.state.instr_count);
        continue;
      case TrapKind::CowWrite:
        manager_.privatize_on_write(r, trap.page);
        continue;
      case TrapKind::Watermark:
        seg.stalled_cycles = stall;
        ballots.push_back({id, std::nullopt});
        segments.push_back(seg);
        r.status = ReplicaStatus::Faulted;
        return;
      default:
        seg.instructions = trap.segment_stats.instructions;
        seg.accesses = trap.segment_stats.accesses;
        seg.touched_pages = trap.segment_stats.touched.count();
        ballots.push_back({id, trap.event});
        segments.push_back(seg);
        r.status = ReplicaStatus::AtEvent;
        return;
    }
  }
}

std::uint64_t LockstepMaster::next_instruction_trigger(ReplicaId id, std::uint64_t from) const {
  std::uint64_t next = SegmentLimits::kNever;
  for (std::size_t i = 0; i < faults_.size(); ++i) {
    if (fired_[i]) continue;
    const auto* at = std::get_if<AtInstruction>(&faults_[i].trigger);
    if (at == nullptr || at->count < from) continue;
    const auto* reg = std::get_if<RegisterBit>(&faults_[i].target);
    const auto* mem = std::get_if<MemoryBit>(&faults_[i].target);
    const ReplicaId target = reg ? reg->replica : mem ? mem->replica : ReplicaId(-1);
    if (target == id) next = std::min(next, at->count);
  }
  return next;
}

void LockstepMaster::fire_instruction_faults(ReplicaId id, std::uint64_t count) {
  FaultContext ctx{manager_, failed_cores_, config_.ecc_memory, {}};
  for (std::size_t i = 0; i < faults_.size(); ++i) {
    if (fired_[i]) continue;
    const auto* at = std::get_if<AtInstruction>(&faults_[i].trigger);
    if (at == nullptr || at->count != count) continue;
    const auto* reg = std::get_if<RegisterBit>(&faults_[i].target);
    const auto* mem = std::get_if<MemoryBit>(&faults_[i].target);
    const ReplicaId target = reg ? reg->replica : mem ? mem->replica : ReplicaId(-1);
    if (target != id) continue;
    fired_[i] = true;
    note_effect(apply_fault(faults_[i], ctx));
  }
}

void LockstepMaster::fire_event_faults(std::uint64_t index, std::span<Ballot> ballots, bool channel) {
  FaultContext ctx{manager_, failed_cores_, config_.ecc_memory, ballots};
  for (std::size_t i = 0; i < faults_.size(); ++i) {
    if (fired_[i]) continue;
    const auto* at = std::get_if<AtEventIndex>(&faults_[i].trigger);
    if (at == nullptr || at->index != index) continue;
    if (std::holds_alternative<ChannelBit>(faults_[i].target) != channel) continue;
    fired_[i] = true;
    note_effect(apply_fault(faults_[i], ctx));
  }
}

void LockstepMaster::note_effect(FaultEffect effect) {
  if (effect == FaultEffect::Applied) ++report_.faults_applied;
  if (effect == FaultEffect::CorrectedByEcc) ++report_.ecc_corrections;
}

std::optional<CoreId> LockstepMaster::spare_core() const {
  std::set<CoreId> unavailable = failed_cores_;
  for (const auto& [id, core] : placement_.cores) unavailable.insert(core);
  const PlacementStrategy layout =
      placement_.strategy == PlacementStrategy::Adaptive ? PlacementStrategy::SameSocket : placement_.strategy;
  const auto order = preference_order(layout, platform_.topology, unavailable);
  if (order.empty()) return std::nullopt;
  return order.front();
}

void LockstepMaster::recover(std::span<const ReplicaId> minority, ReplicaId canonical) {
  const CostParams& costs = platform_.costs;
  for (auto id : minority) {
    Replica& r = manager_.replica(id);
    if (r.core && failed_cores_.contains(*r.core)) {
      const auto spare = spare_core();
      if (!spare) {
        manager_.retire(r);
        placement_.cores.erase(id);
        ++report_.retirements;
        report_.degraded = true;
        if (running().empty()) throw std::logic_error("retirement left no running replica");
        record_replica_count();
        continue;
      }
      r.core = *spare;
      placement_.cores[id] = *spare;
      ++report_.migrations;
      report_.ledger.charge(CostCategory::Scaling, costs.migration_cost_cycles);
    }
    const Replica& src = manager_.replica(canonical);
    manager_.copy_state(src, r);
    r.status = ReplicaStatus::AtEvent;
    ++report_.recoveries;
    report_.ledger.charge(CostCategory::Scaling,
                          costs.state_copy_cost_cycles + r.space.mapped_pages() * costs.page_copy_cost_cycles);
  }
}

void LockstepMaster::proxy(const ExternalizationEvent& event, std::uint64_t index) {
  switch (event.kind) {
    case EventKind::Write:
      world_.output_log.push_back({index, event.args});
      break;
    case EventKind::Read: {
      const std::uint64_t addr = event.arg(0);
      const std::uint64_t len = event.arg(1);
      std::vector<std::uint8_t> bytes;
      if (world_.next_input < world_.input_script.size()) {
        bytes = world_.input_script[world_.next_input++];
        if (bytes.size() > len) bytes.resize(len);
      }
      for (auto id : running()) {
        Replica& r = manager_.replica(id);
        // The VM validated the buffer before trapping, so this cannot miss.
        manager_.write_memory(r, addr, bytes);
        r.state.regs[0] = bytes.size();
      }
      break;
    }
    case EventKind::Map: {
      const std::uint64_t first = event.arg(0);
      const std::uint64_t pages = event.arg(1);
      MapStatus status = MapStatus::Exhausted;
      if (first <= kMaxPages && pages <= kMaxPages) {
        status = manager_.try_service_map(static_cast<PageIndex>(first), static_cast<std::uint32_t>(pages));
      }
      for (auto id : running()) manager_.replica(id).state.regs[0] = static_cast<std::uint64_t>(status);
      break;
    }
    case EventKind::HintRaise:
      if (config_.honor_hints && options_.instrumented) pending_scale_ = +1;
      break;
    case EventKind::HintLower:
      if (config_.honor_hints && options_.instrumented) pending_scale_ = -1;
      break;
    case EventKind::Exit:
      world_.exit_code = event.arg(0);
      terminate(Termination::Exit);
      break;
    case EventKind::Halt:
      terminate(Termination::Halt);
      break;
    case EventKind::Fault:
      terminate(Termination::VmFault);
      break;
  }
}

void LockstepMaster::apply_scale_request() {
  const int request = pending_scale_;
  pending_scale_ = 0;
  try {
    if (request < 0) scale_down();
    if (request > 0) scale_up(config_.wakeup);
  } catch (const ScaleRefused&) {
    ++report_.scale_refusals;
  }
}

void LockstepMaster::scale_down() {
  const auto ids = running();
  if (ids.size() < 2) throw ScaleRefused("scale-down would leave no replica");
  const Digest d0 = digest(manager_.replica(ids.front()).state, manager_.replica(ids.front()).space);
  for (auto id : ids) {
    const Replica& r = manager_.replica(id);
    if (digest(r.state, r.space) != d0) throw std::logic_error("scale-down at a boundary with diverged replicas");
  }
  Replica& victim = manager_.replica(ids.back());
  victim.status = ReplicaStatus::Sleeping;
  manager_.release_replica_memory(victim);
  record_replica_count();
}

void LockstepMaster::scale_up(WakeupMode mode) {
  const auto ids = running();
  if (ids.empty()) throw ScaleRefused("no running replica to copy from");

  Replica* waking = nullptr;
  for (auto& r : manager_.replicas()) {
    if (r.status == ReplicaStatus::Sleeping) {
      waking = &r;
      break;
    }
  }
  if (waking == nullptr) {
    std::size_t live = 0;
    for (const auto& r : manager_.replicas()) live += r.status != ReplicaStatus::Retired ? 1 : 0;
    if (live >= config_.replica_cap()) throw ScaleRefused("no sleeping replica and the replica cap is reached");
    const auto spare = spare_core();
    if (!spare) throw ScaleRefused("no sleeping replica and no free core");
    waking = &manager_.spawn_sleeping(manager_.replica(ids.front()));
    waking->core = *spare;
    placement_.cores[waking->id] = *spare;
  }
  if (!waking->core || failed_cores_.contains(*waking->core)) {
    const auto spare = spare_core();
    if (!spare) throw ScaleRefused("sleeping replica has no usable core");
    waking->core = *spare;
    placement_.cores[waking->id] = *spare;
  }

  Replica& source = manager_.replica(ids.front());
  const CostParams& costs = platform_.costs;
  if (mode == WakeupMode::Cow) {
    manager_.cow_attach(*waking, source);
    report_.ledger.charge(CostCategory::Scaling, costs.state_copy_cost_cycles);
  } else {
    manager_.copy_state(source, *waking);
    report_.ledger.charge(CostCategory::Scaling,
                          costs.state_copy_cost_cycles + waking->space.mapped_pages() * costs.page_copy_cost_cycles);
  }
  waking->status = ReplicaStatus::AtEvent;
  record_replica_count();
}

void LockstepMaster::record_replica_count() {
  const std::size_t n = running().size();
  if (!report_.replica_trace.empty() && report_.replica_trace.back().event_index == report_.events_handled) {
    report_.replica_trace.back().replicas = n;
  } else {
    report_.replica_trace.push_back({report_.events_handled, n});
  }
}

void LockstepMaster::charge_privatizations() {
  // Privatizations copy one region each; charged per copied page.
  const std::uint64_t pages = manager_.privatized_pages();
  if (options_.instrumented) {
    report_.ledger.charge(CostCategory::Scaling, (pages - privatized_pages_charged_) * platform_.costs.page_copy_cost_cycles);
  }
  privatized_pages_charged_ = pages;
}

void LockstepMaster::terminate(Termination t) {
  done_ = true;
  report_.termination = t;
  report_.output_log = world_.output_log;
  report_.exit_code = world_.exit_code;
  switch (t) {
    case Termination::Hang:
    case Termination::EventCap:
      report_.outcome = OutcomeClass::Hang;
      break;
    case Termination::NoMajority:
      report_.outcome = OutcomeClass::DetectedUnrecoverable;
      break;
    default:
      report_.outcome = report_.minority_votes > 0 ? OutcomeClass::DetectedCorrected : OutcomeClass::Masked;
  }
}

RunReport run_replicated(const Program& program, const ReplicationConfig& config, const PlatformConfig& platform,
                         std::vector<FaultSpec> faults, ExternalWorld& world, const RunOptions& options) {
  LockstepMaster master(program, config, platform, std::move(faults), world, options);
  return master.run();
}

RunReport run_native(const Program& program, const PlatformConfig& platform, ExternalWorld& world,
                     std::uint64_t hang_watermark) {
  ReplicationConfig config;
  config.replicas = 1;
  config.hang_watermark = hang_watermark;
  config.honor_hints = false;
  PlatformConfig native = platform;
  // No interception: the mechanism is irrelevant, and adaptive monitoring is off.
  native.mechanism = NotificationMechanism::SyncMessage;
  if (native.strategy == PlacementStrategy::Adaptive) native.strategy = native.adaptive.initial;
  RunOptions options;
  options.instrumented = false;
  return run_replicated(program, config, native, {}, world, options);
}

}  // namespace rmt
