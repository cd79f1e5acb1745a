#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rmt/faults.hpp"
#include "rmt/platform.hpp"
#include "rmt/replica_manager.hpp"
#include "rmt/vm.hpp"
#include "rmt/vote.hpp"

namespace rmt {

enum class WakeupMode : std::uint8_t { Eager, Cow };

std::string_view to_string(WakeupMode m);

struct ReplicationConfig {
  std::size_t replicas = 1;
  /// When set, the group size is 2f+1 and `replicas` must agree or be 1.
  std::optional<std::size_t> faults_tolerated;
  /// Upper bound for scale-up (running + sleeping); defaults to the initial
  /// group size.
  std::optional<std::size_t> max_replicas;
  WakeupMode wakeup = WakeupMode::Eager;
  std::uint64_t hang_watermark = 100'000'000;  // instructions per segment
  std::uint64_t event_cap = 1'000'000;
  bool ecc_memory = false;
  std::size_t free_budget = 4;  // backings released per event
  bool honor_hints = true;

  void validate() const;
  std::size_t initial_replicas() const;
  std::size_t replica_cap() const;
};

struct PlatformConfig {
  Topology topology = Topology::symmetric(2, 6);
  CostParams costs;
  PlacementStrategy strategy = PlacementStrategy::SameSocket;
  AdaptiveParams adaptive;
  NotificationMechanism mechanism = NotificationMechanism::SyncMessage;
  bool shared_channel = false;

  void validate() const;
};

struct OutputRecord {
  std::uint64_t event_index = 0;
  std::vector<std::uint8_t> bytes;
  friend bool operator==(const OutputRecord&, const OutputRecord&) = default;
};

/// Deterministic stand-in for everything outside the sphere of replication.
struct ExternalWorld {
  std::vector<std::vector<std::uint8_t>> input_script;
  std::size_t next_input = 0;
  std::vector<OutputRecord> output_log;  // append-only
  std::optional<std::uint64_t> exit_code;

  static ExternalWorld with_input(const std::vector<std::string>& script);
};

enum class Termination : std::uint8_t { Running, Exit, Halt, VmFault, NoMajority, Hang, EventCap };

std::string_view to_string(Termination t);

/// Replica count in effect from segment `event_index` onward.
struct ReplicaCountChange {
  std::uint64_t event_index = 0;
  std::size_t replicas = 0;
  friend bool operator==(const ReplicaCountChange&, const ReplicaCountChange&) = default;
};

struct PlacementChange {
  std::uint64_t event_index = 0;
  PlacementStrategy layout = PlacementStrategy::SameSocket;
  std::size_t moved = 0;
  friend bool operator==(const PlacementChange&, const PlacementChange&) = default;
};

struct RunReport {
  /// Without a golden run this can only be Masked, DetectedCorrected,
  /// DetectedUnrecoverable or Hang; classify_outcome refines it.
  OutcomeClass outcome = OutcomeClass::Masked;
  Termination termination = Termination::Running;
  std::optional<std::uint64_t> exit_code;
  std::uint64_t events_handled = 0;
  CostLedger ledger;
  std::vector<OutputRecord> output_log;
  std::vector<ReplicaCountChange> replica_trace;
  std::vector<PlacementChange> placement_trace;
  std::vector<Digest> event_digests;  // canonical digest of every voted event
  std::uint64_t recoveries = 0;       // minority replicas repaired by state copy
  std::uint64_t minority_votes = 0;   // votes with at least one dissenter
  std::uint64_t hang_detections = 0;
  std::uint64_t migrations = 0;       // replicas moved off a failed core
  std::uint64_t retirements = 0;
  bool degraded = false;
  std::uint64_t faults_applied = 0;
  std::uint64_t ecc_corrections = 0;
  std::uint64_t scale_refusals = 0;
  std::uint64_t instructions = 0;  // canonical replica's final instr_count
  std::size_t initial_replicas = 0;

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

struct RunOptions {
  /// false: native baseline, no interception costs and no hint handling.
  bool instrumented = true;
  /// 0 resumes replicas in ascending id order; otherwise a seeded shuffle
  /// per event. Results must not depend on it.
  std::uint64_t resume_shuffle_seed = 0;
  bool check_invariants = false;
};

/// Runs a replica group in lockstep at externalization events. Each step:
/// run every active replica to its next trap, vote, repair the minority,
/// execute the canonical event once, broadcast its result, apply scale
/// requests, drain deferred frees, and charge the cost ledger.
class LockstepMaster {
 public:
  LockstepMaster(const Program& program, ReplicationConfig config, PlatformConfig platform,
                 std::vector<FaultSpec> faults, ExternalWorld& world, RunOptions options = {});

  LockstepMaster(const LockstepMaster&) = delete;
  LockstepMaster& operator=(const LockstepMaster&) = delete;

  RunReport run();
  /// Handles one externalization event; false once the run has terminated.
  bool step();
  bool finished() const { return done_; }

  const RunReport& report() const { return report_; }
  const VoteResult& last_vote() const { return last_vote_; }
  ReplicaManager& replicas() { return manager_; }
  const ReplicaManager& replicas() const { return manager_; }
  const Placement& placement() const { return placement_; }
  const std::set<CoreId>& failed_cores() const { return failed_cores_; }
  /// Active replica ids, ascending.
  std::vector<ReplicaId> running() const;

  /// Puts the highest-id running replica to sleep. Requires N >= 2 and equal
  /// digests across the group. Throws ScaleRefused.
  void scale_down();
  /// Wakes the lowest-id sleeping replica (or spawns one within the replica
  /// cap on a free core). Throws ScaleRefused.
  void scale_up(WakeupMode mode);
  /// Repairs each minority replica from `canonical`, moving it off a failed
  /// core first or retiring it when no spare core exists.
  void recover(std::span<const ReplicaId> minority, ReplicaId canonical);

 private:
  void run_replica(ReplicaId id, std::vector<Ballot>& ballots, std::vector<ReplicaSegment>& segments);
  std::uint64_t next_instruction_trigger(ReplicaId id, std::uint64_t from) const;
  void fire_instruction_faults(ReplicaId id, std::uint64_t count);
  void fire_event_faults(std::uint64_t index, std::span<Ballot> ballots, bool channel);
  void note_effect(FaultEffect effect);
  void proxy(const ExternalizationEvent& event, std::uint64_t index);
  void apply_scale_request();
  void observe_window(const SegmentCost& cost);
  std::optional<CoreId> spare_core() const;
  void record_replica_count();
  void charge_privatizations();
  void terminate(Termination t);

  const Program& program_;
  ReplicationConfig config_;
  PlatformConfig platform_;
  std::vector<FaultSpec> faults_;
  std::vector<bool> fired_;
  ExternalWorld& world_;
  RunOptions options_;

  ReplicaManager manager_;
  Placement placement_;
  std::set<CoreId> failed_cores_;
  bool adaptive_ = false;
  WindowObservation window_;
  bool switched_last_window_ = false;

  int pending_scale_ = 0;
  std::uint64_t privatized_pages_charged_ = 0;
  RunReport report_;
  VoteResult last_vote_;
  bool done_ = false;
};

RunReport run_replicated(const Program& program, const ReplicationConfig& config, const PlatformConfig& platform,
                         std::vector<FaultSpec> faults, ExternalWorld& world, const RunOptions& options = {});

/// Single uninstrumented replica: the overhead baseline and golden run.
RunReport run_native(const Program& program, const PlatformConfig& platform, ExternalWorld& world,
                     std::uint64_t hang_watermark = ReplicationConfig{}.hang_watermark);

}  // namespace rmt
