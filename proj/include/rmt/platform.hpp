#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rmt/common.hpp"

namespace rmt {

enum class CoreKind : std::uint8_t { NonResCore, ResCore };

struct CoreInfo {
  CoreId id = 0;
  CoreKind kind = CoreKind::NonResCore;
};

struct SocketInfo {
  std::uint32_t id = 0;
  std::vector<CoreInfo> cores;
  std::uint64_t llc_capacity_bytes = 12ULL << 20;
};

struct Topology {
  std::vector<SocketInfo> sockets;
  CoreId master_core = 0;

  /// `sockets` x `cores_per_socket`, core ids ascending socket by socket.
  static Topology symmetric(std::uint32_t sockets, std::uint32_t cores_per_socket,
                            std::uint64_t llc_capacity_bytes = 12ULL << 20, CoreId master_core = 0);

  const CoreInfo* core(CoreId id) const;
  std::optional<std::uint32_t> socket_of(CoreId id) const;
  const SocketInfo* socket(std::uint32_t id) const;
  std::size_t core_count() const;
  /// RCB mode is on as soon as any core is a ResCore.
  bool rcb_mode() const;
  /// Cores a replica may occupy: not the master's, not a ResCore.
  bool eligible(CoreId id) const;
  std::size_t max_replicas() const;

  /// Throws ConfigError on duplicate ids or a missing master core,
  /// MasterNotResilient if RCB mode is on and the master is a NonResCore.
  void validate() const;
};

/// Marks `res_cores` as ResCores and all others NonResCores.
Topology designate_rcb(Topology topology, std::span<const CoreId> res_cores);

struct CostParams {
  std::uint64_t ipi_intra_cycles = 5'900;
  std::uint64_t ipi_inter_cycles = 14'300;
  std::uint64_t cpi = 1;
  std::uint64_t llc_miss_penalty_cycles = 200;
  std::uint64_t compare_cost_per_replica = 300;
  std::uint64_t migration_cost_cycles = 20'000;
  std::uint64_t state_copy_cost_cycles = 1'000;
  std::uint64_t poll_check_cost_cycles = 200;
  std::uint64_t proxy_base_cost = 2'000;
  std::uint64_t page_copy_cost_cycles = 250;

  void validate() const;
};

enum class PlacementStrategy : std::uint8_t { Sequential, SameSocket, CrossSocket, Adaptive };
enum class NotificationMechanism : std::uint8_t { Migration, SyncMessage, SharedPolling };

std::string_view to_string(PlacementStrategy s);
std::string_view to_string(NotificationMechanism m);
PlacementStrategy parse_strategy(std::string_view text);
NotificationMechanism parse_mechanism(std::string_view text);

struct Placement {
  std::map<ReplicaId, CoreId> cores;
  PlacementStrategy strategy = PlacementStrategy::Sequential;

  std::optional<CoreId> core_of(ReplicaId id) const;
  bool occupied(CoreId core) const;
  friend bool operator==(const Placement&, const Placement&) = default;
};

/// Eligible cores in the order a strategy fills them. Adaptive orders like
/// SameSocket.
std::vector<CoreId> preference_order(PlacementStrategy strategy, const Topology& topology,
                                     const std::set<CoreId>& unavailable = {});

/// Assigns replicas (in the given order) to the first cores of the
/// strategy's preference order. Throws InsufficientCores.
Placement place(PlacementStrategy strategy, std::span<const ReplicaId> replicas, const Topology& topology,
                const std::set<CoreId>& unavailable = {});

enum class CostCategory : std::uint8_t { Execution, LlcMiss, Notification, Compare, Proxy, Scaling };
inline constexpr std::size_t kCostCategoryCount = 6;
std::string_view to_string(CostCategory c);

struct CostLedger {
  std::array<std::uint64_t, kCostCategoryCount> cycles{};

  void charge(CostCategory c, std::uint64_t amount) { cycles[static_cast<std::size_t>(c)] += amount; }
  std::uint64_t operator[](CostCategory c) const { return cycles[static_cast<std::size_t>(c)]; }
  std::uint64_t total() const;
  friend bool operator==(const CostLedger&, const CostLedger&) = default;
};

/// One replica's share of a segment, as seen by the cost model.
struct ReplicaSegment {
  ReplicaId replica = 0;
  CoreId core = 0;
  std::uint64_t instructions = 0;
  std::uint64_t accesses = 0;
  std::uint64_t touched_pages = 0;
  /// Replicas that never trapped (stalled core, runaway loop) are charged
  /// this many cycles of waiting instead of their own work.
  std::optional<std::uint64_t> stalled_cycles;
};

struct SegmentCost {
  std::uint64_t wall_cycles = 0;
  std::uint64_t execution = 0;  // of the slowest replica
  std::uint64_t llc_miss = 0;   // of the slowest replica
  std::uint64_t accesses = 0;            // all replicas
  std::uint64_t contention_misses = 0;   // all replicas, excluding first touches
  std::uint64_t max_instructions = 0;
  std::vector<std::uint64_t> misses;     // per input entry
};

/// LLC occupancy model: per socket, resident bytes W = sum of touched pages
/// of the replicas on it; contention c = max(0, W - capacity) / W; each
/// replica misses once per touched page plus round(accesses * c). Replicas
/// run in parallel, so the wall time is the slowest replica.
SegmentCost segment_cost(std::span<const ReplicaSegment> segments, const Topology& topology, const CostParams& params);

/// Contention misses the replicas would incur if they all shared one LLC of
/// `llc_capacity_bytes`. The adaptive monitor uses this so its signal does
/// not vanish once replicas are spread out.
std::uint64_t shared_llc_contention(std::span<const ReplicaSegment> segments, std::uint64_t llc_capacity_bytes);

std::uint64_t ipi_cycles(CoreId a, CoreId b, const Topology& topology, const CostParams& params);

/// Per-replica cost of getting one replica's event to the master and back.
std::uint64_t notification_cost(CoreId replica_core, NotificationMechanism mechanism, const Topology& topology,
                                const CostParams& params);

struct EventCost {
  std::uint64_t notification = 0;
  std::uint64_t compare = 0;
  std::uint64_t proxy = 0;
  std::uint64_t total() const { return notification + compare + proxy; }
};

/// Throws ConfigError for SharedPolling without a shared channel.
EventCost event_cost(std::span<const CoreId> replica_cores, NotificationMechanism mechanism, bool shared_channel,
                     const Topology& topology, const CostParams& params);

struct AdaptiveParams {
  double miss_threshold = 0.05;
  std::uint64_t window_events = 64;
  std::uint64_t window_instructions = 1'000'000;
  PlacementStrategy initial = PlacementStrategy::SameSocket;
};

struct WindowObservation {
  std::uint64_t accesses = 0;
  std::uint64_t contention_misses = 0;
  std::uint64_t events = 0;
  std::uint64_t instructions = 0;

  double miss_fraction() const {
    return accesses == 0 ? 0.0 : static_cast<double>(contention_misses) / static_cast<double>(accesses);
  }
};

struct AdaptDecision {
  Placement placement;
  bool switched = false;
  std::size_t moved = 0;
};

/// Cache-bound windows (miss fraction above threshold) go CrossSocket,
/// others SameSocket. No switch directly after a switching window.
AdaptDecision adapt_placement(const WindowObservation& window, const Placement& current, double threshold,
                              bool switched_last_window, const Topology& topology,
                              const std::set<CoreId>& unavailable = {});

}  // namespace rmt
