#include "rmt/platform.hpp"

#include <algorithm>
#include <cmath>

namespace rmt {

Topology Topology::symmetric(std::uint32_t sockets, std::uint32_t cores_per_socket, std::uint64_t llc_capacity_bytes,
                             CoreId master_core) {
  Topology t;
  t.master_core = master_core;
  CoreId next = 0;
  for (std::uint32_t s = 0; s < sockets; ++s) {
    SocketInfo socket;
    socket.id = s;
    socket.llc_capacity_bytes = llc_capacity_bytes;
    for (std::uint32_t c = 0; c < cores_per_socket; ++c) socket.cores.push_back({next++, CoreKind::NonResCore});
    t.sockets.push_back(std::move(socket));
  }
  return t;
}

const CoreInfo* Topology::core(CoreId id) const {
  for (const auto& s : sockets) {
    for (const auto& c : s.cores) {
      if (c.id == id) return &c;
    }
  }
  return nullptr;
}

std::optional<std::uint32_t> Topology::socket_of(CoreId id) const {
  for (const auto& s : sockets) {
    for (const auto& c : s.cores) {
      if (c.id == id) return s.id;
    }
  }
  return std::nullopt;
}

const SocketInfo* Topology::socket(std::uint32_t id) const {
  for (const auto& s : sockets) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

std::size_t Topology::core_count() const {
  std::size_t n = 0;
  for (const auto& s : sockets) n += s.cores.size();
  return n;
}

bool Topology::rcb_mode() const {
  for (const auto& s : sockets) {
    for (const auto& c : s.cores) {
      if (c.kind == CoreKind::ResCore) return true;
    }
  }
  return false;
}

bool Topology::eligible(CoreId id) const {
  const CoreInfo* c = core(id);
  return c != nullptr && id != master_core && c->kind == CoreKind::NonResCore;
}

std::size_t Topology::max_replicas() const {
  std::size_t n = 0;
  for (const auto& s : sockets) {
    for (const auto& c : s.cores) n += eligible(c.id) ? 1 : 0;
  }
  return n;
}

void Topology::validate() const {
  std::set<CoreId> ids;
  std::set<std::uint32_t> socket_ids;
  if (sockets.empty()) throw ConfigError("topology has no sockets");
  for (const auto& s : sockets) {
    if (!socket_ids.insert(s.id).second) throw ConfigError("duplicate socket id " + std::to_string(s.id));
    for (const auto& c : s.cores) {
      if (!ids.insert(c.id).second) throw ConfigError("duplicate core id " + std::to_string(c.id));
    }
  }
  const CoreInfo* master = core(master_core);
  if (master == nullptr) throw ConfigError("master core " + std::to_string(master_core) + " is not in the topology");
  if (rcb_mode() && master->kind != CoreKind::ResCore) {
    throw MasterNotResilient("master core " + std::to_string(master_core) + " is not a ResCore");
  }
}

Topology designate_rcb(Topology topology, std::span<const CoreId> res_cores) {
  if (res_cores.empty()) throw ConfigError("at least one ResCore is required");
  const std::set<CoreId> res(res_cores.begin(), res_cores.end());
  for (CoreId id : res) {
    if (topology.core(id) == nullptr) throw ConfigError("ResCore " + std::to_string(id) + " is not in the topology");
  }
  if (!res.contains(topology.master_core)) {
    throw MasterNotResilient("master core " + std::to_string(topology.master_core) + " is not among the ResCores");
  }
  for (auto& s : topology.sockets) {
    for (auto& c : s.cores) c.kind = res.contains(c.id) ? CoreKind::ResCore : CoreKind::NonResCore;
  }
  return topology;
}

void CostParams::validate() const {
  if (ipi_inter_cycles < ipi_intra_cycles) throw ConfigError("ipi_inter_cycles must be >= ipi_intra_cycles");
}

std::string_view to_string(PlacementStrategy s) {
  switch (s) {
    case PlacementStrategy::Sequential: return "sequential";
    case PlacementStrategy::SameSocket: return "same_socket";
    case PlacementStrategy::CrossSocket: return "cross_socket";
    case PlacementStrategy::Adaptive: return "adaptive";
  }
  return "?";
}

std::string_view to_string(NotificationMechanism m) {
  switch (m) {
    case NotificationMechanism::Migration: return "migration";
    case NotificationMechanism::SyncMessage: return "sync_message";
    case NotificationMechanism::SharedPolling: return "shared_polling";
  }
  return "?";
}

PlacementStrategy parse_strategy(std::string_view text) {
  for (auto s : {PlacementStrategy::Sequential, PlacementStrategy::SameSocket, PlacementStrategy::CrossSocket,
                 PlacementStrategy::Adaptive}) {
    if (to_string(s) == text) return s;
  }
  throw ConfigError("unknown placement strategy '" + std::string(text) + "'");
}

NotificationMechanism parse_mechanism(std::string_view text) {
  for (auto m : {NotificationMechanism::Migration, NotificationMechanism::SyncMessage,
                 NotificationMechanism::SharedPolling}) {
    if (to_string(m) == text) return m;
  }
  throw ConfigError("unknown notification mechanism '" + std::string(text) + "'");
}

std::string_view to_string(CostCategory c) {
  switch (c) {
    case CostCategory::Execution: return "execution";
    case CostCategory::LlcMiss: return "llc_miss";
    case CostCategory::Notification: return "notification";
    case CostCategory::Compare: return "compare";
    case CostCategory::Proxy: return "proxy";
    case CostCategory::Scaling: return "scaling";
  }
  return "?";
}

std::uint64_t CostLedger::total() const {
  std::uint64_t t = 0;
  for (auto c : cycles) t += c;
  return t;
}

std::optional<CoreId> Placement::core_of(ReplicaId id) const {
  auto it = cores.find(id);
  if (it == cores.end()) return std::nullopt;
  return it->second;
}

bool Placement::occupied(CoreId core) const {
  return std::any_of(cores.begin(), cores.end(), [&](const auto& kv) { return kv.second == core; });
}

std::vector<CoreId> preference_order(PlacementStrategy strategy, const Topology& topology,
                                     const std::set<CoreId>& unavailable) {
  auto usable = [&](const CoreInfo& c) { return topology.eligible(c.id) && !unavailable.contains(c.id); };

  std::vector<const SocketInfo*> sockets;
  for (const auto& s : topology.sockets) sockets.push_back(&s);
  std::sort(sockets.begin(), sockets.end(), [](auto* a, auto* b) { return a->id < b->id; });

  std::vector<CoreId> order;
  switch (strategy) {
    case PlacementStrategy::Sequential: {
      for (const auto* s : sockets) {
        for (const auto& c : s->cores) {
          if (usable(c)) order.push_back(c.id);
        }
      }
      std::sort(order.begin(), order.end());
      break;
    }
    case PlacementStrategy::SameSocket:
    case PlacementStrategy::Adaptive: {
      const auto home = topology.socket_of(topology.master_core);
      std::stable_partition(sockets.begin(), sockets.end(), [&](auto* s) { return home && s->id == *home; });
      for (const auto* s : sockets) {
        std::vector<CoreId> ids;
        for (const auto& c : s->cores) {
          if (usable(c)) ids.push_back(c.id);
        }
        std::sort(ids.begin(), ids.end());
        order.insert(order.end(), ids.begin(), ids.end());
      }
      break;
    }
    case PlacementStrategy::CrossSocket: {
      std::vector<std::vector<CoreId>> per_socket;
      for (const auto* s : sockets) {
        std::vector<CoreId> ids;
        for (const auto& c : s->cores) {
          if (usable(c)) ids.push_back(c.id);
        }
        std::sort(ids.begin(), ids.end());
        per_socket.push_back(std::move(ids));
      }
      for (std::size_t round = 0;; ++round) {
        bool any = false;
        for (const auto& ids : per_socket) {
          if (round < ids.size()) {
            order.push_back(ids[round]);
            any = true;
          }
        }
        if (!any) break;
      }
      break;
    }
  }
  return order;
}

Placement place(PlacementStrategy strategy, std::span<const ReplicaId> replicas, const Topology& topology,
                const std::set<CoreId>& unavailable) {
  const auto order = preference_order(strategy, topology, unavailable);
  if (replicas.size() > order.size()) {
    throw InsufficientCores(std::to_string(replicas.size()) + " replicas but only " + std::to_string(order.size()) +
                            " eligible cores");
  }
  Placement p;
  p.strategy = strategy;
  for (std::size_t i = 0; i < replicas.size(); ++i) p.cores[replicas[i]] = order[i];
  return p;
}

namespace {

// round(accesses * (w - capacity) / w) in exact integer arithmetic
std::uint64_t contention_misses(std::uint64_t accesses, std::uint64_t w, std::uint64_t capacity) {
  if (w <= capacity) return 0;
  const unsigned __int128 num = static_cast<unsigned __int128>(accesses) * (w - capacity);
  return static_cast<std::uint64_t>((2 * num + w) / (2 * static_cast<unsigned __int128>(w)));
}

}  // namespace

SegmentCost segment_cost(std::span<const ReplicaSegment> segments, const Topology& topology, const CostParams& params) {
  std::map<std::uint32_t, std::uint64_t> resident;  // socket -> bytes
  for (const auto& seg : segments) {
    if (seg.stalled_cycles) continue;
    resident[topology.socket_of(seg.core).value_or(0)] += seg.touched_pages * kPageSize;
  }

  SegmentCost cost;
  cost.misses.resize(segments.size(), 0);
  std::uint64_t slowest = 0;
  bool have_slowest = false;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& seg = segments[i];
    std::uint64_t exec = 0;
    std::uint64_t llc = 0;
    if (seg.stalled_cycles) {
      exec = *seg.stalled_cycles;
    } else {
      const auto socket = topology.socket_of(seg.core).value_or(0);
      const SocketInfo* info = topology.socket(socket);
      const std::uint64_t capacity = info != nullptr ? info->llc_capacity_bytes : 0;
      const std::uint64_t w = resident[socket];
      const std::uint64_t contention = contention_misses(seg.accesses, w, capacity);
      cost.misses[i] = seg.touched_pages + contention;
      cost.accesses += seg.accesses;
      cost.contention_misses += contention;
      cost.max_instructions = std::max(cost.max_instructions, seg.instructions);
      exec = seg.instructions * params.cpi;
      llc = cost.misses[i] * params.llc_miss_penalty_cycles;
    }
    if (!have_slowest || exec + llc > slowest) {
      slowest = exec + llc;
      cost.execution = exec;
      cost.llc_miss = llc;
      have_slowest = true;
    }
  }
  cost.wall_cycles = cost.execution + cost.llc_miss;
  return cost;
}

std::uint64_t ipi_cycles(CoreId a, CoreId b, const Topology& topology, const CostParams& params) {
  return topology.socket_of(a) == topology.socket_of(b) ? params.ipi_intra_cycles : params.ipi_inter_cycles;
}

std::uint64_t notification_cost(CoreId replica_core, NotificationMechanism mechanism, const Topology& topology,
                                const CostParams& params) {
  switch (mechanism) {
    case NotificationMechanism::SyncMessage:
      return 2 * ipi_cycles(replica_core, topology.master_core, topology, params) + params.state_copy_cost_cycles;
    case NotificationMechanism::Migration: return 2 * params.migration_cost_cycles;
    case NotificationMechanism::SharedPolling: return params.poll_check_cost_cycles + params.state_copy_cost_cycles;
  }
  return 0;
}

EventCost event_cost(std::span<const CoreId> replica_cores, NotificationMechanism mechanism, bool shared_channel,
                     const Topology& topology, const CostParams& params) {
  if (mechanism == NotificationMechanism::SharedPolling && !shared_channel) {
    throw ConfigError("shared_polling requires a shared channel between ResCore and NonResCore");
  }
  EventCost cost;
  for (CoreId core : replica_cores) cost.notification += notification_cost(core, mechanism, topology, params);
  cost.compare = replica_cores.size() * params.compare_cost_per_replica;
  cost.proxy = params.proxy_base_cost;
  return cost;
}

std::uint64_t shared_llc_contention(std::span<const ReplicaSegment> segments, std::uint64_t llc_capacity_bytes) {
  std::uint64_t w = 0;
  for (const auto& seg : segments) {
    if (!seg.stalled_cycles) w += seg.touched_pages * kPageSize;
  }
  std::uint64_t misses = 0;
  for (const auto& seg : segments) {
    if (!seg.stalled_cycles) misses += contention_misses(seg.accesses, w, llc_capacity_bytes);
  }
  return misses;
}

AdaptDecision adapt_placement(const WindowObservation& window, const Placement& current, double threshold,
                              bool switched_last_window, const Topology& topology,
                              const std::set<CoreId>& unavailable) {
  AdaptDecision decision;
  decision.placement = current;
  const PlacementStrategy target =
      window.miss_fraction() > threshold ? PlacementStrategy::CrossSocket : PlacementStrategy::SameSocket;
  const PlacementStrategy layout =
      current.strategy == PlacementStrategy::Adaptive ? PlacementStrategy::SameSocket : current.strategy;
  if (target == layout || switched_last_window) return decision;

  std::vector<ReplicaId> ids;
  for (const auto& [id, core] : current.cores) ids.push_back(id);
  decision.placement = place(target, ids, topology, unavailable);
  decision.switched = true;
  for (const auto& [id, core] : current.cores) {
    if (decision.placement.cores.at(id) != core) ++decision.moved;
  }
  return decision;
}

}  // namespace rmt
