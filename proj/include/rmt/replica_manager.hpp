#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "rmt/address_space.hpp"
#include "rmt/vm.hpp"

namespace rmt {

enum class ReplicaStatus : std::uint8_t { Running, AtEvent, Sleeping, Faulted, Retired };

std::string_view to_string(ReplicaStatus status);

/// Range and permission of a region, kept by sleeping replicas so wake-up
/// can rebuild their address space.
struct RegionShape {
  PageIndex first_page = 0;
  std::uint32_t pages = 0;
  bool writable = true;

  friend bool operator==(const RegionShape&, const RegionShape&) = default;
};

struct Replica {
  ReplicaId id = 0;
  MachineState state;
  AddressSpace space;
  ReplicaStatus status = ReplicaStatus::Running;
  std::optional<CoreId> core;
  std::vector<RegionShape> skeleton;

  bool active() const { return status == ReplicaStatus::Running || status == ReplicaStatus::AtEvent; }
};

/// Backings whose last region went away. Drained a few per event to model
/// release by a background worker.
class FreeQueue {
 public:
  explicit FreeQueue(std::size_t budget = 4) : budget_(budget) {}

  void push(BackingRef backing) { pending_.push_back(std::move(backing)); }
  /// Frees up to `budget` backings; returns how many were freed.
  std::size_t drain();

  std::size_t size() const { return pending_.size(); }
  bool empty() const { return pending_.empty(); }
  std::size_t budget() const { return budget_; }
  std::uint64_t pending_bytes() const;
  const std::deque<BackingRef>& pending() const { return pending_; }

 private:
  std::deque<BackingRef> pending_;
  std::size_t budget_;
};

/// Status code the master returns in r0 for SYS 5.
enum class MapStatus : std::uint64_t { Ok = 0, Overlap = 1, Exhausted = 2 };

/// Master-owned memory management for a replica group. Every mutation keeps
/// BackingObject::refcount equal to the number of regions referencing it.
class ReplicaManager {
 public:
  explicit ReplicaManager(std::size_t free_budget = 4) : queue_(free_budget) {}

  ReplicaManager(const ReplicaManager&) = delete;
  ReplicaManager& operator=(const ReplicaManager&) = delete;

  /// Creates n replicas with fully replicated (private) initial memory and
  /// returns their ids.
  std::vector<ReplicaId> create_replicas(const Program& program, std::size_t n);

  /// Adds a Sleeping replica with no memory, for scale-up past the initial
  /// group. Its skeleton mirrors `like`.
  Replica& spawn_sleeping(const Replica& like);

  /// Maps [first, first+pages) into every active replica with private
  /// zero-filled backings; sleeping replicas record the shape. Throws
  /// OverlapError / AddressSpaceExhausted without modifying anything.
  void service_map(PageIndex first, std::uint32_t pages);

  /// Non-throwing variant used to answer SYS 5.
  MapStatus try_service_map(PageIndex first, std::uint32_t pages);

  /// Wakes `waking` by sharing every backing of `source` copy-on-write.
  /// Both sides' regions are marked COW.
  void cow_attach(Replica& waking, Replica& source);

  /// Gives `replica` a private copy of the COW region containing `page`.
  void privatize_on_write(Replica& replica, PageIndex page);

  /// Drops a sleeping replica's memory; exclusively owned backings go to the
  /// free queue, the region layout survives as a skeleton.
  void release_replica_memory(Replica& replica);

  /// Retired replicas lose memory and skeleton.
  void retire(Replica& replica);

  /// Eager whole-state copy: registers plus private byte copies of every
  /// region of `src`. Any previous memory of `dst` is released.
  void copy_state(const Replica& src, Replica& dst);

  /// Master-side write into replica memory (Read results). Privatizes COW
  /// pages first. False if any byte is unmapped.
  bool write_memory(Replica& replica, std::uint64_t addr, std::span<const std::uint8_t> bytes);

  std::size_t drain_free_queue() { return queue_.drain(); }
  FreeQueue& free_queue() { return queue_; }
  const FreeQueue& free_queue() const { return queue_; }

  std::deque<Replica>& replicas() { return replicas_; }
  const std::deque<Replica>& replicas() const { return replicas_; }
  Replica& replica(ReplicaId id);
  const Replica& replica(ReplicaId id) const;

  /// Distinct backings referenced by any region, summed.
  std::uint64_t total_backing_bytes() const;
  /// Number of distinct backings among active replicas covering `page`.
  std::size_t backing_copies(PageIndex page) const;

  std::uint64_t privatizations() const { return privatizations_; }
  std::uint64_t privatized_pages() const { return privatized_pages_; }

  /// Throws std::logic_error on refcount, overlap or COW invariant breaks.
  void check_invariants() const;

 private:
  BackingRef new_backing(std::uint32_t pages);
  RegionId next_region_id() { return next_region_++; }
  void unref(const BackingRef& backing);
  void clear_cow_of_last_holder(const BackingObject* backing);

  std::deque<Replica> replicas_;
  FreeQueue queue_;
  BackingId next_backing_ = 1;
  RegionId next_region_ = 1;
  std::uint64_t privatizations_ = 0;
  std::uint64_t privatized_pages_ = 0;
};

}  // namespace rmt
