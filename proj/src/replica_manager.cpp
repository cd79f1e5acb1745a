#include "rmt/replica_manager.hpp"

#include <algorithm>
#include <cstring>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

namespace rmt {

std::string_view to_string(ReplicaStatus status) {
  switch (status) {
    case ReplicaStatus::Running: return "running";
    case ReplicaStatus::AtEvent: return "at_event";
    case ReplicaStatus::Sleeping: return "sleeping";
    case ReplicaStatus::Faulted: return "faulted";
    case ReplicaStatus::Retired: return "retired";
  }
  return "?";
}

std::size_t FreeQueue::drain() {
  std::size_t freed = 0;
  while (freed < budget_ && !pending_.empty()) {
    pending_.pop_front();
    ++freed;
  }
  return freed;
}

std::uint64_t FreeQueue::pending_bytes() const {
  std::uint64_t n = 0;
  for (const auto& b : pending_) n += b->bytes.size();
  return n;
}

BackingRef ReplicaManager::new_backing(std::uint32_t pages) {
  auto backing = std::make_shared<BackingObject>();
  backing->id = next_backing_++;
  backing->bytes.assign(static_cast<std::size_t>(pages) * kPageSize, 0);
  return backing;
}

std::vector<ReplicaId> ReplicaManager::create_replicas(const Program& program, std::size_t n) {
  std::vector<ReplicaId> ids;
  for (std::size_t i = 0; i < n; ++i) {
    Replica& r = replicas_.emplace_back();
    r.id = static_cast<ReplicaId>(replicas_.size() - 1);
    r.state.pc = program.entry;
    for (const auto& init : program.initial_data) {
      MemoryRegion region;
      region.id = next_region_id();
      region.first_page = init.page;
      region.pages = 1;
      region.writable = init.writable;
      region.backing = new_backing(1);
      std::copy(init.bytes.begin(), init.bytes.end(), region.backing->bytes.begin());
      region.backing->refcount = 1;
      r.space.insert(std::move(region));
    }
    ids.push_back(r.id);
  }
  return ids;
}

Replica& ReplicaManager::spawn_sleeping(const Replica& like) {
  Replica& r = replicas_.emplace_back();
  r.id = static_cast<ReplicaId>(replicas_.size() - 1);
  r.status = ReplicaStatus::Sleeping;
  for (const auto& [page, region] : like.space.regions()) {
    r.skeleton.push_back({region.first_page, region.pages, region.writable});
  }
  return r;
}

Replica& ReplicaManager::replica(ReplicaId id) {
  if (id >= replicas_.size()) throw std::out_of_range("no replica " + std::to_string(id));
  return replicas_[id];
}

const Replica& ReplicaManager::replica(ReplicaId id) const {
  if (id >= replicas_.size()) throw std::out_of_range("no replica " + std::to_string(id));
  return replicas_[id];
}

MapStatus ReplicaManager::try_service_map(PageIndex first, std::uint32_t pages) {
  const std::uint64_t end = static_cast<std::uint64_t>(first) + pages;
  if (pages == 0 || end > kMaxPages) return MapStatus::Exhausted;
  for (const auto& r : replicas_) {
    if (r.active() && r.space.overlaps(first, pages)) return MapStatus::Overlap;
  }
  for (auto& r : replicas_) {
    if (r.active()) {
      MemoryRegion region;
      region.id = next_region_id();
      region.first_page = first;
      region.pages = pages;
      region.writable = true;
      region.backing = new_backing(pages);
      region.backing->refcount = 1;
      r.space.insert(std::move(region));
    } else if (r.status == ReplicaStatus::Sleeping) {
      r.skeleton.push_back({first, pages, true});
    }
  }
  return MapStatus::Ok;
}

void ReplicaManager::service_map(PageIndex first, std::uint32_t pages) {
  switch (try_service_map(first, pages)) {
    case MapStatus::Ok: return;
    case MapStatus::Overlap:
      throw OverlapError("map of page " + std::to_string(first) + " overlaps an existing region");
    case MapStatus::Exhausted:
      throw AddressSpaceExhausted("map of " + std::to_string(pages) + " pages at " + std::to_string(first) +
                                  " exceeds the address space");
  }
}

void ReplicaManager::clear_cow_of_last_holder(const BackingObject* backing) {
  for (auto& r : replicas_) {
    for (auto& [page, region] : r.space.regions()) {
      if (region.backing.get() == backing) region.cow = false;
    }
  }
}

void ReplicaManager::unref(const BackingRef& backing) {
  if (backing->refcount == 0) throw std::logic_error("backing refcount underflow");
  --backing->refcount;
  if (backing->refcount == 0) {
    queue_.push(backing);
  } else if (backing->refcount == 1) {
    clear_cow_of_last_holder(backing.get());
  }
}

void ReplicaManager::cow_attach(Replica& waking, Replica& source) {
  if (waking.space.regions().size() != 0) throw std::logic_error("cow_attach into a replica that still has memory");
  waking.state = source.state;
  waking.skeleton.clear();
  for (auto& [page, region] : source.space.regions()) {
    region.cow = true;
    ++region.backing->refcount;
    MemoryRegion mirror;
    mirror.id = next_region_id();
    mirror.first_page = region.first_page;
    mirror.pages = region.pages;
    mirror.writable = region.writable;
    mirror.backing = region.backing;
    mirror.cow = true;
    waking.space.insert(std::move(mirror));
  }
}

void ReplicaManager::privatize_on_write(Replica& replica, PageIndex page) {
  MemoryRegion* region = replica.space.find(page);
  if (region == nullptr || !region->cow) throw std::logic_error("privatize_on_write on a non-COW page");
  BackingRef old = region->backing;
  BackingRef fresh = new_backing(region->pages);
  fresh->bytes = old->bytes;
  fresh->refcount = 1;
  region->backing = std::move(fresh);
  region->cow = false;
  ++privatizations_;
  privatized_pages_ += region->pages;
  unref(old);
}

void ReplicaManager::release_replica_memory(Replica& replica) {
  replica.skeleton.clear();
  for (auto& region : replica.space.take_all()) {
    replica.skeleton.push_back({region.first_page, region.pages, region.writable});
    unref(region.backing);
  }
}

void ReplicaManager::retire(Replica& replica) {
  for (auto& region : replica.space.take_all()) unref(region.backing);
  replica.skeleton.clear();
  replica.status = ReplicaStatus::Retired;
  replica.core.reset();
}

void ReplicaManager::copy_state(const Replica& src, Replica& dst) {
  if (&src == &dst) return;
  for (auto& region : dst.space.take_all()) unref(region.backing);
  dst.skeleton.clear();
  dst.state = src.state;
  for (const auto& [page, region] : src.space.regions()) {
    MemoryRegion copy;
    copy.id = next_region_id();
    copy.first_page = region.first_page;
    copy.pages = region.pages;
    copy.writable = region.writable;
    copy.backing = new_backing(region.pages);
    copy.backing->bytes = region.backing->bytes;
    copy.backing->refcount = 1;
    dst.space.insert(std::move(copy));
  }
}

bool ReplicaManager::write_memory(Replica& replica, std::uint64_t addr, std::span<const std::uint8_t> bytes) {
  if (!replica.space.range_mapped(addr, bytes.size(), true)) return false;
  std::size_t done = 0;
  while (done < bytes.size()) {
    const std::uint64_t a = addr + done;
    const auto page = static_cast<PageIndex>(a / kPageSize);
    MemoryRegion* region = replica.space.find(page);
    if (region->cow) {
      privatize_on_write(replica, page);
      region = replica.space.find(page);
    }
    const std::uint64_t offset = a % kPageSize;
    const std::size_t chunk = std::min<std::size_t>(bytes.size() - done, kPageSize - offset);
    std::memcpy(region->page_data(page) + offset, bytes.data() + done, chunk);
    done += chunk;
  }
  return true;
}

std::uint64_t ReplicaManager::total_backing_bytes() const {
  std::set<const BackingObject*> seen;
  std::uint64_t total = 0;
  for (const auto& r : replicas_) {
    for (const auto& [page, region] : r.space.regions()) {
      if (seen.insert(region.backing.get()).second) total += region.backing->bytes.size();
    }
  }
  return total;
}

std::size_t ReplicaManager::backing_copies(PageIndex page) const {
  std::set<const BackingObject*> seen;
  for (const auto& r : replicas_) {
    if (!r.active()) continue;
    if (const MemoryRegion* region = r.space.find(page)) seen.insert(region->backing.get());
  }
  return seen.size();
}

void ReplicaManager::check_invariants() const {
  std::map<const BackingObject*, std::uint32_t> refs;
  for (const auto& r : replicas_) {
    PageIndex prev_end = 0;
    for (const auto& [page, region] : r.space.regions()) {
      if (region.first_page < prev_end) throw std::logic_error("overlapping regions in replica " + std::to_string(r.id));
      prev_end = region.end_page();
      if (region.backing->bytes.size() != static_cast<std::size_t>(region.pages) * kPageSize) {
        throw std::logic_error("backing size does not match region size");
      }
      ++refs[region.backing.get()];
    }
  }
  for (const auto& [backing, count] : refs) {
    if (backing->refcount != count) {
      throw std::logic_error("backing " + std::to_string(backing->id) + " refcount " +
                             std::to_string(backing->refcount) + " but " + std::to_string(count) + " regions");
    }
  }
  for (const auto& r : replicas_) {
    for (const auto& [page, region] : r.space.regions()) {
      if (region.cow && region.backing->refcount < 2) {
        throw std::logic_error("COW region over an unshared backing in replica " + std::to_string(r.id));
      }
    }
  }
  for (const auto& b : queue_.pending()) {
    if (b->refcount != 0) throw std::logic_error("queued backing still referenced");
  }
}

}  // namespace rmt
