#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "rmt/common.hpp"

namespace rmt {

/// Page-aligned byte store that one or more regions map. `refcount` is
/// maintained by the replica manager and counts live regions only; the
/// shared_ptr use count additionally includes the free queue.
struct BackingObject {
  BackingId id = 0;
  std::vector<std::uint8_t> bytes;
  std::uint32_t refcount = 0;

  std::uint32_t pages() const { return static_cast<std::uint32_t>(bytes.size() / kPageSize); }
};

using BackingRef = std::shared_ptr<BackingObject>;

struct MemoryRegion {
  RegionId id = 0;
  PageIndex first_page = 0;
  std::uint32_t pages = 0;
  bool writable = true;
  BackingRef backing;
  bool cow = false;

  PageIndex end_page() const { return first_page + pages; }
  bool contains(PageIndex page) const { return page >= first_page && page < end_page(); }

  std::uint8_t* page_data(PageIndex page) { return backing->bytes.data() + (page - first_page) * kPageSize; }
  const std::uint8_t* page_data(PageIndex page) const {
    return backing->bytes.data() + (page - first_page) * kPageSize;
  }
};

/// A replica's view of memory: non-overlapping regions keyed by first page.
/// Move-only, since copying would duplicate backing references behind the
/// manager's back.
class AddressSpace {
 public:
  AddressSpace() = default;
  AddressSpace(const AddressSpace&) = delete;
  AddressSpace& operator=(const AddressSpace&) = delete;
  AddressSpace(AddressSpace&&) noexcept = default;
  AddressSpace& operator=(AddressSpace&&) noexcept = default;

  MemoryRegion* find(PageIndex page);
  const MemoryRegion* find(PageIndex page) const;

  bool overlaps(PageIndex first, std::uint32_t pages) const;

  /// Throws AddressSpaceExhausted for ranges past the 4,096-page limit or of
  /// zero length, OverlapError when the range intersects an existing region.
  MemoryRegion& insert(MemoryRegion region);

  /// Removes and returns every region in ascending page order.
  std::vector<MemoryRegion> take_all();

  const std::map<PageIndex, MemoryRegion>& regions() const { return regions_; }
  std::map<PageIndex, MemoryRegion>& regions() { return regions_; }

  std::uint64_t mapped_pages() const;
  bool empty() const { return regions_.empty(); }

  /// Copies [addr, addr+out.size()) into out; false if any byte is unmapped.
  bool read(std::uint64_t addr, std::span<std::uint8_t> out) const;

  /// True when every page of the range is mapped (and writable if asked).
  bool range_mapped(std::uint64_t addr, std::uint64_t len, bool need_writable) const;

 private:
  std::map<PageIndex, MemoryRegion> regions_;
};

}  // namespace rmt
