#include "rmt/address_space.hpp"

#include <algorithm>
#include <cstring>
#include <string>

namespace rmt {

MemoryRegion* AddressSpace::find(PageIndex page) {
  auto it = regions_.upper_bound(page);
  if (it == regions_.begin()) return nullptr;
  --it;
  return it->second.contains(page) ? &it->second : nullptr;
}

const MemoryRegion* AddressSpace::find(PageIndex page) const {
  auto it = regions_.upper_bound(page);
  if (it == regions_.begin()) return nullptr;
  --it;
  return it->second.contains(page) ? &it->second : nullptr;
}

bool AddressSpace::overlaps(PageIndex first, std::uint32_t pages) const {
  const std::uint64_t end = static_cast<std::uint64_t>(first) + pages;
  auto it = regions_.lower_bound(first);
  if (it != regions_.end() && it->first < end) return true;
  if (it != regions_.begin()) {
    --it;
    if (it->second.end_page() > first) return true;
  }
  return false;
}

MemoryRegion& AddressSpace::insert(MemoryRegion region) {
  const std::uint64_t end = static_cast<std::uint64_t>(region.first_page) + region.pages;
  if (region.pages == 0 || end > kMaxPages) {
    throw AddressSpaceExhausted("region [" + std::to_string(region.first_page) + ", " + std::to_string(end) +
                                ") outside the " + std::to_string(kMaxPages) + "-page address space");
  }
  if (overlaps(region.first_page, region.pages)) {
    throw OverlapError("region at page " + std::to_string(region.first_page) + " (" +
                       std::to_string(region.pages) + " pages) overlaps an existing mapping");
  }
  const PageIndex key = region.first_page;
  return regions_.emplace(key, std::move(region)).first->second;
}

std::vector<MemoryRegion> AddressSpace::take_all() {
  std::vector<MemoryRegion> out;
  out.reserve(regions_.size());
  for (auto& [page, region] : regions_) out.push_back(std::move(region));
  regions_.clear();
  return out;
}

std::uint64_t AddressSpace::mapped_pages() const {
  std::uint64_t n = 0;
  for (const auto& [page, region] : regions_) n += region.pages;
  return n;
}

bool AddressSpace::read(std::uint64_t addr, std::span<std::uint8_t> out) const {
  std::size_t done = 0;
  while (done < out.size()) {
    const std::uint64_t a = addr + done;
    if (a < addr) return false;  // wrapped
    const std::uint64_t page = a / kPageSize;
    if (page >= kMaxPages) return false;
    const MemoryRegion* region = find(static_cast<PageIndex>(page));
    if (region == nullptr) return false;
    const std::uint64_t offset = a % kPageSize;
    const std::size_t chunk = std::min<std::size_t>(out.size() - done, kPageSize - offset);
    std::memcpy(out.data() + done, region->page_data(static_cast<PageIndex>(page)) + offset, chunk);
    done += chunk;
  }
  return true;
}

bool AddressSpace::range_mapped(std::uint64_t addr, std::uint64_t len, bool need_writable) const {
  if (len == 0) return true;
  const std::uint64_t last = addr + len - 1;
  if (last < addr) return false;
  if (last / kPageSize >= kMaxPages) return false;
  for (std::uint64_t page = addr / kPageSize; page <= last / kPageSize; ++page) {
    const MemoryRegion* region = find(static_cast<PageIndex>(page));
    if (region == nullptr) return false;
    if (need_writable && !region->writable) return false;
  }
  return true;
}

}  // namespace rmt
