#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rmt/master.hpp"

namespace rmt::test {

/// Independent FNV-1a/64 used to check the simulator's digest.
std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a_words(std::span<const std::uint64_t> words, std::uint64_t h = 0xcbf29ce484222325ULL);

/// Oracle digest: regs, pc, then every mapped page in ascending order.
std::uint64_t oracle_digest(const MachineState& state, const AddressSpace& space);

std::string workload_path(const std::string& name);
Program workload(const std::string& name);

/// Random terminating program with reads, writes, maps, loads and stores.
std::string random_program(std::uint64_t seed);

ExternalWorld world_with(const std::vector<std::string>& input = {});

PlatformConfig default_platform();

}  // namespace rmt::test
