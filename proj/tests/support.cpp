#include "support.hpp"

#include <random>
#include <sstream>

namespace rmt::test {

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t h) {
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a_words(std::span<const std::uint64_t> words, std::uint64_t h) {
  for (auto w : words) {
    for (int i = 0; i < 8; ++i) {
      h ^= (w >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::uint64_t oracle_digest(const MachineState& state, const AddressSpace& space) {
  std::vector<std::uint64_t> words(state.regs.begin(), state.regs.end());
  words.push_back(state.pc);
  std::uint64_t h = fnv1a_words(words);
  for (const auto& [first, region] : space.regions()) {
    h = fnv1a(region.backing->bytes, h);
  }
  return h;
}

std::string workload_path(const std::string& name) { return std::string(RMT_SOURCE_DIR) + "/workloads/" + name + ".rvm"; }

Program workload(const std::string& name) { return load_program(workload_path(name)); }

std::string random_program(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](std::uint64_t n) { return rng() % n; };
  std::ostringstream src;
  src << ".name random" << seed << "\n.page 1\n.data 2, \"seed " << seed << "\"\n";
  src << "        MOVI r6, " << 2 + pick(6) << "\n";
  src << "outer:\n";
  const int blocks = 3 + static_cast<int>(pick(5));
  for (int b = 0; b < blocks; ++b) {
    switch (pick(6)) {
      case 0:
        src << "        MOVI r0, 0x1000\n        MOVI r1, " << 1 + pick(32) << "\n        SYS 2\n";
        break;
      case 1:
        src << "        MOVI r0, " << 0x1000 + 8 * pick(16) << "\n        MOVI r1, " << 1 + pick(64)
            << "\n        SYS 1\n";
        break;
      case 2:
        src << "        MOVI r0, " << 32 + pick(64) << "\n        MOVI r1, " << 1 + pick(3) << "\n        SYS 5\n";
        break;
      case 3:
        src << "        MOVI r4, " << 1 + pick(200) << "\nloop" << b << ":\n";
        src << "        MOVI r3, " << rng() << "\n        MUL r7, r3\n        ADD r7, r4\n";
        src << "        MOVI r3, 1\n        SUB r4, r3\n        JNZ r4, loop" << b << "\n";
        break;
      case 4:
        src << "        MOVI r2, " << 0x2000 + 8 * pick(512) << "\n        LD r5, [r2+0]\n        XOR r5, r7\n"
            << "        ST [r2+0], r5\n        ADD r7, r5\n";
        break;
      default:
        src << "        MOVI r2, 0x1000\n        ST [r2+" << 8 * pick(8) << "], r7\n        AND r7, r6\n"
            << "        MOVI r3, " << rng() << "\n        XOR r7, r3\n";
        break;
    }
  }
  src << "        MOVI r3, 1\n        SUB r6, r3\n        JNZ r6, outer\n";
  src << (pick(2) == 0 ? "        MOV r0, r7\n        SYS 0\n" : "        HALT\n");
  return src.str();
}

ExternalWorld world_with(const std::vector<std::string>& input) { return ExternalWorld::with_input(input); }

PlatformConfig default_platform() { return PlatformConfig{}; }

}  // namespace rmt::test
