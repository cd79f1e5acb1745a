#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rmt/address_space.hpp"
#include "rmt/common.hpp"

namespace rmt {

enum class Opcode : std::uint8_t { Movi, Mov, Add, Sub, Mul, Xor, And, Ld, St, Jnz, Jmp, Sys, Halt };

/// Operand layout per opcode:
///   MOVI a=dst imm=value        MOV/ALU a=dst b=src
///   LD   a=dst b=base imm=off   ST      a=base b=src imm=off
///   JNZ  a=cond imm=target      JMP     imm=target
///   SYS  imm=number
struct Instruction {
  Opcode op = Opcode::Halt;
  std::uint8_t a = 0;
  std::uint8_t b = 0;
  std::uint64_t imm = 0;

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

enum class Syscall : std::uint8_t { Exit = 0, Write = 1, Read = 2, HintRaise = 3, HintLower = 4, Map = 5 };
inline constexpr std::uint64_t kSyscallCount = 6;

struct InitialPage {
  PageIndex page = 0;
  std::vector<std::uint8_t> bytes;  // at most one page, rest zero-filled
  bool writable = true;
};

struct Program {
  std::vector<Instruction> code;
  std::uint64_t entry = 0;
  std::vector<InitialPage> initial_data;
  std::string name;
  std::optional<std::uint32_t> working_set_pages;
};

/// Throws ParseError(line, message).
Program assemble(std::string_view source);
/// Reads and assembles a `.rvm` file. Throws ConfigError if unreadable.
Program load_program(const std::filesystem::path& path);

struct AccessStats {
  std::uint64_t instructions = 0;
  std::uint64_t accesses = 0;
  std::bitset<kMaxPages> touched;
  std::bitset<kMaxPages> dirty;

  std::uint64_t touched_pages() const { return touched.count(); }
  std::uint64_t dirty_pages() const { return dirty.count(); }

  friend bool operator==(const AccessStats&, const AccessStats&) = default;
};

struct MachineState {
  std::array<std::uint64_t, kRegisterCount> regs{};
  std::uint64_t pc = 0;
  std::uint64_t instr_count = 0;
  AccessStats access_stats;  // reset by the caller at each segment start

  friend bool operator==(const MachineState&, const MachineState&) = default;
};

struct Digest {
  std::uint64_t value = 0;
  friend bool operator==(Digest, Digest) = default;
  friend auto operator<=>(Digest, Digest) = default;
};

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

/// FNV-1a/64 over r0..r7 and pc (8 little-endian bytes each), then the bytes
/// of every mapped page in ascending page order. Bookkeeping counters are
/// not architectural state and are excluded.
Digest digest(const MachineState& state, const AddressSpace& space);

enum class EventKind : std::uint8_t { Exit, Write, Read, HintRaise, HintLower, Map, Halt, Fault };

std::string_view to_string(EventKind kind);

struct ExternalizationEvent {
  EventKind kind = EventKind::Halt;
  std::vector<std::uint8_t> args;
  Digest digest;

  friend bool operator==(const ExternalizationEvent&, const ExternalizationEvent&) = default;
  friend auto operator<=>(const ExternalizationEvent&, const ExternalizationEvent&) = default;

  /// Reads the i-th little-endian u64 argument (Exit/Read/Map/Fault).
  std::uint64_t arg(std::size_t i) const;
};

enum class VmFaultReason : std::uint8_t { None, Unmapped, ReadOnly, Misaligned, InvalidPc, InvalidOpcode, BadSyscall };

std::string_view to_string(VmFaultReason reason);

enum class TrapKind : std::uint8_t {
  Externalization,  // SYS; event filled, pc already past the SYS
  Halt,             // event filled with kind Halt
  VmFault,          // event filled with kind Fault
  CowWrite,         // store hit a COW region; privatize `page` and resume
  InjectionPoint,   // instr_count reached SegmentLimits::stop_at
  Watermark,        // instruction budget exhausted without trapping
};

struct Trap {
  TrapKind kind = TrapKind::Halt;
  std::optional<ExternalizationEvent> event;
  VmFaultReason fault = VmFaultReason::None;
  PageIndex page = 0;
  AccessStats segment_stats;
};

struct SegmentLimits {
  static constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t stop_at = kNever;           // absolute instr_count
  std::uint64_t max_instructions = kNever;  // budget for this call
};

/// Largest Write/Read length accepted by the VM.
inline constexpr std::uint64_t kMaxIoBytes = 1 << 20;

/// Runs until the next trap. Never performs I/O: externalization events are
/// returned for the caller to vote on and execute.
Trap run_segment(const Program& program, MachineState& state, AddressSpace& space, const SegmentLimits& limits = {});

}  // namespace rmt
