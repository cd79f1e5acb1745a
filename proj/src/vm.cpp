#include <bit>
#include <cstring>

#include "rmt/vm.hpp"

namespace rmt {

static_assert(std::endian::native == std::endian::little, "memory model assumes a little-endian host");

namespace {

inline std::uint64_t fnv_bytes(std::uint64_t h, const std::uint8_t* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= kFnvPrime;
  }
  return h;
}

inline std::uint64_t fnv_word(std::uint64_t h, std::uint64_t word) {
  for (int i = 0; i < 8; ++i) {
    h ^= (word >> (8 * i)) & 0xff;
    h *= kFnvPrime;
  }
  return h;
}

void append_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

// Region lookup with a one-entry cache; regions never change during a call.
class RegionCursor {
 public:
  explicit RegionCursor(AddressSpace& space) : space_(space) {}

  MemoryRegion* at(std::uint64_t page) {
    if (cached_ != nullptr && cached_->contains(static_cast<PageIndex>(page))) return cached_;
    if (page >= kMaxPages) return nullptr;
    cached_ = space_.find(static_cast<PageIndex>(page));
    return cached_;
  }

 private:
  AddressSpace& space_;
  MemoryRegion* cached_ = nullptr;
};

}  // namespace

Digest digest(const MachineState& state, const AddressSpace& space) {
  std::uint64_t h = kFnvOffsetBasis;
  for (std::uint64_t r : state.regs) h = fnv_word(h, r);
  h = fnv_word(h, state.pc);
  for (const auto& [first, region] : space.regions()) {
    h = fnv_bytes(h, region.backing->bytes.data(), static_cast<std::size_t>(region.pages) * kPageSize);
  }
  return Digest{h};
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Exit: return "exit";
    case EventKind::Write: return "write";
    case EventKind::Read: return "read";
    case EventKind::HintRaise: return "hint_raise";
    case EventKind::HintLower: return "hint_lower";
    case EventKind::Map: return "map";
    case EventKind::Halt: return "halt";
    case EventKind::Fault: return "fault";
  }
  return "?";
}

std::string_view to_string(VmFaultReason reason) {
  switch (reason) {
    case VmFaultReason::None: return "none";
    case VmFaultReason::Unmapped: return "unmapped";
    case VmFaultReason::ReadOnly: return "read_only";
    case VmFaultReason::Misaligned: return "misaligned";
    case VmFaultReason::InvalidPc: return "invalid_pc";
    case VmFaultReason::InvalidOpcode: return "invalid_opcode";
    case VmFaultReason::BadSyscall: return "bad_syscall";
  }
  return "?";
}

std::uint64_t ExternalizationEvent::arg(std::size_t i) const {
  std::uint64_t v = 0;
  if ((i + 1) * 8 <= args.size()) std::memcpy(&v, args.data() + i * 8, 8);
  return v;
}

Trap run_segment(const Program& program, MachineState& state, AddressSpace& space, const SegmentLimits& limits) {
  RegionCursor cursor(space);
  auto& regs = state.regs;
  auto& stats = state.access_stats;
  std::uint64_t executed = 0;

  auto finish = [&](TrapKind kind) {
    Trap trap;
    trap.kind = kind;
    trap.segment_stats = stats;
    return trap;
  };
  auto with_event = [&](TrapKind kind, EventKind ek, std::vector<std::uint8_t> args) {
    Trap trap = finish(kind);
    trap.event = ExternalizationEvent{ek, std::move(args), digest(state, space)};
    return trap;
  };
  auto vm_fault = [&](VmFaultReason reason) {
    std::vector<std::uint8_t> args;
    append_u64(args, static_cast<std::uint64_t>(reason));
    append_u64(args, state.pc);
    Trap trap = with_event(TrapKind::VmFault, EventKind::Fault, std::move(args));
    trap.fault = reason;
    return trap;
  };
  auto retire = [&] {
    ++state.instr_count;
    ++stats.instructions;
    ++executed;
  };

  for (;;) {
    if (state.instr_count == limits.stop_at) return finish(TrapKind::InjectionPoint);
    if (executed >= limits.max_instructions) return finish(TrapKind::Watermark);
    if (state.pc >= program.code.size()) return vm_fault(VmFaultReason::InvalidPc);

    const Instruction& in = program.code[state.pc];
    switch (in.op) {
      case Opcode::Movi: regs[in.a] = in.imm; break;
      case Opcode::Mov: regs[in.a] = regs[in.b]; break;
      case Opcode::Add: regs[in.a] += regs[in.b]; break;
      case Opcode::Sub: regs[in.a] -= regs[in.b]; break;
      case Opcode::Mul: regs[in.a] *= regs[in.b]; break;
      case Opcode::Xor: regs[in.a] ^= regs[in.b]; break;
      case Opcode::And: regs[in.a] &= regs[in.b]; break;
      case Opcode::Ld:
      case Opcode::St: {
        const bool store = in.op == Opcode::St;
        const std::uint64_t addr = regs[store ? in.a : in.b] + in.imm;
        if (addr % 8 != 0) return vm_fault(VmFaultReason::Misaligned);
        const std::uint64_t page = addr / kPageSize;
        MemoryRegion* region = cursor.at(page);
        if (region == nullptr) return vm_fault(VmFaultReason::Unmapped);
        std::uint8_t* cell = region->page_data(static_cast<PageIndex>(page)) + addr % kPageSize;
        if (store) {
          if (!region->writable) return vm_fault(VmFaultReason::ReadOnly);
          if (region->cow) {
            Trap trap = finish(TrapKind::CowWrite);
            trap.page = static_cast<PageIndex>(page);
            return trap;
          }
          std::memcpy(cell, &regs[in.b], 8);
          stats.dirty.set(page);
        } else {
          std::memcpy(&regs[in.a], cell, 8);
        }
        ++stats.accesses;
        stats.touched.set(page);
        break;
      }
      case Opcode::Jnz:
        if (regs[in.a] != 0) {
          state.pc = in.imm;
          retire();
          continue;
        }
        break;
      case Opcode::Jmp:
        state.pc = in.imm;
        retire();
        continue;
      case Opcode::Halt:
        ++state.pc;
        retire();
        return with_event(TrapKind::Halt, EventKind::Halt, {});
      case Opcode::Sys: {
        std::vector<std::uint8_t> args;
        EventKind kind{};
        const std::uint64_t addr = regs[0];
        const std::uint64_t len = regs[1];
        switch (static_cast<Syscall>(in.imm)) {
          case Syscall::Exit:
            kind = EventKind::Exit;
            append_u64(args, regs[0]);
            break;
          case Syscall::Write: {
            kind = EventKind::Write;
            if (len > kMaxIoBytes) return vm_fault(VmFaultReason::BadSyscall);
            args.resize(len);
            if (!space.read(addr, args)) return vm_fault(VmFaultReason::Unmapped);
            break;
          }
          case Syscall::Read:
            kind = EventKind::Read;
            if (len > kMaxIoBytes) return vm_fault(VmFaultReason::BadSyscall);
            if (!space.range_mapped(addr, len, true)) return vm_fault(VmFaultReason::Unmapped);
            append_u64(args, addr);
            append_u64(args, len);
            break;
          case Syscall::HintRaise: kind = EventKind::HintRaise; break;
          case Syscall::HintLower: kind = EventKind::HintLower; break;
          case Syscall::Map:
            kind = EventKind::Map;
            append_u64(args, regs[0]);
            append_u64(args, regs[1]);
            break;
          default: return vm_fault(VmFaultReason::InvalidOpcode);
        }
        ++state.pc;
        retire();
        return with_event(TrapKind::Externalization, kind, std::move(args));
      }
      default: return vm_fault(VmFaultReason::InvalidOpcode);
    }
    ++state.pc;
    retire();
  }
}

}  // namespace rmt
