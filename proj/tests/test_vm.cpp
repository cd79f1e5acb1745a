#include <doctest.h>

#include <random>

#include "rmt/replica_manager.hpp"
#include "support.hpp"

using namespace rmt;

namespace {

struct Machine {
  ReplicaManager manager;
  Replica* replica = nullptr;

  explicit Machine(const Program& p) {
    const auto ids = manager.create_replicas(p, 1);
    replica = &manager.replica(ids[0]);
  }
};

}  // namespace

TEST_CASE("assemble encodes a two-instruction program") {
  const Program p = assemble("MOVI r0, 5\nHALT\n");
  REQUIRE(p.code.size() == 2);
  CHECK(p.entry == 0);
  CHECK(p.code[0] == Instruction{Opcode::Movi, 0, 0, 5});
  CHECK(p.code[1].op == Opcode::Halt);
}

TEST_CASE("assemble reports errors with line numbers") {
  auto line_of = [](std::string_view src) {
    try {
      assemble(src);
    } catch (const ParseError& e) {
      return e.line();
    }
    return std::size_t{0};
  };
  CHECK(line_of("JNZ r0, missing") == 1);
  CHECK(line_of("MOVI r0, 1\nFROB r1\n") == 2);
  CHECK(line_of("MOVI r9, 1") == 1);
  CHECK(line_of("SYS 6") == 1);
  CHECK(line_of("MOVI r0, 0x1ffffffffffffffff") == 1);
  CHECK(line_of("LD r0, [r1+4294967296]") == 1);
  CHECK(line_of("a:\na:\nHALT") == 2);
  CHECK(line_of(".page 4096\nHALT") == 1);
  CHECK(line_of(".page 3\n.page 3\nHALT") == 2);
  CHECK_THROWS_AS(assemble("; only a comment\n"), ParseError);
}

TEST_CASE("assembler accepts labels, hex, negatives, data and case-insensitive mnemonics") {
  const Program p = assemble(R"(
.name demo
.wss 3
.data 2, "hi\n\x41"
.rodata 3, "ro"
start:  movi R1, -1
        MOVI r2, 0x10
        ld r3, [r2 + -8]
        ST [r2+8], r3
        JNZ r1, done
        JMP start
done:   HALT)");
  CHECK(p.name == "demo");
  CHECK(p.working_set_pages == 3u);
  REQUIRE(p.initial_data.size() == 2);
  CHECK(p.initial_data[0].bytes == std::vector<std::uint8_t>{'h', 'i', '\n', 'A'});
  CHECK_FALSE(p.initial_data[1].writable);
  CHECK(p.code[0].imm == ~std::uint64_t{0});
  CHECK(p.code[2].imm == static_cast<std::uint64_t>(-8));
  CHECK(p.code[4].imm == 6);
  CHECK(p.code[5].imm == 0);
}

TEST_CASE("bundled syscall_heavy loop: one backward branch, six instructions per iteration") {
  const Program p = test::workload("syscall_heavy");
  std::size_t backward = 0;
  std::size_t body = 0;
  for (std::size_t i = 0; i < p.code.size(); ++i) {
    const auto& ins = p.code[i];
    if ((ins.op == Opcode::Jnz || ins.op == Opcode::Jmp) && ins.imm <= i) {
      ++backward;
      body = i - ins.imm + 1;
    }
  }
  CHECK(backward == 1);
  CHECK(body == 6);

  // Executed instructions between consecutive writes are the loop length.
  Machine m(p);
  std::uint64_t last = 0;
  std::vector<std::uint64_t> gaps;
  for (int k = 0; k < 6; ++k) {
    Trap t = run_segment(p, m.replica->state, m.replica->space);
    REQUIRE(t.kind == TrapKind::Externalization);
    if (t.event->kind == EventKind::Write) gaps.push_back(m.replica->state.instr_count - last);
    last = m.replica->state.instr_count;
  }
  for (std::size_t i = 1; i < gaps.size(); ++i) CHECK(gaps[i] == 6);
}

TEST_CASE("SYS 1 traps with the payload and advances pc") {
  const Program p = assemble(".data 1, \"hello\"\nMOVI r0, 0x1000\nMOVI r1, 5\nSYS 1\nHALT");
  Machine m(p);
  Trap t = run_segment(p, m.replica->state, m.replica->space);
  REQUIRE(t.kind == TrapKind::Externalization);
  CHECK(t.event->kind == EventKind::Write);
  CHECK(t.event->args == std::vector<std::uint8_t>{'h', 'e', 'l', 'l', 'o'});
  CHECK(m.replica->state.pc == 3);
  CHECK(t.event->digest == digest(m.replica->state, m.replica->space));
}

TEST_CASE("HALT after MOVI gives instr_count 2") {
  const Program p = assemble("MOVI r0, 0\nHALT");
  Machine m(p);
  Trap t = run_segment(p, m.replica->state, m.replica->space);
  CHECK(t.kind == TrapKind::Halt);
  CHECK(m.replica->state.instr_count == 2);
  CHECK(t.segment_stats.instructions == 2);
}

TEST_CASE("segment stats: accesses, touched and dirty pages") {
  const Program p = assemble(".page 1\n.page 2\nMOVI r0, 0x1000\nLD r1, [r0+0]\nST [r0+4096], r1\nLD r1, [r0+8]\nHALT");
  Machine m(p);
  Trap t = run_segment(p, m.replica->state, m.replica->space);
  CHECK(t.segment_stats.accesses == 3);
  CHECK(t.segment_stats.touched_pages() == 2);
  CHECK(t.segment_stats.dirty_pages() == 1);
  CHECK(t.segment_stats.dirty[2]);
  CHECK((t.segment_stats.dirty & ~t.segment_stats.touched).none());
}

TEST_CASE("VM faults are returned as Fault events") {
  auto reason = [](std::string_view src) {
    const Program p = assemble(src);
    Machine m(p);
    Trap t = run_segment(p, m.replica->state, m.replica->space);
    REQUIRE(t.kind == TrapKind::VmFault);
    CHECK(t.event->kind == EventKind::Fault);
    return t.fault;
  };
  CHECK(reason("MOVI r0, 0x5000\nLD r1, [r0+0]\nHALT") == VmFaultReason::Unmapped);
  CHECK(reason(".rodata 1, \"x\"\nMOVI r0, 0x1000\nST [r0+0], r0\nHALT") == VmFaultReason::ReadOnly);
  CHECK(reason(".page 1\nMOVI r0, 0x1001\nLD r1, [r0+0]\nHALT") == VmFaultReason::Misaligned);
  CHECK(reason("MOVI r0, 0\nJNZ r0, end\nend: MOVI r1, 1\nJMP end2\nend2: MOVI r0, 1") == VmFaultReason::InvalidPc);
  CHECK(reason("MOVI r0, 0\nMOVI r1, 100\nSYS 1\nHALT") == VmFaultReason::Unmapped);
}

TEST_CASE("watermark and injection points stop a segment") {
  const Program p = assemble("loop: JMP loop");
  Machine m(p);
  SegmentLimits limits;
  limits.max_instructions = 1000;
  CHECK(run_segment(p, m.replica->state, m.replica->space, limits).kind == TrapKind::Watermark);
  CHECK(m.replica->state.instr_count == 1000);
  limits.stop_at = 1500;
  Trap t = run_segment(p, m.replica->state, m.replica->space, limits);
  CHECK(t.kind == TrapKind::InjectionPoint);
  CHECK(m.replica->state.instr_count == 1500);
}

TEST_CASE("digest of the empty state is FNV-1a over nine zero words") {
  MachineState state;
  AddressSpace space;
  const std::uint64_t zeros[9] = {};
  CHECK(digest(state, space).value == test::fnv1a_words(zeros));
  CHECK(digest(state, space).value == 0x3ecb33e15783bec5ULL);  // 72 zero bytes, folded offline
}

TEST_CASE("digest matches the independent oracle on every bundled workload") {
  for (const char* name : {"compute_bound", "syscall_heavy", "cache_bound", "mixed_phase", "checksum"}) {
    const Program p = test::workload(name);
    Machine m(p);
    for (int k = 0; k < 3; ++k) {
      Trap t = run_segment(p, m.replica->state, m.replica->space);
      CHECK(digest(m.replica->state, m.replica->space).value == test::oracle_digest(m.replica->state, m.replica->space));
      if (t.event && t.event->kind == EventKind::Map) {
        m.manager.service_map(static_cast<PageIndex>(t.event->arg(0)), static_cast<std::uint32_t>(t.event->arg(1)));
        CHECK(digest(m.replica->state, m.replica->space).value ==
              test::oracle_digest(m.replica->state, m.replica->space));
      }
    }
  }
}

TEST_CASE("single-bit flips in registers or mapped bytes always change the digest") {
  const Program p = test::workload("checksum");
  Machine m(p);
  run_segment(p, m.replica->state, m.replica->space);
  const Digest base = digest(m.replica->state, m.replica->space);
  std::mt19937_64 rng(2024);
  int changed = 0;
  const int samples = 1200;
  for (int i = 0; i < samples; ++i) {
    if (i % 2 == 0) {
      const auto reg = rng() % kRegisterCount;
      const auto bit = std::uint64_t{1} << (rng() % 64);
      m.replica->state.regs[reg] ^= bit;
      changed += digest(m.replica->state, m.replica->space) != base;
      m.replica->state.regs[reg] ^= bit;
    } else {
      auto& regions = m.replica->space.regions();
      auto it = regions.begin();
      std::advance(it, static_cast<long>(rng() % regions.size()));
      auto& bytes = it->second.backing->bytes;
      const auto at = rng() % bytes.size();
      const auto mask = static_cast<std::uint8_t>(1u << (rng() % 8));
      bytes[at] ^= mask;
      changed += digest(m.replica->state, m.replica->space) != base;
      bytes[at] ^= mask;
    }
  }
  CHECK(changed == samples);
  CHECK(digest(m.replica->state, m.replica->space) == base);
}

TEST_CASE("bookkeeping does not enter the digest") {
  const Program p = test::workload("cache_bound");
  Machine m(p);
  const Digest base = digest(m.replica->state, m.replica->space);
  m.replica->state.instr_count += 12345;
  m.replica->state.access_stats.accesses = 99;
  m.replica->state.access_stats.touched.set(7);
  m.replica->state.access_stats.dirty.set(7);
  CHECK(digest(m.replica->state, m.replica->space) == base);
}

TEST_CASE("two replicas of one program trap identically") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Program p = assemble(test::random_program(seed));
    Machine a(p);
    Machine b(p);
    for (int k = 0; k < 20; ++k) {
      Trap ta = run_segment(p, a.replica->state, a.replica->space);
      Trap tb = run_segment(p, b.replica->state, b.replica->space);
      REQUIRE(ta.kind == tb.kind);
      CHECK(ta.event == tb.event);
      CHECK(a.replica->state == b.replica->state);
      if (ta.kind != TrapKind::Externalization) break;
      if (ta.event->kind == EventKind::Exit) break;
      if (ta.event->kind == EventKind::Map) {
        a.manager.try_service_map(static_cast<PageIndex>(ta.event->arg(0)), static_cast<std::uint32_t>(ta.event->arg(1)));
        b.manager.try_service_map(static_cast<PageIndex>(tb.event->arg(0)), static_cast<std::uint32_t>(tb.event->arg(1)));
      }
    }
  }
}
