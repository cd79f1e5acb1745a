// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails or overruns its time limit.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "rmt/experiment.hpp"
#include "support.hpp"

using namespace rmt;

namespace {

struct Checker {
  std::vector<std::string> failures;
  std::string note;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

struct Criterion {
  int id;
  const char* title;
  double limit_seconds;
  std::function<void(Checker&)> body;
};

Scenario bundled(const std::string& name) {
  return load_scenario(std::filesystem::path(RMT_SOURCE_DIR) / "scenarios" / (name + ".json"));
}

RunReport golden_of(const Program& p, const std::vector<std::string>& input, const PlatformConfig& platform = {}) {
  ExternalWorld w = test::world_with(input);
  return run_native(p, platform, w, ReplicationConfig{}.hang_watermark);
}

RunReport run(const Program& p, const ReplicationConfig& r, const PlatformConfig& platform,
              std::vector<FaultSpec> faults, const std::vector<std::string>& input) {
  ExternalWorld w = test::world_with(input);
  return run_replicated(p, r, platform, std::move(faults), w);
}

std::string histogram(const CampaignResult& c) {
  std::ostringstream s;
  for (auto o : {OutcomeClass::Masked, OutcomeClass::DetectedCorrected, OutcomeClass::DetectedUnrecoverable,
                 OutcomeClass::SDC, OutcomeClass::Hang}) {
    s << to_string(o) << "=" << c.count(o) << " ";
  }
  return s.str();
}

CampaignResult campaign_with(std::size_t replicas) {
  const Scenario s = bundled("campaign_tmr");
  CampaignSetup setup;
  setup.program = &s.workload.program;
  setup.replication = s.replication;
  setup.replication.replicas = replicas;
  setup.platform = s.platform;
  setup.input_script = s.workload.input;
  setup.seed = s.campaign->seed;
  setup.space = s.campaign->space;
  setup.runs = s.campaign->runs;
  setup.jobs = s.campaign->jobs;
  return run_campaign(setup);
}

// Everything observable at each boundary, for the determinism oracle.
struct Snapshot {
  std::uint64_t events = 0;
  std::optional<ExternalizationEvent> canonical;
  std::vector<std::uint64_t> instr_counts;
  std::vector<Digest> digests;
  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

std::pair<std::vector<Snapshot>, RunReport> trace_run(const Program& p) {
  ExternalWorld w = test::world_with({"alpha", "beta-gamma", "d"});
  ReplicationConfig r{3};
  r.hang_watermark = 5'000'000;
  r.event_cap = 10'000;
  LockstepMaster m(p, r, PlatformConfig{}, {}, w);
  std::vector<Snapshot> trace;
  while (m.step()) {
    Snapshot s;
    s.events = m.report().events_handled;
    s.canonical = m.last_vote().canonical;
    for (auto id : m.running()) {
      const Replica& rep = m.replicas().replica(id);
      s.instr_counts.push_back(rep.state.instr_count);
      s.digests.push_back(digest(rep.state, rep.space));
    }
    trace.push_back(std::move(s));
  }
  return {std::move(trace), m.report()};
}

void c1_determinism(Checker& c) {
  std::size_t events = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Program p = assemble(test::random_program(seed * 7919));
    const auto [t1, r1] = trace_run(p);
    const auto [t2, r2] = trace_run(p);
    c.expect(!t1.empty(), "program " + std::to_string(seed) + " handled no events");
    c.expect(t1 == t2, "trap sequence differs for program " + std::to_string(seed));
    c.expect(r1 == r2, "report differs for program " + std::to_string(seed));
    events += r1.events_handled;
  }
  c.note = std::to_string(events) + " events compared";
}

void c2_tmr(Checker& c) {
  const CampaignResult r = campaign_with(3);
  c.expect(r.runs.size() == 1000, "expected 1000 runs");
  c.expect(r.count(OutcomeClass::SDC) == 0, "SDC observed");
  c.expect(r.count(OutcomeClass::DetectedUnrecoverable) == 0, "DetectedUnrecoverable observed");
  c.expect(r.count(OutcomeClass::Masked) + r.count(OutcomeClass::DetectedCorrected) == r.runs.size(),
           "a run is neither Masked nor DetectedCorrected");
  for (const auto& run : r.runs) {
    if (!same_output(run.report, r.golden)) c.expect(false, "run " + std::to_string(run.index) + " output differs");
  }
  c.note = histogram(r);
}

void c3_dmr(Checker& c) {
  const CampaignResult r = campaign_with(2);
  c.expect(r.count(OutcomeClass::SDC) == 0, "SDC observed");
  for (const auto& run : r.runs) {
    const bool diverged = run.report.minority_votes > 0 || run.report.termination != Termination::Exit;
    if (diverged && run.outcome != OutcomeClass::DetectedUnrecoverable) {
      c.expect(false, "run " + std::to_string(run.index) + " diverged but is " + std::string(to_string(run.outcome)));
    }
  }
  c.note = histogram(r);
}

void c4_baseline(Checker& c) {
  const CampaignResult r = campaign_with(1);
  c.expect(r.count(OutcomeClass::SDC) >= 1, "no SDC without replication");
  c.note = histogram(r);
}

void c5_bound(Checker& c) {
  const Program p = test::workload("checksum");
  const std::vector<std::string> input = {"romulus!"};
  const RunReport golden = golden_of(p, input);

  // Two replicas corrupted identically outvote the healthy one.
  const RunReport agree = run(p, ReplicationConfig{3}, {},
                              {{RegisterBit{1, 7, 0}, AtInstruction{5000}}, {RegisterBit{2, 7, 0}, AtInstruction{5000}}},
                              input);
  c.expect(classify_outcome(agree, golden) == OutcomeClass::SDC, "two agreeing faults did not produce SDC");

  const std::vector<FaultSpec> f1 = {{RegisterBit{1, 7, 9}, AtInstruction{5000}}};
  const std::vector<FaultSpec> f2 = {{RegisterBit{1, 7, 9}, AtInstruction{5000}},
                                     {RegisterBit{3, 5, 22}, AtInstruction{5000}}};
  for (std::size_t f : {1u, 2u}) {
    ReplicationConfig r;
    r.faults_tolerated = f;
    const RunReport rep = run(p, r, {}, f == 1 ? f1 : f2, input);
    const OutcomeClass o = classify_outcome(rep, golden);
    c.expect(o == OutcomeClass::DetectedCorrected,
             "f=" + std::to_string(f) + " gave " + std::string(to_string(o)));
    c.expect(same_output(rep, golden), "f=" + std::to_string(f) + " output differs");
    c.expect(rep.faults_applied == f, "f=" + std::to_string(f) + " applied " + std::to_string(rep.faults_applied));
  }
}

void c6_cow(Checker& c) {
  const Program p = test::workload("mixed_phase");
  const RunReport golden = golden_of(p, {});
  const FaultSpec flip{BackingBit{0, 1, 8, 2}, AtEventIndex{3}};
  ReplicationConfig r{3};
  r.wakeup = WakeupMode::Cow;
  {
    ExternalWorld w;
    LockstepMaster m(p, r, PlatformConfig{}, {}, w);
    for (int i = 0; i < 3; ++i) m.step();
    const auto refs = m.replicas().replica(0).space.find(1)->backing->refcount;
    c.expect(refs == 2, "page 1 backing shared by " + std::to_string(refs) + " replicas, expected 2");
  }
  const auto outcome = [&](WakeupMode mode, bool ecc) {
    ReplicationConfig cfg = r;
    cfg.wakeup = mode;
    cfg.ecc_memory = ecc;
    return classify_outcome(run(p, cfg, {}, {flip}, {}), golden);
  };
  const OutcomeClass cow = outcome(WakeupMode::Cow, false);
  const OutcomeClass eager = outcome(WakeupMode::Eager, false);
  const OutcomeClass ecc = outcome(WakeupMode::Cow, true);
  c.expect(cow == OutcomeClass::SDC, "COW gave " + std::string(to_string(cow)));
  c.expect(eager == OutcomeClass::DetectedCorrected, "Eager gave " + std::string(to_string(eager)));
  c.expect(ecc == OutcomeClass::Masked, "ECC gave " + std::string(to_string(ecc)));
}

void c7_scale(Checker& c) {
  const Program p = test::workload("mixed_phase");
  ReplicationConfig fixed{3};
  fixed.honor_hints = false;

  // Oracle: replay the hint events of the unscaled run against the N bounds.
  ExternalWorld w;
  LockstepMaster m(p, fixed, PlatformConfig{}, {}, w);
  std::vector<ReplicaCountChange> expected = {{0, 3}};
  std::size_t n = 3;
  for (bool more = true; more;) {
    const auto handled = m.report().events_handled;
    more = m.step();
    if (m.report().events_handled == handled || !more) continue;  // the final event changes nothing
    const auto kind = m.last_vote().canonical->kind;
    const std::size_t before = n;
    if (kind == EventKind::HintLower && n > 1) --n;
    if (kind == EventKind::HintRaise && n < 3) ++n;
    if (n != before) expected.push_back({m.report().events_handled, n});
  }
  const RunReport reference = m.report();

  for (auto mode : {WakeupMode::Eager, WakeupMode::Cow}) {
    ReplicationConfig scaled{3};
    scaled.wakeup = mode;
    ExternalWorld ws;
    const RunReport rep = run_replicated(p, scaled, PlatformConfig{}, {}, ws);
    const std::string name(mode == WakeupMode::Eager ? "eager" : "cow");
    c.expect(rep.replica_trace == expected, name + " trace " + format_trace(rep.replica_trace) +
                                                " != " + format_trace(expected));
    c.expect(rep.event_digests == reference.event_digests, name + " digests differ from the unscaled run");
    c.expect(ws.output_log.size() == w.output_log.size(), name + " output length differs");
    for (std::size_t i = 0; i < std::min(ws.output_log.size(), w.output_log.size()); ++i) {
      c.expect(ws.output_log[i].bytes == w.output_log[i].bytes, name + " output differs");
    }
  }
  c.note = "trace " + format_trace(expected);
}

void c8_ipi(Checker& c) {
  const CostParams k;
  const Topology t = Topology::symmetric(2, 6);
  c.expect(notification_cost(1, NotificationMechanism::SyncMessage, t, k) == 2 * 5'900 + k.state_copy_cost_cycles,
           "intra-socket per-replica cost");
  c.expect(notification_cost(6, NotificationMechanism::SyncMessage, t, k) == 2 * 14'300 + k.state_copy_cost_cycles,
           "inter-socket per-replica cost");

  // Same-socket fill: on 2x4 all three replicas share socket 0; on 2x3 the
  // third replica spills to socket 1.
  const Program p = test::workload("syscall_heavy");
  PlatformConfig near;
  near.topology = Topology::symmetric(2, 4);
  PlatformConfig far;
  far.topology = Topology::symmetric(2, 3);
  const RunReport a = run(p, ReplicationConfig{3}, near, {}, {"ab"});
  const RunReport b = run(p, ReplicationConfig{3}, far, {}, {"ab"});
  c.expect(a.events_handled == b.events_handled, "event counts differ");
  const std::uint64_t delta = b.ledger[CostCategory::Notification] - a.ledger[CostCategory::Notification];
  c.expect(delta == a.events_handled * 2 * (14'300 - 5'900),
           "notification delta " + std::to_string(delta) + " != events x 2 x 8400");
  c.note = std::to_string(a.events_handled) + " events, delta " + std::to_string(delta);
}

std::uint64_t total(const Program& p, PlatformConfig platform, const std::vector<std::string>& input) {
  return run(p, ReplicationConfig{3}, platform, {}, input).ledger.total();
}

std::uint64_t prefix_total(const Program& p, PlacementStrategy s, std::uint64_t events,
                           const std::vector<std::string>& input) {
  PlatformConfig platform;
  platform.strategy = s;
  ExternalWorld w = test::world_with(input);
  LockstepMaster m(p, ReplicationConfig{3}, platform, {}, w);
  while (m.report().events_handled < events && m.step()) {
  }
  return m.report().ledger.total();
}

void c9_placement(Checker& c) {
  std::ostringstream note;
  for (const char* name : {"syscall_heavy", "cache_bound"}) {
    const Program p = test::workload(name);
    const std::vector<std::string> input = {"ab"};
    PlatformConfig same;
    same.strategy = PlacementStrategy::SameSocket;
    PlatformConfig cross;
    cross.strategy = PlacementStrategy::CrossSocket;
    const std::uint64_t ts = total(p, same, input);
    const std::uint64_t tc = total(p, cross, input);
    const bool cache = std::string(name) == "cache_bound";
    c.expect(cache ? tc < ts : ts < tc, std::string(name) + ": static ordering wrong");
    const std::uint64_t best = std::min(ts, tc);

    for (auto initial : {PlacementStrategy::SameSocket, PlacementStrategy::CrossSocket}) {
      PlatformConfig adaptive;
      adaptive.strategy = PlacementStrategy::Adaptive;
      adaptive.adaptive.initial = initial;
      const RunReport rep = run(p, ReplicationConfig{3}, adaptive, {}, input);
      // One window on the starting layout, then the better layout plus the
      // cost of moving there.
      std::uint64_t allowance = 0;
      if (!rep.placement_trace.empty()) {
        const auto& first = rep.placement_trace.front();
        allowance = prefix_total(p, initial, first.event_index, input);
      } else {
        allowance = prefix_total(p, initial, adaptive.adaptive.window_events, input);
      }
      std::uint64_t switches = 0;
      for (const auto& change : rep.placement_trace) switches += change.moved * adaptive.costs.migration_cost_cycles;
      const std::uint64_t bound = best + allowance + switches;
      c.expect(rep.ledger.total() <= bound, std::string(name) + " adaptive from " + std::string(to_string(initial)) +
                                                ": " + std::to_string(rep.ledger.total()) + " > " +
                                                std::to_string(bound));
      note << name << "/" << to_string(initial) << " " << rep.ledger.total() << "<=" << bound << " ";
    }
  }
  c.note = note.str();
}

void c10_mechanisms(Checker& c) {
  const Program p = test::workload("syscall_heavy");
  for (std::size_t n : {2u, 3u}) {
    for (auto strategy : {PlacementStrategy::SameSocket, PlacementStrategy::CrossSocket}) {
      std::vector<std::uint64_t> per_event;
      std::vector<std::uint64_t> whole;
      for (auto mech : {NotificationMechanism::SharedPolling, NotificationMechanism::SyncMessage,
                        NotificationMechanism::Migration}) {
        PlatformConfig platform;
        platform.strategy = strategy;
        platform.mechanism = mech;
        platform.shared_channel = true;
        std::vector<ReplicaId> ids(n);
        for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<ReplicaId>(i);
        std::vector<CoreId> cores;
        for (auto [id, core] : place(strategy, ids, platform.topology).cores) cores.push_back(core);
        per_event.push_back(event_cost(cores, mech, true, platform.topology, platform.costs).notification);
        whole.push_back(run(p, ReplicationConfig{n}, platform, {}, {"ab"}).ledger[CostCategory::Notification]);
      }
      const std::string tag = "N=" + std::to_string(n) + " " + std::string(to_string(strategy));
      c.expect(per_event[0] < per_event[1] && per_event[1] < per_event[2], tag + ": per-event ordering");
      c.expect(whole[0] < whole[1] && whole[1] < whole[2], tag + ": whole-run ordering");
    }
  }
}

void c11_calibration(Checker& c) {
  const Program p = test::workload("compute_bound");
  const RunReport native = golden_of(p, {});
  const double tmr = overhead(run(p, ReplicationConfig{3}, {}, {}, {}).ledger.total(), native.ledger.total());
  const double dmr = overhead(run(p, ReplicationConfig{2}, {}, {}, {}).ledger.total(), native.ledger.total());
  c.expect(tmr <= 0.05, "TMR overhead above 5%");
  c.expect(dmr <= tmr, "DMR overhead above TMR");
  char buf[96];
  std::snprintf(buf, sizeof buf, "TMR %.3f%%, DMR %.3f%%", tmr * 100, dmr * 100);
  c.note = buf;
}

void c12_permanent(Checker& c) {
  const Program p = test::workload("checksum");
  const std::vector<std::string> input = {"romulus!"};
  const RunReport golden = golden_of(p, input);
  ReplicationConfig r{3};
  r.hang_watermark = 50'000;

  {
    PlatformConfig platform;  // 2x6: plenty of spare cores
    const CoreId victim = place(platform.strategy, std::vector<ReplicaId>{0, 1, 2}, platform.topology).cores.at(1);
    const RunReport rep = run(p, r, platform, {{CorePermanent{victim}, AtEventIndex{3}}}, input);
    c.expect(rep.hang_detections >= 1, "spare: no hang detected");
    c.expect(rep.migrations == 1, "spare: expected one migration");
    c.expect(rep.recoveries >= 1, "spare: no recovery");
    c.expect(!rep.degraded, "spare: run degraded");
    c.expect(same_output(rep, golden), "spare: output differs from golden");
    c.expect(classify_outcome(rep, golden) == OutcomeClass::DetectedCorrected, "spare: not DetectedCorrected");
  }
  {
    PlatformConfig platform;
    platform.topology = Topology::symmetric(1, 4);  // master + exactly three replica cores
    const RunReport rep = run(p, r, platform, {{CorePermanent{2}, AtEventIndex{3}}}, input);
    c.expect(rep.termination == Termination::Exit, "no spare: run did not complete");
    c.expect(rep.degraded, "no spare: degraded flag missing");
    c.expect(rep.retirements == 1, "no spare: expected one retirement");
    c.expect(!rep.replica_trace.empty() && rep.replica_trace.back().replicas == 2, "no spare: final N is not 2");
    c.expect(same_output(rep, golden), "no spare: output differs from golden");
    c.note = "degraded trace " + format_trace(rep.replica_trace);
  }
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "determinism oracle", 10, c1_determinism},
      {2, "TMR soundness campaign", 60, c2_tmr},
      {3, "DMR detection campaign", 60, c3_dmr},
      {4, "unreplicated baseline exposure", 60, c4_baseline},
      {5, "2f+1 bound", 10, c5_bound},
      {6, "COW hazard three-way", 5, c6_cow},
      {7, "scale round-trip", 10, c7_scale},
      {8, "IPI analytics", 1, c8_ipi},
      {9, "placement tradeoff", 10, c9_placement},
      {10, "mechanism ordering", 10, c10_mechanisms},
      {11, "calibration", 10, c11_calibration},
      {12, "permanent-fault recovery", 10, c12_permanent},
  };

  int failed = 0;
  for (const auto& crit : criteria) {
    Checker checker;
    const auto start = std::chrono::steady_clock::now();
    try {
      crit.body(checker);
    } catch (const std::exception& e) {
      checker.failures.push_back(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > crit.limit_seconds) {
      checker.failures.push_back("took " + std::to_string(secs) + " s, limit " + std::to_string(crit.limit_seconds));
    }
    const bool ok = checker.failures.empty();
    failed += ok ? 0 : 1;
    std::printf("%s  %2d  %-32s %7.2f s (limit %3.0f s)", ok ? "PASS" : "FAIL", crit.id, crit.title, secs,
                crit.limit_seconds);
    if (!checker.note.empty()) std::printf("  %s", checker.note.c_str());
    std::printf("\n");
    for (const auto& f : checker.failures) std::printf("      - %s\n", f.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
