#include "rmt/experiment.hpp"

#include <map>
#include <tuple>

namespace rmt {
namespace {

ReportRow make_row(std::string kind, const std::string& scenario, const std::string& workload, std::size_t n,
                   const PlatformConfig& platform, std::string mechanism, const RunReport& report,
                   std::uint64_t native_total) {
  ReportRow row;
  row.kind = std::move(kind);
  row.scenario = scenario;
  row.workload = workload;
  row.n = n;
  row.strategy = std::string(to_string(platform.strategy));
  row.mechanism = std::move(mechanism);
  row.outcome = std::string(to_string(report.outcome));
  row.ledger = report.ledger;
  row.overhead = round6(overhead(report.ledger.total(), native_total));
  row.recoveries = report.recoveries;
  row.events = report.events_handled;
  row.degraded = report.degraded;
  row.replica_trace = format_trace(report.replica_trace);
  return row;
}

RunReport native_run(const Workload& w, const ReplicationConfig& r, const PlatformConfig& p) {
  ExternalWorld world;
  world.input_script = w.input;
  return run_native(w.program, p, world, r.hang_watermark);
}

ReportRow native_row(const std::string& scenario, const Workload& w, const PlatformConfig& p, const RunReport& native) {
  PlatformConfig shown = p;
  if (shown.strategy == PlacementStrategy::Adaptive) shown.strategy = shown.adaptive.initial;
  ReportRow row = make_row("native", scenario, w.name, 1, shown, "none", native, native.ledger.total());
  row.outcome = std::string(to_string(classify_outcome(native, native)));
  return row;
}

}  // namespace

Report cmd_run(const Scenario& s) {
  Report report;
  const RunReport golden = native_run(s.workload, s.replication, s.platform);
  report.rows.push_back(native_row(s.id, s.workload, s.platform, golden));

  ExternalWorld world;
  world.input_script = s.workload.input;
  RunReport run = run_replicated(s.workload.program, s.replication, s.platform, s.faults, world);
  run.outcome = classify_outcome(run, golden);
  ReportRow row = make_row("run", s.id, s.workload.name, s.replication.initial_replicas(), s.platform,
                           std::string(to_string(s.platform.mechanism)), run, golden.ledger.total());
  for (const auto& f : s.faults) {
    if (!row.fault.empty()) row.fault += "; ";
    row.fault += f.describe();
  }
  report.rows.push_back(std::move(row));
  return report;
}

Report cmd_campaign(const Scenario& s, std::optional<std::uint64_t> seed, std::optional<std::size_t> jobs) {
  if (!s.campaign) throw ConfigError("scenario has no campaign section");
  CampaignSetup setup;
  setup.program = &s.workload.program;
  setup.replication = s.replication;
  setup.platform = s.platform;
  setup.input_script = s.workload.input;
  setup.seed = seed.value_or(s.campaign->seed);
  setup.space = s.campaign->space;
  setup.runs = s.campaign->runs;
  setup.jobs = jobs.value_or(s.campaign->jobs);
  const CampaignResult result = run_campaign(setup);

  Report report;
  report.rows.push_back(native_row(s.id, s.workload, s.platform, result.golden));
  const std::string mechanism(to_string(s.platform.mechanism));
  for (const auto& run : result.runs) {
    ReportRow row = make_row("run", s.id, s.workload.name, s.replication.initial_replicas(), s.platform, mechanism,
                             run.report, result.golden.ledger.total());
    row.run = run.index;
    row.fault = run.fault.describe();
    row.outcome = std::string(to_string(run.outcome));
    report.rows.push_back(std::move(row));
  }
  for (auto o : {OutcomeClass::Masked, OutcomeClass::DetectedCorrected, OutcomeClass::DetectedUnrecoverable,
                 OutcomeClass::SDC, OutcomeClass::Hang}) {
    ReportRow row;
    row.kind = "histogram";
    row.scenario = s.id;
    row.workload = s.workload.name;
    row.n = s.replication.initial_replicas();
    row.strategy = std::string(to_string(s.platform.strategy));
    row.mechanism = mechanism;
    row.outcome = std::string(to_string(o));
    row.count = result.count(o);
    report.rows.push_back(std::move(row));
  }
  return report;
}

Report cmd_sweep(const Scenario& s) {
  if (!s.sweep) throw ConfigError("scenario has no sweep section");
  std::vector<const Workload*> workloads;
  if (s.sweep->workloads.empty()) workloads.push_back(&s.workload);
  for (const auto& w : s.sweep->workloads) workloads.push_back(&w);

  Report report;
  using Key = std::tuple<std::size_t, std::string, std::string>;
  std::vector<Key> order;
  std::map<Key, std::vector<double>> groups;

  for (const Workload* w : workloads) {
    const RunReport native = native_run(*w, s.replication, s.platform);
    report.rows.push_back(native_row(s.id, *w, s.platform, native));
    for (const auto& value : s.sweep->values) {
      ReplicationConfig r = s.replication;
      PlatformConfig p = s.platform;
      apply_axis_value(s.sweep->axis, value, r, p);
      ExternalWorld world;
      world.input_script = w->input;
      RunReport run = run_replicated(w->program, r, p, {}, world);
      run.outcome = classify_outcome(run, native);
      ReportRow row = make_row("run", s.id, w->name, r.initial_replicas(), p, std::string(to_string(p.mechanism)), run,
                               native.ledger.total());
      const Key key{row.n, row.strategy, row.mechanism};
      if (!groups.contains(key)) order.push_back(key);
      groups[key].push_back(overhead(run.ledger.total(), native.ledger.total()));
      report.rows.push_back(std::move(row));
    }
  }

  for (const auto& key : order) {
    ReportRow row;
    row.kind = "gm";
    row.scenario = s.id;
    row.workload = "*";
    std::tie(row.n, row.strategy, row.mechanism) = key;
    row.overhead = round6(geometric_mean_overhead(groups[key]));
    row.count = groups[key].size();
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace rmt
