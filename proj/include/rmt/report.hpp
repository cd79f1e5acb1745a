#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rmt/master.hpp"

namespace rmt {

/// kind is one of: native, run, gm, histogram.
struct ReportRow {
  std::string kind;
  std::string scenario;
  std::string workload;
  std::optional<std::size_t> run;
  std::string fault;
  std::size_t n = 0;
  std::string strategy;
  std::string mechanism;
  std::string outcome;
  CostLedger ledger;
  double overhead = 0.0;
  std::uint64_t recoveries = 0;
  std::uint64_t events = 0;
  bool degraded = false;
  std::string replica_trace;  // "event:N;event:N"
  std::uint64_t count = 0;    // histogram count, or rows aggregated by a gm row

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct Report {
  std::vector<ReportRow> rows;
  friend bool operator==(const Report&, const Report&) = default;
};

enum class ReportFormat : std::uint8_t { Csv, Json };

ReportFormat parse_format(std::string_view text);

inline constexpr std::string_view kCsvHeader =
    "kind,scenario,workload,run,fault,n,strategy,mechanism,outcome,total_cycles,execution,llc_miss,notification,"
    "compare,proxy,scaling,overhead,recoveries,events,degraded,replica_trace,count";

/// (total - native) / native.
double overhead(std::uint64_t total, std::uint64_t native_total);
/// Geometric mean over (1 + overhead) factors, minus 1.
double geometric_mean_overhead(std::span<const double> overheads);
/// Rounds to the 6 significant digits that the reports carry.
double round6(double v);

std::string format_trace(const std::vector<ReplicaCountChange>& trace);

std::string to_csv(const Report& report);
std::string to_json(const Report& report);
Report report_from_json(std::string_view text);
Report report_from_csv(std::string_view text);

std::string render(const Report& report, ReportFormat format);
/// Throws Error naming the path on I/O failure.
void emit(const Report& report, ReportFormat format, const std::filesystem::path& out);

}  // namespace rmt
