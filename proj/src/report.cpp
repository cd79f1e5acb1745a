#include "rmt/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace rmt {
namespace {

using nlohmann::ordered_json;

constexpr CostCategory kCategories[] = {CostCategory::Execution, CostCategory::LlcMiss, CostCategory::Notification,
                                        CostCategory::Compare,   CostCategory::Proxy,   CostCategory::Scaling};

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

std::uint64_t to_u64(const std::string& s) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("report field '" + s + "' is not an unsigned integer");
}

}  // namespace

ReportFormat parse_format(std::string_view text) {
  if (text == "csv") return ReportFormat::Csv;
  if (text == "json") return ReportFormat::Json;
  throw ConfigError("unknown report format '" + std::string(text) + "'");
}

double round6(double v) { return std::strtod(fmt6(v).c_str(), nullptr); }

double overhead(std::uint64_t total, std::uint64_t native_total) {
  if (native_total == 0) return 0.0;
  return (static_cast<double>(total) - static_cast<double>(native_total)) / static_cast<double>(native_total);
}

double geometric_mean_overhead(std::span<const double> overheads) {
  if (overheads.empty()) return 0.0;
  double log_sum = 0.0;
  for (double o : overheads) log_sum += std::log1p(o);
  return std::expm1(log_sum / static_cast<double>(overheads.size()));
}

std::string format_trace(const std::vector<ReplicaCountChange>& trace) {
  std::string out;
  for (const auto& c : trace) {
    if (!out.empty()) out += ';';
    out += std::to_string(c.event_index) + ":" + std::to_string(c.replicas);
  }
  return out;
}

std::string to_csv(const Report& report) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : report.rows) {
    std::vector<std::string> f = {r.kind,
                                  r.scenario,
                                  r.workload,
                                  r.run ? std::to_string(*r.run) : "",
                                  r.fault,
                                  std::to_string(r.n),
                                  r.strategy,
                                  r.mechanism,
                                  r.outcome,
                                  std::to_string(r.ledger.total())};
    for (auto c : kCategories) f.push_back(std::to_string(r.ledger[c]));
    f.push_back(fmt6(r.overhead));
    f.push_back(std::to_string(r.recoveries));
    f.push_back(std::to_string(r.events));
    f.push_back(r.degraded ? "1" : "0");
    f.push_back(r.replica_trace);
    f.push_back(std::to_string(r.count));
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (i > 0) out += ',';
      out += csv_field(f[i]);
    }
    out += '\n';
  }
  return out;
}

Report report_from_csv(std::string_view text) {
  Report report;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw ConfigError("report CSV header does not match");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 22) throw ConfigError("report CSV row has " + std::to_string(f.size()) + " fields");
    ReportRow r;
    r.kind = f[0];
    r.scenario = f[1];
    r.workload = f[2];
    if (!f[3].empty()) r.run = static_cast<std::size_t>(to_u64(f[3]));
    r.fault = f[4];
    r.n = static_cast<std::size_t>(to_u64(f[5]));
    r.strategy = f[6];
    r.mechanism = f[7];
    r.outcome = f[8];
    for (std::size_t i = 0; i < kCostCategoryCount; ++i) r.ledger.cycles[i] = to_u64(f[10 + i]);
    if (r.ledger.total() != to_u64(f[9])) throw ConfigError("report CSV total does not match its categories");
    r.overhead = std::strtod(f[16].c_str(), nullptr);
    r.recoveries = to_u64(f[17]);
    r.events = to_u64(f[18]);
    r.degraded = f[19] == "1";
    r.replica_trace = f[20];
    r.count = to_u64(f[21]);
    report.rows.push_back(std::move(r));
  }
  return report;
}

std::string to_json(const Report& report) {
  ordered_json rows = ordered_json::array();
  for (const auto& r : report.rows) {
    ordered_json row;
    row["kind"] = r.kind;
    row["scenario"] = r.scenario;
    row["workload"] = r.workload;
    row["run"] = r.run ? ordered_json(*r.run) : ordered_json(nullptr);
    row["fault"] = r.fault;
    row["n"] = r.n;
    row["strategy"] = r.strategy;
    row["mechanism"] = r.mechanism;
    row["outcome"] = r.outcome;
    row["total_cycles"] = r.ledger.total();
    ordered_json cycles;
    for (auto c : kCategories) cycles[std::string(to_string(c))] = r.ledger[c];
    row["cycles"] = cycles;
    row["overhead"] = round6(r.overhead);
    row["recoveries"] = r.recoveries;
    row["events"] = r.events;
    row["degraded"] = r.degraded;
    row["replica_trace"] = r.replica_trace;
    row["count"] = r.count;
    rows.push_back(std::move(row));
  }
  ordered_json doc;
  doc["rows"] = std::move(rows);
  return doc.dump(2) + "\n";
}

Report report_from_json(std::string_view text) {
  Report report;
  try {
    const auto doc = ordered_json::parse(text);
    for (const auto& row : doc.at("rows")) {
      ReportRow r;
      r.kind = row.at("kind").get<std::string>();
      r.scenario = row.at("scenario").get<std::string>();
      r.workload = row.at("workload").get<std::string>();
      if (!row.at("run").is_null()) r.run = row.at("run").get<std::size_t>();
      r.fault = row.at("fault").get<std::string>();
      r.n = row.at("n").get<std::size_t>();
      r.strategy = row.at("strategy").get<std::string>();
      r.mechanism = row.at("mechanism").get<std::string>();
      r.outcome = row.at("outcome").get<std::string>();
      for (std::size_t i = 0; i < kCostCategoryCount; ++i) {
        r.ledger.cycles[i] = row.at("cycles").at(std::string(to_string(kCategories[i]))).get<std::uint64_t>();
      }
      if (r.ledger.total() != row.at("total_cycles").get<std::uint64_t>()) {
        throw ConfigError("report JSON total does not match its categories");
      }
      r.overhead = row.at("overhead").get<double>();
      r.recoveries = row.at("recoveries").get<std::uint64_t>();
      r.events = row.at("events").get<std::uint64_t>();
      r.degraded = row.at("degraded").get<bool>();
      r.replica_trace = row.at("replica_trace").get<std::string>();
      r.count = row.at("count").get<std::uint64_t>();
      report.rows.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed report JSON: ") + e.what());
  }
  return report;
}

std::string render(const Report& report, ReportFormat format) {
  return format == ReportFormat::Csv ? to_csv(report) : to_json(report);
}

void emit(const Report& report, ReportFormat format, const std::filesystem::path& out) {
  const std::string text = render(report, format);
  std::ofstream file(out, std::ios::binary | std::ios::trunc);
  if (!file) throw Error("cannot open '" + out.string() + "' for writing");
  file << text;
  file.flush();
  if (!file) throw Error("failed writing '" + out.string() + "'");
}

}  // namespace rmt
