#include "rmt/scenario.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

namespace rmt {
namespace {

using nlohmann::json;

void only_keys(const json& j, std::string_view section, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(section) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + std::string(section));
  }
}

std::string where(std::string_view section, std::string_view key) {
  return std::string(section) + "." + std::string(key);
}

std::uint64_t as_u64(const json& v, const std::string& name) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw ConfigError(name + " must be a non-negative integer");
}

void read_u64(const json& j, std::string_view section, std::string_view key, std::uint64_t& out) {
  if (auto it = j.find(key); it != j.end()) out = as_u64(*it, where(section, key));
}

void read_size(const json& j, std::string_view section, std::string_view key, std::size_t& out) {
  if (auto it = j.find(key); it != j.end()) out = static_cast<std::size_t>(as_u64(*it, where(section, key)));
}

void read_bool(const json& j, std::string_view section, std::string_view key, bool& out) {
  if (auto it = j.find(key); it != j.end()) {
    if (!it->is_boolean()) throw ConfigError(where(section, key) + " must be a boolean");
    out = it->get<bool>();
  }
}

void read_double(const json& j, std::string_view section, std::string_view key, double& out) {
  if (auto it = j.find(key); it != j.end()) {
    if (!it->is_number()) throw ConfigError(where(section, key) + " must be a number");
    out = it->get<double>();
  }
}

std::string as_string(const json& v, const std::string& name) {
  if (!v.is_string()) throw ConfigError(name + " must be a string");
  return v.get<std::string>();
}

Workload load_workload(const json& j, const std::filesystem::path& base, std::string_view section) {
  Workload w;
  json obj = j;
  if (j.is_string()) obj = json{{"program", j}};
  only_keys(obj, section, {"program", "input", "name"});
  if (!obj.contains("program")) throw ConfigError(std::string(section) + ".program is required");
  const std::filesystem::path rel = as_string(obj["program"], where(section, "program"));
  w.path = rel.is_absolute() ? rel : base / rel;
  w.program = load_program(w.path.string());
  w.name = obj.contains("name") ? as_string(obj["name"], where(section, "name"))
                                : (w.program.name.empty() ? w.path.stem().string() : w.program.name);
  if (obj.contains("input")) {
    const json& in = obj["input"];
    if (!in.is_array()) throw ConfigError(where(section, "input") + " must be an array of strings");
    for (const auto& s : in) {
      const std::string text = as_string(s, where(section, "input"));
      w.input.emplace_back(text.begin(), text.end());
    }
  }
  return w;
}

void load_replication(const json& j, ReplicationConfig& r) {
  constexpr std::string_view s = "replication";
  only_keys(j, s,
            {"replicas", "f", "max_replicas", "wakeup", "hang_watermark", "event_cap", "ecc_memory", "free_budget",
             "honor_hints"});
  read_size(j, s, "replicas", r.replicas);
  if (j.contains("f")) {
    r.faults_tolerated = static_cast<std::size_t>(as_u64(j["f"], "replication.f"));
    if (!j.contains("replicas")) r.replicas = required_replicas(*r.faults_tolerated);
  }
  if (j.contains("max_replicas")) r.max_replicas = static_cast<std::size_t>(as_u64(j["max_replicas"], "replication.max_replicas"));
  if (j.contains("wakeup")) {
    const std::string m = as_string(j["wakeup"], "replication.wakeup");
    if (m == "eager") r.wakeup = WakeupMode::Eager;
    else if (m == "cow") r.wakeup = WakeupMode::Cow;
    else throw ConfigError("replication.wakeup must be 'eager' or 'cow'");
  }
  read_u64(j, s, "hang_watermark", r.hang_watermark);
  read_u64(j, s, "event_cap", r.event_cap);
  read_bool(j, s, "ecc_memory", r.ecc_memory);
  read_size(j, s, "free_budget", r.free_budget);
  read_bool(j, s, "honor_hints", r.honor_hints);
}

Topology load_topology(const json& j) {
  only_keys(j, "topology", {"sockets", "cores_per_socket", "llc_bytes", "master_core", "res_cores"});
  std::uint64_t llc = 12ULL << 20;
  read_u64(j, "topology", "llc_bytes", llc);
  std::uint64_t master = 0;
  read_u64(j, "topology", "master_core", master);

  Topology topo;
  const json sockets = j.value("sockets", json(2));
  if (sockets.is_array()) {
    if (j.contains("cores_per_socket")) throw ConfigError("topology.cores_per_socket conflicts with a socket list");
    std::uint32_t id = 0;
    for (const auto& s : sockets) {
      only_keys(s, "topology.sockets[]", {"cores", "llc_bytes"});
      SocketInfo info;
      info.id = id++;
      info.llc_capacity_bytes = llc;
      read_u64(s, "topology.sockets[]", "llc_bytes", info.llc_capacity_bytes);
      if (!s.contains("cores") || !s["cores"].is_array()) throw ConfigError("topology.sockets[].cores must be a list");
      for (const auto& c : s["cores"]) {
        info.cores.push_back({static_cast<CoreId>(as_u64(c, "topology.sockets[].cores")), CoreKind::NonResCore});
      }
      topo.sockets.push_back(std::move(info));
    }
    topo.master_core = static_cast<CoreId>(master);
  } else {
    std::uint64_t cps = 6;
    read_u64(j, "topology", "cores_per_socket", cps);
    const std::uint64_t count = as_u64(sockets, "topology.sockets");
    if (count == 0 || cps == 0 || count * cps > 4096) throw ConfigError("topology must have between 1 and 4096 cores");
    topo = Topology::symmetric(static_cast<std::uint32_t>(count), static_cast<std::uint32_t>(cps), llc,
                               static_cast<CoreId>(master));
  }
  if (j.contains("res_cores")) {
    std::vector<CoreId> res;
    if (!j["res_cores"].is_array()) throw ConfigError("topology.res_cores must be a list");
    for (const auto& c : j["res_cores"]) res.push_back(static_cast<CoreId>(as_u64(c, "topology.res_cores")));
    if (res.empty()) throw ConfigError("topology.res_cores must not be empty");
    topo = designate_rcb(std::move(topo), res);
  }
  return topo;
}

void load_costs(const json& j, CostParams& c) {
  constexpr std::string_view s = "costs";
  only_keys(j, s,
            {"ipi_intra_cycles", "ipi_inter_cycles", "cpi", "llc_miss_penalty_cycles", "compare_cost_per_replica",
             "migration_cost_cycles", "state_copy_cost_cycles", "poll_check_cost_cycles", "proxy_base_cost",
             "page_copy_cost_cycles"});
  read_u64(j, s, "ipi_intra_cycles", c.ipi_intra_cycles);
  read_u64(j, s, "ipi_inter_cycles", c.ipi_inter_cycles);
  read_u64(j, s, "cpi", c.cpi);
  read_u64(j, s, "llc_miss_penalty_cycles", c.llc_miss_penalty_cycles);
  read_u64(j, s, "compare_cost_per_replica", c.compare_cost_per_replica);
  read_u64(j, s, "migration_cost_cycles", c.migration_cost_cycles);
  read_u64(j, s, "state_copy_cost_cycles", c.state_copy_cost_cycles);
  read_u64(j, s, "poll_check_cost_cycles", c.poll_check_cost_cycles);
  read_u64(j, s, "proxy_base_cost", c.proxy_base_cost);
  read_u64(j, s, "page_copy_cost_cycles", c.page_copy_cost_cycles);
}

void load_placement(const json& j, PlatformConfig& p) {
  constexpr std::string_view s = "placement";
  only_keys(j, s, {"strategy", "initial", "miss_threshold", "window_events", "window_instructions"});
  if (j.contains("strategy")) p.strategy = parse_strategy(as_string(j["strategy"], "placement.strategy"));
  if (j.contains("initial")) p.adaptive.initial = parse_strategy(as_string(j["initial"], "placement.initial"));
  read_double(j, s, "miss_threshold", p.adaptive.miss_threshold);
  read_u64(j, s, "window_events", p.adaptive.window_events);
  read_u64(j, s, "window_instructions", p.adaptive.window_instructions);
}

void load_notification(const json& j, PlatformConfig& p) {
  only_keys(j, "notification", {"mechanism", "shared_channel"});
  if (j.contains("mechanism")) p.mechanism = parse_mechanism(as_string(j["mechanism"], "notification.mechanism"));
  read_bool(j, "notification", "shared_channel", p.shared_channel);
}

FaultSpec load_fault(const json& j) {
  if (!j.is_object() || !j.contains("type")) throw ConfigError("faults[] entries need a type");
  const std::string type = as_string(j["type"], "faults[].type");
  FaultSpec spec;
  auto u = [&](std::string_view key, std::uint64_t limit) {
    if (!j.contains(key)) throw ConfigError("faults[]." + std::string(key) + " is required for " + type);
    const std::uint64_t v = as_u64(j[std::string(key)], "faults[]." + std::string(key));
    if (v > limit) throw ConfigError("faults[]." + std::string(key) + " is out of range");
    return v;
  };
  constexpr std::uint64_t kMax32 = 0xffffffffULL;
  if (type == "register") {
    only_keys(j, "faults[]", {"type", "replica", "reg", "bit", "at_instruction", "at_event"});
    spec.target = RegisterBit{static_cast<ReplicaId>(u("replica", kMax32)), static_cast<std::uint8_t>(u("reg", 255)),
                              static_cast<std::uint8_t>(u("bit", 255))};
  } else if (type == "memory" || type == "backing") {
    only_keys(j, "faults[]", {"type", "replica", "page", "byte", "bit", "at_instruction", "at_event"});
    const auto replica = static_cast<ReplicaId>(u("replica", kMax32));
    const auto page = static_cast<PageIndex>(u("page", kMax32));
    const auto byte = static_cast<std::uint16_t>(u("byte", 0xffff));
    const auto bit = static_cast<std::uint8_t>(u("bit", 255));
    if (type == "memory") spec.target = MemoryBit{replica, page, byte, bit};
    else spec.target = BackingBit{replica, page, byte, bit};
  } else if (type == "core") {
    only_keys(j, "faults[]", {"type", "core", "at_instruction", "at_event"});
    spec.target = CorePermanent{static_cast<CoreId>(u("core", kMax32))};
  } else if (type == "channel") {
    only_keys(j, "faults[]", {"type", "replica", "bit", "at_instruction", "at_event"});
    spec.target = ChannelBit{static_cast<ReplicaId>(u("replica", kMax32)), static_cast<std::uint8_t>(u("bit", 255))};
  } else {
    throw ConfigError("unknown fault type '" + type + "'");
  }
  const bool at_instr = j.contains("at_instruction");
  const bool at_event = j.contains("at_event");
  if (at_instr == at_event) throw ConfigError("faults[] need exactly one of at_instruction, at_event");
  if (at_instr) spec.trigger = AtInstruction{as_u64(j["at_instruction"], "faults[].at_instruction")};
  else spec.trigger = AtEventIndex{as_u64(j["at_event"], "faults[].at_event")};
  spec.validate();
  return spec;
}

CampaignSpec load_campaign(const json& j) {
  only_keys(j, "campaign", {"seed", "runs", "families", "jobs"});
  CampaignSpec c;
  read_u64(j, "campaign", "seed", c.seed);
  read_size(j, "campaign", "runs", c.runs);
  read_size(j, "campaign", "jobs", c.jobs);
  if (c.jobs == 0) throw ConfigError("campaign.jobs must be >= 1");
  const json fam = j.value("families", json::array({"register", "memory"}));
  if (fam.is_array()) {
    for (const auto& f : fam) c.space.weights.emplace_back(parse_family(as_string(f, "campaign.families")), 1.0);
  } else if (fam.is_object()) {
    for (const auto& [name, w] : fam.items()) {
      if (!w.is_number() || w.get<double>() < 0.0) throw ConfigError("campaign.families weights must be >= 0");
      c.space.weights.emplace_back(parse_family(name), w.get<double>());
    }
  } else {
    throw ConfigError("campaign.families must be a list or an object of weights");
  }
  if (c.space.weights.empty()) throw EmptySpace("campaign.families must not be empty");
  return c;
}

SweepAxis parse_axis(std::string_view text) {
  for (auto a : {SweepAxis::Placement, SweepAxis::Mechanism, SweepAxis::Replicas, SweepAxis::Faults}) {
    if (to_string(a) == text) return a;
  }
  throw ConfigError("unknown sweep axis '" + std::string(text) + "'");
}

SweepSpec load_sweep(const json& j, const std::filesystem::path& base) {
  only_keys(j, "sweep", {"axis", "values", "workloads"});
  SweepSpec s;
  if (!j.contains("axis")) throw ConfigError("sweep.axis is required");
  s.axis = parse_axis(as_string(j["axis"], "sweep.axis"));
  if (!j.contains("values") || !j["values"].is_array() || j["values"].empty()) {
    throw ConfigError("sweep.values must be a non-empty list");
  }
  for (const auto& v : j["values"]) {
    s.values.push_back(v.is_string() ? v.get<std::string>() : std::to_string(as_u64(v, "sweep.values")));
  }
  if (j.contains("workloads")) {
    if (!j["workloads"].is_array()) throw ConfigError("sweep.workloads must be a list");
    for (const auto& w : j["workloads"]) s.workloads.push_back(load_workload(w, base, "sweep.workloads[]"));
  }
  return s;
}

std::size_t parse_count(const std::string& value, std::string_view what) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != value.size()) throw ConfigError("sweep value '" + value + "' is not a valid " + std::string(what));
  return static_cast<std::size_t>(v);
}

void check_feasible(const ReplicationConfig& r, const PlatformConfig& p) {
  r.validate();
  p.validate();
  std::vector<ReplicaId> ids(r.initial_replicas());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<ReplicaId>(i);
  const PlacementStrategy layout = p.strategy == PlacementStrategy::Adaptive ? p.adaptive.initial : p.strategy;
  (void)place(layout, ids, p.topology);
  if (p.strategy == PlacementStrategy::Adaptive) (void)place(PlacementStrategy::CrossSocket, ids, p.topology);
}

}  // namespace

std::string_view to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::Placement: return "placement";
    case SweepAxis::Mechanism: return "mechanism";
    case SweepAxis::Replicas: return "n";
    case SweepAxis::Faults: return "f";
  }
  return "?";
}

void apply_axis_value(SweepAxis axis, const std::string& value, ReplicationConfig& replication,
                      PlatformConfig& platform) {
  switch (axis) {
    case SweepAxis::Placement:
      platform.strategy = parse_strategy(value);
      break;
    case SweepAxis::Mechanism:
      platform.mechanism = parse_mechanism(value);
      if (platform.mechanism == NotificationMechanism::SharedPolling) platform.shared_channel = true;
      break;
    case SweepAxis::Replicas:
      replication.faults_tolerated.reset();
      replication.replicas = parse_count(value, "replica count");
      break;
    case SweepAxis::Faults:
      replication.faults_tolerated = parse_count(value, "fault count");
      replication.replicas = required_replicas(*replication.faults_tolerated);
      break;
  }
  if (replication.max_replicas && *replication.max_replicas < replication.initial_replicas()) {
    replication.max_replicas = replication.initial_replicas();
  }
}

Scenario parse_scenario(std::string_view json_text, const std::filesystem::path& base, std::string id) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
  }
  only_keys(j, "scenario",
            {"name", "workload", "replication", "topology", "costs", "placement", "notification", "faults", "campaign",
             "sweep"});

  Scenario s;
  s.id = j.contains("name") ? as_string(j["name"], "name") : std::move(id);
  if (!j.contains("workload")) throw ConfigError("scenario needs a workload section");
  s.workload = load_workload(j["workload"], base, "workload");
  if (j.contains("replication")) load_replication(j["replication"], s.replication);
  if (j.contains("topology")) s.platform.topology = load_topology(j["topology"]);
  if (j.contains("costs")) load_costs(j["costs"], s.platform.costs);
  if (j.contains("placement")) load_placement(j["placement"], s.platform);
  if (j.contains("notification")) load_notification(j["notification"], s.platform);
  if (j.contains("faults")) {
    if (!j["faults"].is_array()) throw ConfigError("faults must be a list");
    for (const auto& f : j["faults"]) s.faults.push_back(load_fault(f));
  }
  if (j.contains("campaign")) s.campaign = load_campaign(j["campaign"]);
  if (j.contains("sweep")) s.sweep = load_sweep(j["sweep"], base);

  check_feasible(s.replication, s.platform);
  for (const auto& f : s.faults) {
    if (std::holds_alternative<ChannelBit>(f.target) && s.platform.mechanism != NotificationMechanism::SharedPolling) {
      throw ConfigError("channel faults need the shared_polling mechanism");
    }
  }
  if (s.sweep) {
    for (const auto& v : s.sweep->values) {
      ReplicationConfig r = s.replication;
      PlatformConfig p = s.platform;
      apply_axis_value(s.sweep->axis, v, r, p);
      check_feasible(r, p);
    }
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot read scenario file '" + file.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario(text.str(), file.parent_path(), file.stem().string());
}

}  // namespace rmt
