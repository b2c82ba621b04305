#include "basketforge/platform.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "basketforge/errors.hpp"
#include "json.hpp"

namespace basketforge {

namespace {

using nlohmann::json;

// ceil/floor of a ratio that would be exact in rational arithmetic but may
// carry binary noise in floating point.
std::int64_t snapped_ceil(long double q) {
  const long double r = std::round(q);
  if (std::fabs(q - r) < 1e-6L) return static_cast<std::int64_t>(r);
  return static_cast<std::int64_t>(std::ceil(q));
}

std::int64_t snapped_floor(long double q) {
  const long double r = std::round(q);
  if (std::fabs(q - r) < 1e-6L) return static_cast<std::int64_t>(r);
  return static_cast<std::int64_t>(std::floor(q));
}

double interval_joules(double watts, SimTime start, SimTime end) {
  return watts * static_cast<double>((end - start).count()) / 1e6;
}

template <typename T>
T required(const json& obj, const char* key) {
  if (!obj.contains(key)) throw ConfigError(std::string("platform config: missing field '") + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("platform config: bad value for '") + key + "'");
  }
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> known, const char* where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError(std::string(where) + ": unknown field '" + key + "'");
    }
  }
}

}  // namespace

WorkUnits mb_to_units(double mb) { return static_cast<WorkUnits>(std::llround(mb * kUnitsPerMb)); }

double units_to_mb(WorkUnits units) { return static_cast<double>(units) / kUnitsPerMb; }

double to_seconds(SimTime t) { return static_cast<double>(t.count()) / 1e6; }

SimTime from_seconds(double seconds) { return SimTime{std::llround(seconds * 1e6)}; }

void PlatformConfig::validate() const {
  if (cores.empty()) throw ConfigError("platform needs at least one core");
  std::vector<bool> seen(cores.size(), false);
  for (const auto& c : cores) {
    if (c.core_id >= cores.size()) {
      throw ConfigError("core ids must be 0.." + std::to_string(cores.size() - 1));
    }
    if (seen[c.core_id]) throw ConfigError("duplicate core id " + std::to_string(c.core_id));
    seen[c.core_id] = true;
    const auto id = std::to_string(c.core_id);
    if (!(c.capacity > 0.0)) throw ConfigError("core " + id + ": capacity must be positive");
    if (!(c.idle_power >= 0.0)) throw ConfigError("core " + id + ": idle_power must be >= 0");
    if (!(c.active_power > c.idle_power)) {
      throw ConfigError("core " + id + ": active_power must exceed idle_power");
    }
    if (c.off_power != 0.0) throw ConfigError("core " + id + ": off_power must be 0");
    if (!(c.switch_on_latency >= 0.0)) {
      throw ConfigError("core " + id + ": switch_on_latency must be >= 0");
    }
  }
  for (std::size_t i = 0; i < cores.size(); ++i) {
    if (cores[i].core_id != i) throw ConfigError("cores must be listed in id order");
  }
  if (!(cache_bandwidth > 0.0)) throw ConfigError("cache_bandwidth must be positive");
  if (!(switch_fixed_cost >= 0.0)) throw ConfigError("switch_fixed_cost must be >= 0");
}

double PlatformConfig::total_capacity() const {
  double sum = 0.0;
  for (const auto& c : cores) sum += c.capacity;
  return sum;
}

PlatformConfig default_platform_config() {
  PlatformConfig config;
  const double capacities[] = {80.0, 120.0, 200.0, 400.0};
  const double active[] = {1.5, 2.5, 5.0, 12.0};
  for (CoreId i = 0; i < 4; ++i) {
    config.cores.push_back({.core_id = i,
                            .capacity = capacities[i],
                            .active_power = active[i],
                            .idle_power = active[i] / 10.0,
                            .off_power = 0.0,
                            .switch_on_latency = 0.005});
  }
  config.cache_bandwidth = 1000.0;
  config.switch_fixed_cost = 0.001;
  return config;
}

PlatformConfig parse_platform_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("platform config: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("platform config: expected a JSON object");
  reject_unknown(doc, {"cores", "cache_bandwidth", "switch_fixed_cost"}, "platform config");

  PlatformConfig config;
  config.cache_bandwidth = required<double>(doc, "cache_bandwidth");
  config.switch_fixed_cost = required<double>(doc, "switch_fixed_cost");
  if (!doc.contains("cores") || !doc["cores"].is_array()) {
    throw ConfigError("platform config: 'cores' must be an array");
  }
  for (const auto& c : doc["cores"]) {
    if (!c.is_object()) throw ConfigError("platform config: core entries must be objects");
    reject_unknown(c,
                   {"core_id", "capacity", "active_power", "idle_power", "off_power",
                    "switch_on_latency"},
                   "platform config core");
    CoreSpec spec;
    spec.core_id = required<std::size_t>(c, "core_id");
    spec.capacity = required<double>(c, "capacity");
    spec.active_power = required<double>(c, "active_power");
    spec.idle_power = required<double>(c, "idle_power");
    spec.off_power = c.contains("off_power") ? required<double>(c, "off_power") : 0.0;
    spec.switch_on_latency = required<double>(c, "switch_on_latency");
    config.cores.push_back(spec);
  }
  config.validate();
  return config;
}

PlatformConfig load_platform_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open platform config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_platform_config(buffer.str());
}

std::string platform_config_to_json(const PlatformConfig& config) {
  nlohmann::ordered_json doc;
  doc["cores"] = nlohmann::ordered_json::array();
  for (const auto& c : config.cores) {
    doc["cores"].push_back({{"core_id", c.core_id},
                            {"capacity", c.capacity},
                            {"active_power", c.active_power},
                            {"idle_power", c.idle_power},
                            {"off_power", c.off_power},
                            {"switch_on_latency", c.switch_on_latency}});
  }
  doc["cache_bandwidth"] = config.cache_bandwidth;
  doc["switch_fixed_cost"] = config.switch_fixed_cost;
  return doc.dump(2) + "\n";
}

std::string_view to_string(CoreMode mode) {
  switch (mode) {
    case CoreMode::off: return "off";
    case CoreMode::idle: return "idle";
    case CoreMode::busy: return "busy";
  }
  return "?";
}

std::optional<CoreMode> parse_core_mode(std::string_view text) {
  if (text == "off") return CoreMode::off;
  if (text == "idle") return CoreMode::idle;
  if (text == "busy") return CoreMode::busy;
  return std::nullopt;
}

double execution_duration(double work_mb, const CoreSpec& core) { return work_mb / core.capacity; }

SimTime execution_time(WorkUnits work, const CoreSpec& core) {
  if (work <= 0) return SimTime{0};
  return SimTime{snapped_ceil(static_cast<long double>(work) / core.capacity)};
}

WorkUnits work_done(SimTime elapsed, const CoreSpec& core) {
  if (elapsed.count() <= 0) return 0;
  return snapped_floor(static_cast<long double>(elapsed.count()) * core.capacity);
}

double switch_cost(double state_mb, const PlatformConfig& config) {
  return config.switch_fixed_cost + state_mb / config.cache_bandwidth;
}

SimTime switch_time(double state_mb, const PlatformConfig& config) {
  const auto transfer =
      snapped_ceil(static_cast<long double>(mb_to_units(state_mb)) / config.cache_bandwidth);
  return from_seconds(config.switch_fixed_cost) + SimTime{transfer};
}

double total_energy(const EnergyLedger& ledger, std::optional<CoreId> core) {
  if (!core) return ledger.total_joules;
  return *core < ledger.core_joules.size() ? ledger.core_joules[*core] : 0.0;
}

double time_in_mode(const EnergyLedger& ledger, CoreId core, CoreMode mode) {
  SimTime sum{0};
  for (const auto& iv : ledger.intervals) {
    if (iv.core == core && iv.mode == mode) sum += iv.t_end - iv.t_start;
  }
  return to_seconds(sum);
}

Platform::Platform(PlatformConfig config, CoreMode initial_mode)
    : config_(std::move(config)),
      states_(config_.cores.size(), CoreState{initial_mode, SimTime{0}, std::nullopt}),
      closed_(config_.cores.size()) {
  config_.validate();
  if (initial_mode == CoreMode::busy) throw ConfigError("initial mode must be off or idle");
}

double Platform::watts(CoreId id, CoreMode mode) const {
  const auto& c = core(id);
  switch (mode) {
    case CoreMode::off: return c.off_power;
    case CoreMode::idle: return c.idle_power;
    case CoreMode::busy: return c.active_power;
  }
  return 0.0;
}

void Platform::set_mode(CoreId id, CoreMode new_mode, SimTime t, std::optional<std::string> task) {
  auto& st = states_.at(id);
  if (t < st.since) {
    throw SimulationError("core " + std::to_string(id) + ": time regression to " +
                          std::to_string(t.count()) + "us (since " +
                          std::to_string(st.since.count()) + "us)");
  }
  if ((new_mode == CoreMode::busy) != task.has_value()) {
    throw SimulationError("core " + std::to_string(id) + ": busy mode requires a task");
  }
  if (new_mode == st.mode) {
    st.current_task = std::move(task);
    return;
  }
  if (t > st.since) {
    const double w = watts(id, st.mode);
    closed_[id].push_back({id, st.mode, st.since, t, w, interval_joules(w, st.since, t)});
  }
  st.mode = new_mode;
  st.since = t;
  st.current_task = std::move(task);
  now_ = std::max(now_, t);
}

void Platform::advance_to(SimTime t) {
  if (t < now_) throw SimulationError("platform clock cannot move backwards");
  now_ = t;
}

EnergyLedger Platform::ledger() const {
  EnergyLedger out;
  out.end_time = now_;
  out.core_joules.assign(states_.size(), 0.0);
  for (CoreId id = 0; id < states_.size(); ++id) {
    for (const auto& iv : closed_[id]) {
      out.intervals.push_back(iv);
      out.core_joules[id] += iv.joules;
    }
    const auto& st = states_[id];
    if (now_ > st.since) {
      const double w = watts(id, st.mode);
      out.intervals.push_back({id, st.mode, st.since, now_, w, interval_joules(w, st.since, now_)});
      out.core_joules[id] += out.intervals.back().joules;
    }
  }
  for (double j : out.core_joules) out.total_joules += j;
  return out;
}

Platform make_platform(const PlatformConfig& config, CoreMode initial_mode) {
  return Platform(config, initial_mode);
}

}  // namespace basketforge
