#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace basketforge {

using CoreId = std::size_t;

/// Simulated time. Held as whole microseconds so interval arithmetic is exact.
using SimTime = std::chrono::microseconds;

/// Work on the exact grid: one unit is 1e-6 MB. A core with capacity C MB/s
/// retires C units per simulated microsecond.
using WorkUnits = std::int64_t;
inline constexpr WorkUnits kUnitsPerMb = 1'000'000;

WorkUnits mb_to_units(double mb);
double units_to_mb(WorkUnits units);
double to_seconds(SimTime t);
SimTime from_seconds(double seconds);

struct CoreSpec {
  CoreId core_id = 0;
  double capacity = 1.0;  // MB per simulated second
  double active_power = 1.0;
  double idle_power = 0.0;
  double off_power = 0.0;
  double switch_on_latency = 0.0;  // seconds

  bool operator==(const CoreSpec&) const = default;
};

struct PlatformConfig {
  std::vector<CoreSpec> cores;
  double cache_bandwidth = 1000.0;  // MB/s
  double switch_fixed_cost = 0.0;   // seconds

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;

  double total_capacity() const;

  bool operator==(const PlatformConfig&) const = default;
};

/// Four cores at 80/120/200/400 MB/s, active power 1.5/2.5/5/12 W, idle at
/// 10% of active, 5 ms power-on, 1000 MB/s switch cache, 1 ms fixed switch.
PlatformConfig default_platform_config();

/// JSON document with the PlatformConfig fields. Unknown keys are rejected.
PlatformConfig parse_platform_config(std::string_view json_text);
PlatformConfig load_platform_config(const std::filesystem::path& path);
std::string platform_config_to_json(const PlatformConfig& config);

enum class CoreMode { off, idle, busy };

std::string_view to_string(CoreMode mode);
std::optional<CoreMode> parse_core_mode(std::string_view text);

/// Seconds to process `work_mb` on `core`.
double execution_duration(double work_mb, const CoreSpec& core);

/// Same on the microsecond grid, rounded up so a core never retires more
/// than its capacity allows.
SimTime execution_time(WorkUnits work, const CoreSpec& core);

/// Units a core retires in `elapsed`, capped by nothing.
WorkUnits work_done(SimTime elapsed, const CoreSpec& core);

/// Store-to-cache plus load-from-cache of `state_mb`, modeled as one
/// transfer at cache_bandwidth plus the fixed cost.
double switch_cost(double state_mb, const PlatformConfig& config);
SimTime switch_time(double state_mb, const PlatformConfig& config);

struct CoreState {
  CoreMode mode = CoreMode::off;
  SimTime since{0};
  std::optional<std::string> current_task;
};

struct LedgerInterval {
  CoreId core = 0;
  CoreMode mode = CoreMode::off;
  SimTime t_start{0};
  SimTime t_end{0};
  double watts = 0.0;
  double joules = 0.0;

  bool operator==(const LedgerInterval&) const = default;
};

/// Closed view of the energy record: intervals ordered by (core, t_start),
/// each core tiling [0, end_time].
struct EnergyLedger {
  std::vector<LedgerInterval> intervals;
  std::vector<double> core_joules;
  double total_joules = 0.0;
  SimTime end_time{0};

  bool operator==(const EnergyLedger&) const = default;
};

/// Joules for one core, or the platform when `core` is empty.
double total_energy(const EnergyLedger& ledger, std::optional<CoreId> core = std::nullopt);

/// Seconds spent in `mode` by `core` according to the ledger.
double time_in_mode(const EnergyLedger& ledger, CoreId core, CoreMode mode);

/// Discrete-event model of the heterogeneous processor. Holds per-core
/// power state and the append-only interval record.
class Platform {
 public:
  /// Throws ConfigError for an invalid config or a busy initial mode.
  explicit Platform(PlatformConfig config, CoreMode initial_mode = CoreMode::off);

  const PlatformConfig& config() const noexcept { return config_; }
  const CoreSpec& core(CoreId id) const { return config_.cores.at(id); }
  std::size_t core_count() const noexcept { return config_.cores.size(); }

  const CoreState& state(CoreId id) const { return states_.at(id); }
  CoreMode mode(CoreId id) const { return states_.at(id).mode; }

  /// Latest instant any transition or advance has touched.
  SimTime now() const noexcept { return now_; }

  /// Closes the core's open interval at `t` and opens one in `new_mode`.
  /// `task` must be given exactly when entering busy. Setting the current
  /// mode again only updates the task. Zero-length intervals are not
  /// recorded. Throws SimulationError when `t` precedes the core's `since`.
  void set_mode(CoreId id, CoreMode new_mode, SimTime t,
                std::optional<std::string> task = std::nullopt);

  void advance_to(SimTime t);

  double watts(CoreId id, CoreMode mode) const;

  /// Snapshot with every open interval closed at now().
  EnergyLedger ledger() const;

 private:
  PlatformConfig config_;
  std::vector<CoreState> states_;
  std::vector<std::vector<LedgerInterval>> closed_;
  SimTime now_{0};
};

/// All cores start in `initial_mode` (off or idle) at t = 0.
Platform make_platform(const PlatformConfig& config, CoreMode initial_mode);

}  // namespace basketforge
