#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "basketforge/key_value.hpp"
#include "basketforge/platform.hpp"

namespace basketforge {

enum class Threading { single, multi };
enum class Objective { fastest, energy };
enum class Switching { static_queue, dynamic };

std::string_view to_string(Threading t);
std::string_view to_string(Objective o);
std::string_view to_string(Switching s);
std::optional<Objective> parse_objective(std::string_view text);
std::optional<Switching> parse_switching(std::string_view text);

struct TaskDescriptor {
  std::string task_id;
  double work_mb = 0.0;
  double cost_factor = 1.0;
  Threading threading = Threading::single;
  double state_mb = 0.0;
  std::optional<double> deadline;  // seconds from submission

  void validate() const;
};

struct SchedulingPolicy {
  Objective objective = Objective::fastest;
  bool gate_idle_cores = true;
  Switching switching = Switching::dynamic;
};

/// Declaration order is the tie-break precedence among events at the same
/// instant.
enum class EventKind {
  thread_end,
  end,
  combine,
  switch_core,
  power_off,
  submit,
  power_on,
  start,
  thread_start,
};

std::string_view to_string(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view text);

struct ScheduleEvent {
  SimTime time{0};
  EventKind kind = EventKind::submit;
  std::string task_id;
  std::optional<CoreId> core;
  std::string detail;

  bool operator==(const ScheduleEvent&) const = default;
};

/// Total order on (time, kind, task_id, core); core-less events first.
bool event_order(const ScheduleEvent& a, const ScheduleEvent& b);

struct ScheduleTrace {
  std::vector<ScheduleEvent> events;
  SimTime makespan{0};

  /// Appends events that all occur at or after the current ones.
  void append(const ScheduleTrace& later);

  bool operator==(const ScheduleTrace&) const = default;
};

/// Latest end/combine time, 0 for an empty event list.
SimTime compute_makespan(std::span<const ScheduleEvent> events);

/// Multi tasks carrying less than 1 MB per available core run single-threaded.
inline constexpr double kSplitThresholdMbPerCore = 1.0;

/// Effective threading mode given how many cores are free to take threads.
Threading classify(const TaskDescriptor& task, std::size_t available_cores);

/// Effective work in MB: work scaled by the algorithm cost factor.
double estimate_requirement(const TaskDescriptor& task);
WorkUnits requirement_units(const TaskDescriptor& task);

/// Picks the most optimised core among `candidates` (which must be
/// non-empty). `remaining_deadline` restricts candidates to those that can
/// finish in time; when none can, the fastest candidate wins. Ties go to the
/// lower core id.
CoreId select_core(const TaskDescriptor& task, std::span<const CoreSpec> candidates,
                   const SchedulingPolicy& policy,
                   std::optional<double> remaining_deadline = std::nullopt);

/// Same, over the platform's non-busy cores with the full deadline.
/// Returns nullopt when every core is busy (the task must wait).
std::optional<CoreId> select_core(const TaskDescriptor& task, const Platform& platform,
                                  const SchedulingPolicy& policy);

struct ThreadChunk {
  CoreId core = 0;
  WorkUnits units = 0;

  double chunk_mb() const { return units_to_mb(units); }
  bool operator==(const ThreadChunk&) const = default;
};

/// Splits the task's effective work across `cores` in proportion to their
/// capacities. Leftover grid units after flooring go, one at a time, to the
/// core whose finish time grows least, so the split minimises the latest
/// finish on the unit grid and conserves work exactly.
std::vector<ThreadChunk> split_threads(const TaskDescriptor& task, std::span<const CoreSpec> cores);

struct SwitchOutcome {
  std::vector<ScheduleEvent> events;
  SimTime resume{0};  // remaining work starts on the new core
  SimTime finish{0};
};

/// Moves a running task from `from` to `to` at `t`: the task state goes
/// through the cache, `from` is powered off (or left idle when gating is
/// disabled), `to` is powered on if needed and resumes the `remaining` work.
/// Switching to the same core is a no-op. Throws SchedulingError if `to` is
/// busy or `from` is not running the task.
SwitchOutcome switch_core(Platform& platform, const TaskDescriptor& task, CoreId from, CoreId to,
                          SimTime t, WorkUnits remaining, const SchedulingPolicy& policy);

struct QueueEntry {
  std::size_t task_index = 0;
  bool threaded = false;
  std::vector<ThreadChunk> placements;

  bool operator==(const QueueEntry&) const = default;
};

using StaticQueue = std::vector<QueueEntry>;

/// Computes every placement up front by dispatching against a simulated
/// copy of the platform. Execution under static switching follows it
/// verbatim.
StaticQueue build_static_queue(std::span<const TaskDescriptor> tasks, const Platform& platform,
                               const SchedulingPolicy& policy);

/// Runs records [first, last) of a task and returns what they emit. Must be
/// a pure function of its range.
using TaskBody = std::function<std::vector<KeyValue>(std::size_t first, std::size_t last)>;

struct SchedTask {
  TaskDescriptor descriptor;
  std::size_t record_count = 0;
  TaskBody body;
};

/// A task body threw. Carries the trace and ledger up to the failure.
class TaskFailure : public std::runtime_error {
 public:
  TaskFailure(std::string task_id, const std::string& message, ScheduleTrace trace,
              EnergyLedger ledger)
      : std::runtime_error(message),
        task_id_(std::move(task_id)),
        trace_(std::move(trace)),
        ledger_(std::move(ledger)) {}

  const std::string& task_id() const noexcept { return task_id_; }
  const ScheduleTrace& trace() const noexcept { return trace_; }
  const EnergyLedger& ledger() const noexcept { return ledger_; }

 private:
  std::string task_id_;
  ScheduleTrace trace_;
  EnergyLedger ledger_;
};

/// The MB Scheduler: collects submitted tasks, places them on cores of a
/// platform it exclusively drives, and accumulates one trace across calls.
class MbScheduler {
 public:
  MbScheduler(Platform& platform, SchedulingPolicy policy);

  /// Schedules a batch submitted together at platform().now() and runs it to
  /// completion. Returns each task's output in submission order; a
  /// multi-threaded task's output is its threads' outputs concatenated in
  /// record order.
  std::vector<std::vector<KeyValue>> run(std::span<const SchedTask> tasks);

  const ScheduleTrace& trace() const noexcept { return trace_; }
  const SchedulingPolicy& policy() const noexcept { return policy_; }
  Platform& platform() noexcept { return platform_; }

 private:
  Platform& platform_;
  SchedulingPolicy policy_;
  ScheduleTrace trace_;
};

struct ScheduleOutcome {
  ScheduleTrace trace;
  EnergyLedger ledger;
  std::vector<std::vector<KeyValue>> results;
};

ScheduleOutcome schedule(std::span<const SchedTask> tasks, Platform& platform,
                         const SchedulingPolicy& policy);

/// Descriptor-only convenience: bodies are no-ops.
ScheduleOutcome schedule(std::span<const TaskDescriptor> tasks, Platform& platform,
                         const SchedulingPolicy& policy);

}  // namespace basketforge
