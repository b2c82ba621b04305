#include "basketforge/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <tuple>

#include "basketforge/errors.hpp"

namespace basketforge {

std::string_view to_string(Threading t) { return t == Threading::single ? "single" : "multi"; }

std::string_view to_string(Objective o) { return o == Objective::fastest ? "fastest" : "energy"; }

std::string_view to_string(Switching s) {
  return s == Switching::static_queue ? "static" : "dynamic";
}

std::optional<Objective> parse_objective(std::string_view text) {
  if (text == "fastest") return Objective::fastest;
  if (text == "energy") return Objective::energy;
  return std::nullopt;
}

std::optional<Switching> parse_switching(std::string_view text) {
  if (text == "static") return Switching::static_queue;
  if (text == "dynamic") return Switching::dynamic;
  return std::nullopt;
}

void TaskDescriptor::validate() const {
  if (task_id.empty()) throw ConfigError("task id must be non-empty");
  if (!(work_mb >= 0.0)) throw ConfigError(task_id + ": work_mb must be >= 0");
  if (!(cost_factor > 0.0)) throw ConfigError(task_id + ": cost_factor must be positive");
  if (!(state_mb >= 0.0)) throw ConfigError(task_id + ": state_mb must be >= 0");
  if (deadline && !(*deadline > 0.0)) throw ConfigError(task_id + ": deadline must be positive");
}

namespace {

constexpr std::string_view kEventNames[] = {"thread_end", "end",     "combine",
                                            "switch",     "power_off", "submit",
                                            "power_on",   "start",   "thread_start"};

}  // namespace

std::string_view to_string(EventKind kind) { return kEventNames[static_cast<std::size_t>(kind)]; }

std::optional<EventKind> parse_event_kind(std::string_view text) {
  for (std::size_t i = 0; i < std::size(kEventNames); ++i) {
    if (kEventNames[i] == text) return static_cast<EventKind>(i);
  }
  return std::nullopt;
}

bool event_order(const ScheduleEvent& a, const ScheduleEvent& b) {
  return std::tie(a.time, a.kind, a.task_id, a.core) < std::tie(b.time, b.kind, b.task_id, b.core);
}

SimTime compute_makespan(std::span<const ScheduleEvent> events) {
  SimTime latest{0};
  for (const auto& e : events) {
    if (e.kind == EventKind::end || e.kind == EventKind::combine) latest = std::max(latest, e.time);
  }
  return latest;
}

void ScheduleTrace::append(const ScheduleTrace& later) {
  events.insert(events.end(), later.events.begin(), later.events.end());
  makespan = std::max(makespan, later.makespan);
}

Threading classify(const TaskDescriptor& task, std::size_t available_cores) {
  if (task.threading == Threading::single || available_cores == 0) return Threading::single;
  const double threshold = kSplitThresholdMbPerCore * static_cast<double>(available_cores);
  return task.work_mb < threshold ? Threading::single : Threading::multi;
}

double estimate_requirement(const TaskDescriptor& task) { return task.work_mb * task.cost_factor; }

WorkUnits requirement_units(const TaskDescriptor& task) {
  return mb_to_units(estimate_requirement(task));
}

CoreId select_core(const TaskDescriptor& task, std::span<const CoreSpec> candidates,
                   const SchedulingPolicy& policy, std::optional<double> remaining_deadline) {
  if (candidates.empty()) throw SchedulingError("select_core: no candidate cores");
  const double work = estimate_requirement(task);

  auto fastest = [](std::span<const CoreSpec> cores) {
    const CoreSpec* best = &cores.front();
    for (const auto& c : cores) {
      if (c.capacity > best->capacity || (c.capacity == best->capacity && c.core_id < best->core_id)) {
        best = &c;
      }
    }
    return best->core_id;
  };

  std::vector<CoreSpec> pool(candidates.begin(), candidates.end());
  if (remaining_deadline) {
    std::erase_if(pool, [&](const CoreSpec& c) {
      return execution_duration(work, c) > *remaining_deadline;
    });
    if (pool.empty()) return fastest(candidates);
  }
  if (policy.objective == Objective::fastest) return fastest(pool);

  const CoreSpec* best = nullptr;
  double best_energy = 0.0;
  for (const auto& c : pool) {
    const double energy = c.active_power * execution_duration(work, c);
    if (!best || energy < best_energy || (energy == best_energy && c.core_id < best->core_id)) {
      best = &c;
      best_energy = energy;
    }
  }
  return best->core_id;
}

std::optional<CoreId> select_core(const TaskDescriptor& task, const Platform& platform,
                                  const SchedulingPolicy& policy) {
  std::vector<CoreSpec> free;
  for (CoreId id = 0; id < platform.core_count(); ++id) {
    if (platform.mode(id) != CoreMode::busy) free.push_back(platform.core(id));
  }
  if (free.empty()) return std::nullopt;
  return select_core(task, free, policy, task.deadline);
}

std::vector<ThreadChunk> split_threads(const TaskDescriptor& task, std::span<const CoreSpec> cores) {
  if (cores.empty()) throw SchedulingError("split_threads: no cores");
  const WorkUnits total = requirement_units(task);
  long double capacity_sum = 0.0L;
  for (const auto& c : cores) capacity_sum += c.capacity;

  std::vector<ThreadChunk> chunks;
  WorkUnits assigned = 0;
  for (const auto& c : cores) {
    const long double exact = static_cast<long double>(total) * c.capacity / capacity_sum;
    const long double nearest = std::round(exact);
    WorkUnits base = std::fabs(exact - nearest) < 1e-6L ? static_cast<WorkUnits>(nearest)
                                                          : static_cast<WorkUnits>(std::floor(exact));
    base = std::clamp<WorkUnits>(base, 0, total - assigned);
    chunks.push_back({c.core_id, base});
    assigned += base;
  }

  // Hand out the remainder one unit at a time to whichever core would then
  // finish earliest.
  for (WorkUnits left = total - assigned; left > 0; --left) {
    std::size_t pick = 0;
    for (std::size_t i = 1; i < chunks.size(); ++i) {
      const long double lhs = static_cast<long double>(chunks[i].units + 1) * cores[pick].capacity;
      const long double rhs = static_cast<long double>(chunks[pick].units + 1) * cores[i].capacity;
      if (lhs < rhs || (lhs == rhs && cores[i].core_id < cores[pick].core_id)) pick = i;
    }
    ++chunks[pick].units;
  }
  return chunks;
}

namespace {

std::string units_detail(std::string_view prefix, WorkUnits units) {
  return std::string(prefix) + "units=" + std::to_string(units);
}

}  // namespace

SwitchOutcome switch_core(Platform& platform, const TaskDescriptor& task, CoreId from, CoreId to,
                          SimTime t, WorkUnits remaining, const SchedulingPolicy& policy) {
  SwitchOutcome out;
  const auto& from_state = platform.state(from);
  if (from_state.mode != CoreMode::busy || from_state.current_task != task.task_id) {
    throw SchedulingError("switch_core: " + task.task_id + " is not running on core " +
                          std::to_string(from));
  }
  if (from == to) {
    out.resume = t;
    out.finish = t + execution_time(remaining, platform.core(from));
    return out;
  }
  if (platform.mode(to) == CoreMode::busy) {
    throw SchedulingError("switch_core: target core " + std::to_string(to) + " is busy");
  }

  out.events.push_back({t, EventKind::switch_core, task.task_id, from,
                        "to=" + std::to_string(to) + " units_left=" + std::to_string(remaining)});

  if (policy.gate_idle_cores) {
    platform.set_mode(from, CoreMode::off, t);
    out.events.push_back({t, EventKind::power_off, "", from, ""});
  } else {
    platform.set_mode(from, CoreMode::idle, t);
  }

  SimTime resume = t + switch_time(task.state_mb, platform.config());
  if (platform.mode(to) == CoreMode::off) {
    platform.set_mode(to, CoreMode::idle, t);
    out.events.push_back({t, EventKind::power_on, "", to, ""});
    resume += from_seconds(platform.core(to).switch_on_latency);
  }
  platform.set_mode(to, CoreMode::busy, resume, task.task_id);
  out.events.push_back({resume, EventKind::start, task.task_id, to, units_detail("resume ", remaining)});
  out.resume = resume;
  out.finish = resume + execution_time(remaining, platform.core(to));
  return out;
}

namespace {

struct ThreadRun {
  CoreId core = 0;
  WorkUnits units = 0;
  std::size_t first = 0;
  std::size_t last = 0;
  std::vector<KeyValue> output;
};

struct TaskRun {
  SimTime submit{0};
  bool threaded = false;
  bool finished = false;
  std::vector<ThreadRun> threads;
  std::size_t threads_left = 0;
  std::vector<KeyValue> output;
};

struct Segment {
  std::size_t task = 0;
  std::optional<std::size_t> thread;
  SimTime start{0};
  SimTime end{0};
  WorkUnits units = 0;
};

/// One batch of tasks driven to completion on the platform. Dispatch either
/// decides placements as cores free up (recording them) or replays a
/// precomputed queue.
class Simulation {
 public:
  Simulation(Platform& platform, const SchedulingPolicy& policy, std::span<const SchedTask> tasks,
             bool execute_bodies)
      : platform_(platform),
        policy_(policy),
        tasks_(tasks),
        execute_(execute_bodies),
        runs_(tasks.size()),
        segments_(platform.core_count()),
        ready_at_(platform.core_count(), SimTime{0}) {
    std::set<std::string_view> ids;
    for (const auto& t : tasks_) {
      t.descriptor.validate();
      if (!ids.insert(t.descriptor.task_id).second) {
        throw ConfigError("duplicate task id " + t.descriptor.task_id);
      }
    }
  }

  void run(const StaticQueue* queue, bool allow_switching) {
    queue_ = queue;
    now_ = platform_.now();
    if (tasks_.empty()) return;

    for (std::size_t i = 0; i < tasks_.size(); ++i) {
      runs_[i].submit = now_;
      events_.push_back({now_, EventKind::submit, id(i), std::nullopt, ""});
      if (!queue_) waiting_.push_back(i);
    }
    if (!policy_.gate_idle_cores) {
      for (CoreId c = 0; c < platform_.core_count(); ++c) {
        if (platform_.mode(c) == CoreMode::off) power_on(c);
      }
    }
    dispatch();
    if (policy_.gate_idle_cores) {
      for (CoreId c = 0; c < platform_.core_count(); ++c) {
        if (!segments_[c] && platform_.mode(c) == CoreMode::idle && ready_at_[c] <= now_) {
          power_off(c);
        }
      }
    }

    while (true) {
      std::optional<SimTime> next;
      for (const auto& seg : segments_) {
        if (seg && (!next || seg->end < *next)) next = seg->end;
      }
      if (!next) break;
      now_ = *next;

      std::vector<CoreId> released;
      for (CoreId c = 0; c < segments_.size(); ++c) {
        if (segments_[c] && segments_[c]->end == now_) {
          complete(c);
          released.push_back(c);
        }
      }
      dispatch();
      if (allow_switching) try_switches(released);
      for (CoreId c : released) {
        if (!segments_[c] && policy_.gate_idle_cores && platform_.mode(c) == CoreMode::idle) {
          power_off(c);
        }
      }
    }

    if (!waiting_.empty() || (queue_ && queue_pos_ < queue_->size())) {
      throw SchedulingError("scheduler stalled with undispatched tasks");
    }
    platform_.advance_to(std::max(platform_.now(), now_));
  }

  std::vector<ScheduleEvent> sorted_events() const {
    auto events = events_;
    std::sort(events.begin(), events.end(), event_order);
    return events;
  }

  std::vector<std::vector<KeyValue>> take_results() {
    std::vector<std::vector<KeyValue>> out;
    out.reserve(runs_.size());
    for (auto& r : runs_) out.push_back(std::move(r.output));
    return out;
  }

  const StaticQueue& dispatch_log() const { return log_; }

 private:
  const std::string& id(std::size_t task) const { return tasks_[task].descriptor.task_id; }

  std::vector<CoreId> free_cores() const {
    std::vector<CoreId> out;
    for (CoreId c = 0; c < segments_.size(); ++c) {
      if (!segments_[c]) out.push_back(c);
    }
    return out;
  }

  void power_on(CoreId c) {
    platform_.set_mode(c, CoreMode::idle, now_);
    events_.push_back({now_, EventKind::power_on, "", c, ""});
    ready_at_[c] = now_ + from_seconds(platform_.core(c).switch_on_latency);
  }

  void power_off(CoreId c) {
    platform_.set_mode(c, CoreMode::off, now_);
    events_.push_back({now_, EventKind::power_off, "", c, ""});
  }

  void claim(CoreId c, std::size_t task, std::optional<std::size_t> thread, WorkUnits units) {
    if (platform_.mode(c) == CoreMode::off) power_on(c);
    const SimTime start = std::max(now_, ready_at_[c]);
    const SimTime end = start + execution_time(units, platform_.core(c));
    platform_.set_mode(c, CoreMode::busy, start, id(task));
    events_.push_back({start, thread ? EventKind::thread_start : EventKind::start, id(task), c,
                       units_detail("", units)});
    segments_[c] = Segment{task, thread, start, end, units};
  }

  void launch(const QueueEntry& entry) {
    auto& run = runs_[entry.task_index];
    run.threaded = entry.threaded;
    if (!entry.threaded) {
      const auto& p = entry.placements.front();
      claim(p.core, entry.task_index, std::nullopt, p.units);
      return;
    }
    const std::size_t records = tasks_[entry.task_index].record_count;
    WorkUnits total = 0;
    for (const auto& p : entry.placements) total += p.units;
    WorkUnits prefix = 0;
    std::size_t first = 0;
    for (std::size_t i = 0; i < entry.placements.size(); ++i) {
      prefix += entry.placements[i].units;
      std::size_t last = records;
      if (i + 1 < entry.placements.size() && total > 0) {
        last = static_cast<std::size_t>(static_cast<unsigned __int128>(records) *
                                        static_cast<unsigned __int128>(prefix) /
                                        static_cast<unsigned __int128>(total));
      }
      run.threads.push_back({entry.placements[i].core, entry.placements[i].units, first, last, {}});
      first = last;
    }
    run.threads_left = run.threads.size();
    for (std::size_t i = 0; i < run.threads.size(); ++i) {
      claim(run.threads[i].core, entry.task_index, i, run.threads[i].units);
    }
  }

  void dispatch() {
    if (queue_) {
      while (queue_pos_ < queue_->size()) {
        const auto& entry = (*queue_)[queue_pos_];
        const bool ready = std::all_of(entry.placements.begin(), entry.placements.end(),
                                       [&](const ThreadChunk& p) { return !segments_.at(p.core); });
        if (!ready) break;
        launch(entry);
        ++queue_pos_;
      }
      return;
    }

    while (!waiting_.empty()) {
      const auto free = free_cores();
      if (free.empty()) break;
      const std::size_t task = waiting_.front();
      const auto& desc = tasks_[task].descriptor;
      std::vector<CoreSpec> specs;
      for (CoreId c : free) specs.push_back(platform_.core(c));

      QueueEntry entry{task, false, {}};
      if (desc.threading == Threading::multi && classify(desc, free.size()) == Threading::multi) {
        entry.threaded = true;
        entry.placements = split_threads(desc, specs);
      } else {
        std::optional<double> remaining;
        if (desc.deadline) remaining = *desc.deadline - to_seconds(now_ - runs_[task].submit);
        const CoreId core = select_core(desc, specs, policy_, remaining);
        entry.placements.push_back({core, requirement_units(desc)});
      }
      launch(entry);
      log_.push_back(std::move(entry));
      waiting_.pop_front();
    }
  }

  std::vector<KeyValue> run_body(std::size_t task, std::size_t first, std::size_t last) {
    const auto& body = tasks_[task].body;
    if (!execute_ || !body) return {};
    try {
      return body(first, last);
    } catch (const std::exception& e) {
      ScheduleTrace partial;
      partial.events = sorted_events();
      partial.makespan = compute_makespan(partial.events);
      throw TaskFailure(id(task), e.what(), std::move(partial), platform_.ledger());
    }
  }

  void complete(CoreId c) {
    const Segment seg = *segments_[c];
    segments_[c].reset();
    platform_.set_mode(c, CoreMode::idle, now_);
    auto& run = runs_[seg.task];

    if (!seg.thread) {
      events_.push_back({now_, EventKind::end, id(seg.task), c, ""});
      run.output = run_body(seg.task, 0, tasks_[seg.task].record_count);
      run.finished = true;
      return;
    }

    auto& thread = run.threads[*seg.thread];
    events_.push_back({now_, EventKind::thread_end, id(seg.task), c, ""});
    thread.output = run_body(seg.task, thread.first, thread.last);
    if (--run.threads_left == 0) {
      for (auto& t : run.threads) {
        run.output.insert(run.output.end(), std::make_move_iterator(t.output.begin()),
                          std::make_move_iterator(t.output.end()));
        t.output.clear();
      }
      events_.push_back({now_, EventKind::combine, id(seg.task), std::nullopt,
                         "threads=" + std::to_string(run.threads.size())});
      events_.push_back({now_, EventKind::end, id(seg.task), std::nullopt, ""});
      run.finished = true;
    }
  }

  // A strictly faster core that just became free takes over a running
  // single-threaded task when the time saved beats the switch overhead.
  // Tasks placed at this instant keep their placement.
  void try_switches(std::vector<CoreId> released) {
    std::sort(released.begin(), released.end(), [&](CoreId a, CoreId b) {
      const double ca = platform_.core(a).capacity;
      const double cb = platform_.core(b).capacity;
      return ca != cb ? ca > cb : a < b;
    });
    for (CoreId target : released) {
      if (segments_[target]) continue;
      const auto& target_spec = platform_.core(target);

      struct Candidate {
        CoreId from;
        SimTime saving;
        WorkUnits remaining;
      };
      std::optional<Candidate> best;
      for (CoreId from = 0; from < segments_.size(); ++from) {
        const auto& seg = segments_[from];
        if (!seg || seg->thread || seg->start >= now_ || seg->end <= now_) continue;
        const auto& from_spec = platform_.core(from);
        if (!(from_spec.capacity < target_spec.capacity)) continue;

        const auto& desc = tasks_[seg->task].descriptor;
        const WorkUnits done = std::min(seg->units, work_done(now_ - seg->start, from_spec));
        const WorkUnits remaining = seg->units - done;
        SimTime overhead = switch_time(desc.state_mb, platform_.config());
        if (platform_.mode(target) == CoreMode::off) {
          overhead += from_seconds(target_spec.switch_on_latency);
        }
        overhead += std::max(SimTime{0}, ready_at_[target] - now_);
        const SimTime saving = (seg->end - now_) - (overhead + execution_time(remaining, target_spec));
        if (saving <= SimTime{0}) continue;
        if (!best || saving > best->saving ||
            (saving == best->saving && seg->task < segments_[best->from]->task)) {
          best = Candidate{from, saving, remaining};
        }
      }
      if (!best) continue;

      const Segment seg = *segments_[best->from];
      const auto& desc = tasks_[seg.task].descriptor;
      auto outcome = switch_core(platform_, desc, best->from, target, now_, best->remaining, policy_);
      events_.insert(events_.end(), outcome.events.begin(), outcome.events.end());
      segments_[best->from].reset();
      segments_[target] = Segment{seg.task, std::nullopt, outcome.resume, outcome.finish,
                                  best->remaining};
    }
  }

  Platform& platform_;
  const SchedulingPolicy& policy_;
  std::span<const SchedTask> tasks_;
  bool execute_;
  std::vector<TaskRun> runs_;
  std::vector<std::optional<Segment>> segments_;
  std::vector<SimTime> ready_at_;
  std::deque<std::size_t> waiting_;
  const StaticQueue* queue_ = nullptr;
  std::size_t queue_pos_ = 0;
  StaticQueue log_;
  std::vector<ScheduleEvent> events_;
  SimTime now_{0};
};

std::vector<SchedTask> bodiless(std::span<const TaskDescriptor> tasks) {
  std::vector<SchedTask> out;
  out.reserve(tasks.size());
  for (const auto& t : tasks) out.push_back({t, 0, {}});
  return out;
}

}  // namespace

StaticQueue build_static_queue(std::span<const TaskDescriptor> tasks, const Platform& platform,
                               const SchedulingPolicy& policy) {
  Platform forward = platform;
  const auto sched_tasks = bodiless(tasks);
  Simulation sim(forward, policy, sched_tasks, false);
  sim.run(nullptr, false);
  return sim.dispatch_log();
}

MbScheduler::MbScheduler(Platform& platform, SchedulingPolicy policy)
    : platform_(platform), policy_(policy) {}

std::vector<std::vector<KeyValue>> MbScheduler::run(std::span<const SchedTask> tasks) {
  StaticQueue queue;
  if (policy_.switching == Switching::static_queue) {
    std::vector<TaskDescriptor> descriptors;
    descriptors.reserve(tasks.size());
    for (const auto& t : tasks) descriptors.push_back(t.descriptor);
    queue = build_static_queue(descriptors, platform_, policy_);
  }

  Simulation sim(platform_, policy_, tasks, true);
  try {
    if (policy_.switching == Switching::static_queue) {
      sim.run(&queue, false);
    } else {
      sim.run(nullptr, true);
    }
  } catch (const TaskFailure& failure) {
    ScheduleTrace partial = trace_;
    partial.append(failure.trace());
    throw TaskFailure(failure.task_id(), failure.what(), std::move(partial), failure.ledger());
  }

  ScheduleTrace batch;
  batch.events = sim.sorted_events();
  batch.makespan = compute_makespan(batch.events);
  trace_.append(batch);
  return sim.take_results();
}

ScheduleOutcome schedule(std::span<const SchedTask> tasks, Platform& platform,
                         const SchedulingPolicy& policy) {
  MbScheduler scheduler(platform, policy);
  ScheduleOutcome out;
  out.results = scheduler.run(tasks);
  out.trace = scheduler.trace();
  out.ledger = platform.ledger();
  return out;
}

ScheduleOutcome schedule(std::span<const TaskDescriptor> tasks, Platform& platform,
                         const SchedulingPolicy& policy) {
  const auto sched_tasks = bodiless(tasks);
  return schedule(std::span<const SchedTask>(sched_tasks), platform, policy);
}

}  // namespace basketforge
