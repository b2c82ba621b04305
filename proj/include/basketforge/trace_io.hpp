#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "basketforge/platform.hpp"
#include "basketforge/scheduler.hpp"

namespace basketforge {

/// One JSON object per line: {time, kind, task, core, detail}. Times are
/// seconds; core is null for core-less events.
std::string trace_to_jsonl(const ScheduleTrace& trace);

/// Throws ParseError naming the 1-based line of the first malformed event.
ScheduleTrace parse_trace_jsonl(std::istream& in);
ScheduleTrace parse_trace_jsonl(std::string_view text);

/// {end_time, total_joules, cores: [{core, joules, intervals: [...]}]}
std::string ledger_to_json(const EnergyLedger& ledger);
EnergyLedger parse_ledger_json(std::string_view text);

struct CoreUsage {
  CoreId core = 0;
  double busy_seconds = 0.0;
  double idle_seconds = 0.0;
  double off_seconds = 0.0;
  double joules = 0.0;
};

/// Wall span of one (job, phase) pair, keyed off task ids shaped
/// "<job>/<phase>/<index>".
struct PhaseTiming {
  std::string job;
  std::string phase;
  double start_seconds = 0.0;
  double end_seconds = 0.0;
  std::size_t tasks = 0;
};

struct RunReport {
  std::vector<CoreUsage> cores;
  std::vector<PhaseTiming> phases;
  std::size_t task_count = 0;
  std::size_t switch_count = 0;
  double makespan_seconds = 0.0;
  double total_joules = 0.0;
};

RunReport build_report(const ScheduleTrace& trace, const EnergyLedger& ledger);
std::string format_report(const RunReport& report);

}  // namespace basketforge
