#include "basketforge/trace_io.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "basketforge/errors.hpp"
#include "json.hpp"

namespace basketforge {

namespace {

using ordered_json = nlohmann::ordered_json;
using nlohmann::json;

ScheduleEvent event_from_json(const json& obj) {
  if (!obj.is_object()) throw std::invalid_argument("expected an object");
  ScheduleEvent e;
  e.time = from_seconds(obj.at("time").get<double>());
  const auto kind = parse_event_kind(obj.at("kind").get<std::string>());
  if (!kind) throw std::invalid_argument("unknown event kind");
  e.kind = *kind;
  e.task_id = obj.at("task").get<std::string>();
  const auto& core = obj.at("core");
  if (!core.is_null()) e.core = core.get<CoreId>();
  e.detail = obj.at("detail").get<std::string>();
  return e;
}

std::pair<std::string, std::string> job_and_phase(const std::string& task_id) {
  const auto last = task_id.rfind('/');
  if (last == std::string::npos || last == 0) return {task_id, ""};
  const auto mid = task_id.rfind('/', last - 1);
  if (mid == std::string::npos) return {task_id.substr(0, last), ""};
  return {task_id.substr(0, mid), task_id.substr(mid + 1, last - mid - 1)};
}

}  // namespace

std::string trace_to_jsonl(const ScheduleTrace& trace) {
  std::string out;
  for (const auto& e : trace.events) {
    ordered_json obj;
    obj["time"] = to_seconds(e.time);
    obj["kind"] = std::string(to_string(e.kind));
    obj["task"] = e.task_id;
    obj["core"] = e.core ? ordered_json(*e.core) : ordered_json(nullptr);
    obj["detail"] = e.detail;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

ScheduleTrace parse_trace_jsonl(std::istream& in) {
  ScheduleTrace trace;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      trace.events.push_back(event_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw ParseError(line_no, std::string("malformed trace event: ") + e.what());
    }
  }
  trace.makespan = compute_makespan(trace.events);
  return trace;
}

ScheduleTrace parse_trace_jsonl(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_trace_jsonl(in);
}

std::string ledger_to_json(const EnergyLedger& ledger) {
  ordered_json doc;
  doc["end_time"] = to_seconds(ledger.end_time);
  doc["total_joules"] = ledger.total_joules;
  doc["cores"] = ordered_json::array();
  for (CoreId c = 0; c < ledger.core_joules.size(); ++c) {
    ordered_json core;
    core["core"] = c;
    core["joules"] = ledger.core_joules[c];
    core["intervals"] = ordered_json::array();
    for (const auto& iv : ledger.intervals) {
      if (iv.core != c) continue;
      core["intervals"].push_back({{"mode", std::string(to_string(iv.mode))},
                                   {"t_start", to_seconds(iv.t_start)},
                                   {"t_end", to_seconds(iv.t_end)},
                                   {"watts", iv.watts},
                                   {"joules", iv.joules}});
    }
    doc["cores"].push_back(std::move(core));
  }
  return doc.dump(2) + "\n";
}

EnergyLedger parse_ledger_json(std::string_view text) {
  EnergyLedger ledger;
  try {
    const auto doc = json::parse(text);
    ledger.end_time = from_seconds(doc.at("end_time").get<double>());
    ledger.total_joules = doc.at("total_joules").get<double>();
    for (const auto& core : doc.at("cores")) {
      const auto id = core.at("core").get<CoreId>();
      if (id != ledger.core_joules.size()) throw std::invalid_argument("cores out of order");
      ledger.core_joules.push_back(core.at("joules").get<double>());
      for (const auto& iv : core.at("intervals")) {
        const auto mode = parse_core_mode(iv.at("mode").get<std::string>());
        if (!mode) throw std::invalid_argument("unknown core mode");
        ledger.intervals.push_back({id, *mode, from_seconds(iv.at("t_start").get<double>()),
                                    from_seconds(iv.at("t_end").get<double>()),
                                    iv.at("watts").get<double>(), iv.at("joules").get<double>()});
      }
    }
  } catch (const std::exception& e) {
    throw ParseError(0, std::string("malformed ledger: ") + e.what());
  }
  return ledger;
}

RunReport build_report(const ScheduleTrace& trace, const EnergyLedger& ledger) {
  RunReport report;
  for (CoreId c = 0; c < ledger.core_joules.size(); ++c) {
    report.cores.push_back({c, time_in_mode(ledger, c, CoreMode::busy),
                            time_in_mode(ledger, c, CoreMode::idle),
                            time_in_mode(ledger, c, CoreMode::off), ledger.core_joules[c]});
  }
  report.total_joules = ledger.total_joules;
  report.makespan_seconds = to_seconds(compute_makespan(trace.events));

  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (const auto& e : trace.events) {
    if (e.kind == EventKind::switch_core) ++report.switch_count;
    if (e.kind != EventKind::submit && e.kind != EventKind::end) continue;
    const auto key = job_and_phase(e.task_id);
    auto [it, inserted] = index.try_emplace(key, report.phases.size());
    if (inserted) {
      report.phases.push_back({key.first, key.second, to_seconds(e.time), to_seconds(e.time), 0});
    }
    auto& phase = report.phases[it->second];
    if (e.kind == EventKind::submit) {
      ++report.task_count;
      ++phase.tasks;
      phase.start_seconds = std::min(phase.start_seconds, to_seconds(e.time));
    } else {
      phase.end_seconds = std::max(phase.end_seconds, to_seconds(e.time));
    }
  }
  return report;
}

std::string format_report(const RunReport& report) {
  std::ostringstream out;
  char buf[160];
  out << "tasks: " << report.task_count << "\n";
  std::snprintf(buf, sizeof buf, "makespan: %.6f s\n", report.makespan_seconds);
  out << buf;
  out << "switches: " << report.switch_count << "\n";
  std::snprintf(buf, sizeof buf, "total energy: %.6f J\n", report.total_joules);
  out << buf;
  out << "\ncore      busy_s      idle_s       off_s    energy_J\n";
  for (const auto& c : report.cores) {
    std::snprintf(buf, sizeof buf, "%4zu %11.6f %11.6f %11.6f %11.6f\n", c.core, c.busy_seconds,
                  c.idle_seconds, c.off_seconds, c.joules);
    out << buf;
  }
  if (!report.phases.empty()) {
    out << "\njob/phase                          tasks     start_s       end_s\n";
    for (const auto& p : report.phases) {
      const std::string name = p.phase.empty() ? p.job : p.job + "/" + p.phase;
      std::snprintf(buf, sizeof buf, "%-34s %5zu %11.6f %11.6f\n", name.c_str(), p.tasks,
                    p.start_seconds, p.end_seconds);
      out << buf;
    }
  }
  return out.str();
}

}  // namespace basketforge
