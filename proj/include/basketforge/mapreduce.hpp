#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "basketforge/basket.hpp"
#include "basketforge/key_value.hpp"
#include "basketforge/platform.hpp"
#include "basketforge/scheduler.hpp"

namespace basketforge {

/// Read-only side table published to every task of a job.
using Broadcast = std::map<std::string, std::string, std::less<>>;

using MapFn = std::function<std::vector<KeyValue>(const Transaction& record, const Broadcast&)>;
using ReduceFn = std::function<std::vector<KeyValue>(
    const std::string& key, std::span<const std::string> values, const Broadcast&)>;

struct InputSplit {
  std::size_t split_index = 0;
  std::vector<Transaction> records;
  std::size_t byte_size = 0;
};

struct JobSpec {
  std::string job_name;
  std::size_t n_partitions = 1;
  MapFn map_fn;
  ReduceFn reduce_fn;
  Broadcast broadcast;
  double map_cost_factor = 1.0;
  double reduce_cost_factor = 1.0;
};

struct JobResult {
  std::vector<KeyValue> outputs;  // sorted by (key, value)
  ScheduleTrace trace;
  EnergyLedger ledger;
};

/// A job aborted. The trace and ledger cover everything up to the failure.
class JobError : public std::runtime_error {
 public:
  JobError(const std::string& message, ScheduleTrace trace, EnergyLedger ledger)
      : std::runtime_error(message), trace_(std::move(trace)), ledger_(std::move(ledger)) {}

  const ScheduleTrace& trace() const noexcept { return trace_; }
  const EnergyLedger& ledger() const noexcept { return ledger_; }

 private:
  ScheduleTrace trace_;
  EnergyLedger ledger_;
};

/// Sizes of `parts` contiguous blocks over `items`: they differ by at most
/// one and the larger blocks come first.
std::vector<std::size_t> balanced_counts(std::size_t items, std::size_t parts);

std::vector<InputSplit> partition_input(const TransactionDataset& dataset, std::size_t n);

/// One multi-capable map task per split. Output per split keeps record order.
std::vector<std::vector<KeyValue>> run_map_phase(const JobSpec& job,
                                                 std::span<const InputSplit> splits,
                                                 MbScheduler& scheduler);

using KeyGroup = std::pair<std::string, std::vector<std::string>>;

/// Groups by key in ascending key order; values keep (split, emission) order.
std::vector<KeyGroup> shuffle(std::span<const std::vector<KeyValue>> map_outputs);

/// Packs groups into min(n_partitions, group count) single-threaded reduce
/// tasks over contiguous key ranges.
std::vector<KeyValue> run_reduce_phase(const JobSpec& job, std::span<const KeyGroup> groups,
                                       MbScheduler& scheduler);

/// partition -> map -> shuffle -> reduce, the reduce phase starting only
/// once every map task has finished.
JobResult run_job(const JobSpec& job, const TransactionDataset& dataset, Platform& platform,
                  const SchedulingPolicy& policy);

}  // namespace basketforge
