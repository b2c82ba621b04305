#include "basketforge/mapreduce.hpp"

#include <algorithm>

#include "basketforge/errors.hpp"

namespace basketforge {

namespace {

double bytes_to_mb(std::size_t bytes) { return static_cast<double>(bytes) / 1e6; }

void validate(const JobSpec& job) {
  if (job.n_partitions == 0) throw ConfigError(job.job_name + ": n_partitions must be >= 1");
  if (!job.map_fn || !job.reduce_fn) throw ConfigError(job.job_name + ": map and reduce required");
  if (!(job.map_cost_factor > 0.0) || !(job.reduce_cost_factor > 0.0)) {
    throw ConfigError(job.job_name + ": cost factors must be positive");
  }
}

std::string task_id(const JobSpec& job, std::string_view phase, std::size_t index) {
  return job.job_name + "/" + std::string(phase) + "/" + std::to_string(index);
}

}  // namespace

std::vector<std::size_t> balanced_counts(std::size_t items, std::size_t parts) {
  if (parts == 0) throw ConfigError("partition count must be >= 1");
  std::vector<std::size_t> counts(parts, items / parts);
  for (std::size_t i = 0; i < items % parts; ++i) ++counts[i];
  return counts;
}

std::vector<InputSplit> partition_input(const TransactionDataset& dataset, std::size_t n) {
  const auto counts = balanced_counts(dataset.size(), n);
  std::vector<InputSplit> splits;
  splits.reserve(n);
  auto it = dataset.transactions().begin();
  for (std::size_t i = 0; i < n; ++i) {
    InputSplit split{i, {it, it + static_cast<std::ptrdiff_t>(counts[i])}, 0};
    for (const auto& t : split.records) split.byte_size += serialized_size(t);
    it += static_cast<std::ptrdiff_t>(counts[i]);
    splits.push_back(std::move(split));
  }
  return splits;
}

std::vector<std::vector<KeyValue>> run_map_phase(const JobSpec& job,
                                                 std::span<const InputSplit> splits,
                                                 MbScheduler& scheduler) {
  std::vector<SchedTask> tasks;
  tasks.reserve(splits.size());
  for (const auto& split : splits) {
    const double mb = bytes_to_mb(split.byte_size);
    SchedTask task;
    task.descriptor = {task_id(job, "map", split.split_index), mb, job.map_cost_factor,
                       Threading::multi, mb, std::nullopt};
    task.record_count = split.records.size();
    task.body = [&job, &split](std::size_t first, std::size_t last) {
      std::vector<KeyValue> out;
      for (std::size_t r = first; r < last; ++r) {
        const auto& record = split.records[r];
        try {
          auto emitted = job.map_fn(record, job.broadcast);
          out.insert(out.end(), std::make_move_iterator(emitted.begin()),
                     std::make_move_iterator(emitted.end()));
        } catch (const std::exception& e) {
          throw std::runtime_error("split " + std::to_string(split.split_index) + ", record " +
                                   std::to_string(record.id) + ": " + e.what());
        }
      }
      return out;
    };
    tasks.push_back(std::move(task));
  }

  try {
    return scheduler.run(tasks);
  } catch (const TaskFailure& failure) {
    throw JobError("job " + job.job_name + ": " + failure.what(), failure.trace(),
                   failure.ledger());
  }
}

std::vector<KeyGroup> shuffle(std::span<const std::vector<KeyValue>> map_outputs) {
  std::map<std::string, std::vector<std::string>> grouped;
  for (const auto& split_output : map_outputs) {
    for (const auto& kv : split_output) grouped[kv.key].push_back(kv.value);
  }
  return {std::make_move_iterator(grouped.begin()), std::make_move_iterator(grouped.end())};
}

std::vector<KeyValue> run_reduce_phase(const JobSpec& job, std::span<const KeyGroup> groups,
                                       MbScheduler& scheduler) {
  const std::size_t n_tasks = std::min(job.n_partitions, groups.size());
  std::vector<SchedTask> tasks;
  if (n_tasks > 0) {
    const auto counts = balanced_counts(groups.size(), n_tasks);
    std::size_t offset = 0;
    for (std::size_t i = 0; i < n_tasks; ++i) {
      const auto range = groups.subspan(offset, counts[i]);
      std::size_t bytes = 0;
      for (const auto& [key, values] : range) {
        bytes += key.size();
        for (const auto& v : values) bytes += v.size();
      }
      const double mb = bytes_to_mb(bytes);
      SchedTask task;
      task.descriptor = {task_id(job, "reduce", i), mb, job.reduce_cost_factor, Threading::single,
                         mb, std::nullopt};
      task.record_count = range.size();
      task.body = [&job, range](std::size_t first, std::size_t last) {
        std::vector<KeyValue> out;
        for (std::size_t g = first; g < last; ++g) {
          const auto& [key, values] = range[g];
          try {
            auto emitted = job.reduce_fn(key, values, job.broadcast);
            out.insert(out.end(), std::make_move_iterator(emitted.begin()),
                       std::make_move_iterator(emitted.end()));
          } catch (const std::exception& e) {
            throw std::runtime_error("key '" + key + "': " + e.what());
          }
        }
        return out;
      };
      tasks.push_back(std::move(task));
      offset += counts[i];
    }
  }

  std::vector<std::vector<KeyValue>> results;
  try {
    results = scheduler.run(tasks);
  } catch (const TaskFailure& failure) {
    throw JobError("job " + job.job_name + ": " + failure.what(), failure.trace(),
                   failure.ledger());
  }
  std::vector<KeyValue> outputs;
  for (auto& r : results) {
    outputs.insert(outputs.end(), std::make_move_iterator(r.begin()),
                   std::make_move_iterator(r.end()));
  }
  std::sort(outputs.begin(), outputs.end());
  return outputs;
}

JobResult run_job(const JobSpec& job, const TransactionDataset& dataset, Platform& platform,
                  const SchedulingPolicy& policy) {
  validate(job);
  MbScheduler scheduler(platform, policy);
  const auto splits = partition_input(dataset, job.n_partitions);
  const auto map_outputs = run_map_phase(job, splits, scheduler);
  const auto groups = shuffle(map_outputs);
  JobResult result;
  result.outputs = run_reduce_phase(job, groups, scheduler);
  result.trace = scheduler.trace();
  result.ledger = platform.ledger();
  return result;
}

}  // namespace basketforge
