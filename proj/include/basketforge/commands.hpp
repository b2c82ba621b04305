#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "basketforge/scheduler.hpp"

namespace basketforge {

enum ExitCode : int {
  kExitOk = 0,
  kExitInputError = 2,  // unreadable/malformed input or bad configuration
  kExitInternal = 3,    // invariant failure or aborted job
};

/// Environment variable consulted for the platform config when no flag is given.
inline constexpr const char* kPlatformEnvVar = "BASKETFORGE_PLATFORM";

struct RunConfig {
  std::filesystem::path input_path;
  double min_support = 0.5;
  double min_confidence = 0.5;
  std::optional<std::filesystem::path> platform_config_path;
  Objective objective = Objective::fastest;
  Switching switching = Switching::dynamic;
  bool gate_idle_cores = true;
  std::optional<std::size_t> n_partitions;
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
};

struct GenConfig {
  std::size_t n_transactions = 100;
  std::size_t n_items = 12;
  double density = 4.0;
  std::uint64_t seed = 0;
  std::filesystem::path output_path;
};

/// Mines the input and writes rules.jsonl, levels.json, trace.jsonl,
/// ledger.json and summary.json into output_dir. Files appear only once
/// all of them have been written.
int cmd_mine(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Prints per-core time and energy, makespan, switch count and phase timings.
int cmd_report(const std::filesystem::path& trace_path, const std::filesystem::path& ledger_path,
               std::ostream& out, std::ostream& err);

int cmd_gen(const GenConfig& config, std::ostream& out, std::ostream& err);

/// Synthetic basket text. Each transaction draws its size from
/// Binomial(n_items, density / n_items) clamped to [1, n_items], then that
/// many distinct items uniformly. Deterministic per seed.
std::string generate_baskets(std::size_t n_transactions, std::size_t n_items, double density,
                             std::uint64_t seed);

}  // namespace basketforge
