#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "basketforge/basket.hpp"
#include "basketforge/platform.hpp"
#include "basketforge/scheduler.hpp"

namespace basketforge {

struct FrequentLevel {
  std::size_t k = 0;
  std::map<Itemset, std::uint64_t> entries;

  bool empty() const noexcept { return entries.empty(); }
  bool operator==(const FrequentLevel&) const = default;
};

/// Per-phase algorithm weights handed to the scheduler. They shape traces
/// and energy only, never the mined output.
struct CostFactors {
  double frequency_map = 1.0;
  double candidate_map_base = 1.0;
  double candidate_map_per_level = 0.25;  // added per level above 1
  double rule_map = 1.5;
  double reduce = 0.5;

  double candidate_map(std::size_t k) const {
    return candidate_map_base + candidate_map_per_level * static_cast<double>(k - 1);
  }
};

struct PipelineOptions {
  std::optional<std::size_t> n_partitions;  // defaults to the platform's core count
  CostFactors costs;
};

struct MiningResult {
  std::vector<FrequentLevel> levels;  // k = 1..K, no empty level stored
  std::vector<AssociationRule> rules;  // canonical order
  MiningParams params;
  std::size_t n_transactions = 0;
  ScheduleTrace trace;
  EnergyLedger ledger;
};

struct FrequencyJobResult {
  FrequentLevel counts;  // every item with its count
  FrequentLevel level;   // counts at or above the threshold
  ScheduleTrace trace;
};

struct LevelJobResult {
  FrequentLevel level;
  ScheduleTrace trace;
};

struct RulesJobResult {
  std::vector<AssociationRule> rules;
  ScheduleTrace trace;
};

/// Step 1: <item, count> per item, summed, then thresholded into level 1.
FrequencyJobResult job_frequency(const TransactionDataset& dataset, const MiningParams& params,
                                 Platform& platform, const SchedulingPolicy& policy,
                                 const PipelineOptions& options = {});

/// Prefix join of level k-1 with itself, minus candidates that have an
/// infrequent (k-1)-subset. Sorted and duplicate-free.
std::vector<Itemset> generate_candidates(const FrequentLevel& prev);

/// Step 2: count the level-k candidates over the transactions and keep the
/// frequent ones. `prev` must be level k-1 and non-empty.
LevelJobResult job_candidates(std::size_t k, const FrequentLevel& prev,
                              const TransactionDataset& dataset, const MiningParams& params,
                              Platform& platform, const SchedulingPolicy& policy,
                              const PipelineOptions& options = {});

/// Step 3: rules X -> Z\X over every frequent Z with |Z| >= 2, filtered by
/// confidence in the mapper against the broadcast support table.
RulesJobResult job_rules(const std::vector<FrequentLevel>& levels, const MiningParams& params,
                         std::size_t n_transactions, Platform& platform,
                         const SchedulingPolicy& policy, const PipelineOptions& options = {});

/// The three steps end to end on one platform.
MiningResult mine(const TransactionDataset& dataset, const MiningParams& params,
                  Platform& platform, const SchedulingPolicy& policy,
                  const PipelineOptions& options = {});

inline constexpr std::size_t kReferenceUniverseLimit = 20;

/// Sequential exhaustive miner used as a test oracle. Refuses universes
/// larger than kReferenceUniverseLimit items.
MiningResult mine_reference(const TransactionDataset& dataset, const MiningParams& params);

/// One JSON object per line: {antecedent, consequent, support, confidence, count}.
std::string rules_to_jsonl(const std::vector<AssociationRule>& rules);

/// {"1": [{items, count}, ...], "2": ...}
std::string levels_to_json(const std::vector<FrequentLevel>& levels);

}  // namespace basketforge
