#include "basketforge/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "basketforge/errors.hpp"
#include "basketforge/mapreduce.hpp"
#include "json.hpp"

namespace basketforge {

namespace {

constexpr std::string_view kFrequentPrefix = "f:";
constexpr std::string_view kCandidatePrefix = "c:";
constexpr std::string_view kSupportPrefix = "s:";
constexpr char kRuleSeparator = '\n';

std::uint64_t parse_count(std::string_view text) {
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw InvariantError("malformed count '" + std::string(text) + "'");
  }
  return value;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw InvariantError("malformed number '" + std::string(text) + "'");
  }
  return value;
}

const std::string& lookup(const Broadcast& table, const std::string& key) {
  const auto it = table.find(key);
  if (it == table.end()) throw InvariantError("broadcast table has no entry '" + key + "'");
  return it->second;
}

std::vector<KeyValue> sum_reducer(const std::string& key, std::span<const std::string> values,
                                  const Broadcast&) {
  std::uint64_t total = 0;
  for (const auto& v : values) total += parse_count(v);
  return {{key, std::to_string(total)}};
}

std::size_t partitions_for(const Platform& platform, const PipelineOptions& options) {
  const std::size_t n = options.n_partitions.value_or(platform.core_count());
  if (n == 0) throw ConfigError("n_partitions must be >= 1");
  return n;
}

// C(n, k), saturating at `cap` + 1.
std::uint64_t bounded_binomial(std::size_t n, std::size_t k, std::uint64_t cap) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  long double acc = 1.0L;
  for (std::size_t i = 1; i <= k; ++i) {
    acc = acc * static_cast<long double>(n - k + i) / static_cast<long double>(i);
    if (acc > static_cast<long double>(cap)) return cap + 1;
  }
  return static_cast<std::uint64_t>(std::llround(acc));
}

// Calls `visit` with each k-combination of `items`, in lexicographic order.
template <typename Visit>
void for_each_combination(const std::vector<Item>& items, std::size_t k, Visit&& visit) {
  if (k == 0 || k > items.size()) return;
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  std::vector<Item> chosen(k);
  while (true) {
    for (std::size_t i = 0; i < k; ++i) chosen[i] = items[idx[i]];
    visit(chosen);
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == items.size() - k + (i - 1)) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

FrequentLevel level_from_outputs(std::size_t k, const std::vector<KeyValue>& outputs) {
  FrequentLevel level{k, {}};
  for (const auto& kv : outputs) level.entries.emplace(Itemset::from_key(kv.key), parse_count(kv.value));
  return level;
}

FrequentLevel threshold(const FrequentLevel& counts, std::uint64_t min_count) {
  FrequentLevel level{counts.k, {}};
  for (const auto& [itemset, count] : counts.entries) {
    if (count >= min_count) level.entries.emplace(itemset, count);
  }
  return level;
}

}  // namespace

FrequencyJobResult job_frequency(const TransactionDataset& dataset, const MiningParams& params,
                                 Platform& platform, const SchedulingPolicy& policy,
                                 const PipelineOptions& options) {
  if (dataset.empty()) throw ConfigError("dataset has no transactions");
  params.validate();

  JobSpec job;
  job.job_name = "frequency";
  job.n_partitions = partitions_for(platform, options);
  job.map_cost_factor = options.costs.frequency_map;
  job.reduce_cost_factor = options.costs.reduce;
  job.map_fn = [](const Transaction& t, const Broadcast&) {
    std::vector<KeyValue> out;
    out.reserve(t.items.size());
    for (const auto& item : t.items) out.push_back({item, "1"});
    return out;
  };
  job.reduce_fn = sum_reducer;

  auto result = run_job(job, dataset, platform, policy);
  FrequencyJobResult out;
  out.counts = level_from_outputs(1, result.outputs);
  out.level = threshold(out.counts, absolute_support_threshold(params.min_support, dataset.size()));
  out.trace = std::move(result.trace);
  return out;
}

std::vector<Itemset> generate_candidates(const FrequentLevel& prev) {
  if (prev.k == 0) throw ConfigError("generate_candidates: level must have k >= 1");
  std::vector<const Itemset*> sets;
  for (const auto& [itemset, _] : prev.entries) sets.push_back(&itemset);

  const std::size_t prefix = prev.k - 1;
  auto same_prefix = [prefix](const Itemset& a, const Itemset& b) {
    return std::equal(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(prefix), b.begin());
  };

  std::vector<Itemset> out;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (std::size_t j = i + 1; j < sets.size() && same_prefix(*sets[i], *sets[j]); ++j) {
      Itemset candidate = sets[i]->with(sets[j]->items().back());
      bool all_frequent = true;
      for (const auto& dropped : candidate) {
        if (!prev.entries.contains(candidate.minus(Itemset({dropped})))) {
          all_frequent = false;
          break;
        }
      }
      if (all_frequent) out.push_back(std::move(candidate));
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

LevelJobResult job_candidates(std::size_t k, const FrequentLevel& prev,
                              const TransactionDataset& dataset, const MiningParams& params,
                              Platform& platform, const SchedulingPolicy& policy,
                              const PipelineOptions& options) {
  if (prev.empty()) throw ConfigError("job_candidates: previous level is empty");
  if (k < 2 || prev.k + 1 != k) throw ConfigError("job_candidates: level mismatch");
  params.validate();

  const auto candidates = generate_candidates(prev);
  if (candidates.empty()) return {FrequentLevel{k, {}}, {}};

  JobSpec job;
  job.job_name = "candidates-k" + std::to_string(k);
  job.n_partitions = partitions_for(platform, options);
  job.map_cost_factor = options.costs.candidate_map(k);
  job.reduce_cost_factor = options.costs.reduce;
  job.broadcast["k"] = std::to_string(k);
  job.broadcast["n_candidates"] = std::to_string(candidates.size());
  // Every item of a level-k candidate occurs in some level k-1 itemset.
  for (const auto& [itemset, _] : prev.entries) {
    for (const auto& item : itemset) job.broadcast[std::string(kFrequentPrefix) + item] = "";
  }
  for (const auto& c : candidates) job.broadcast[std::string(kCandidatePrefix) + c.key()] = "";

  job.map_fn = [](const Transaction& t, const Broadcast& table) {
    const auto k = static_cast<std::size_t>(parse_count(lookup(table, "k")));
    const auto n_candidates = parse_count(lookup(table, "n_candidates"));

    std::vector<Item> kept;
    for (const auto& item : t.items) {
      if (table.contains(std::string(kFrequentPrefix) + item)) kept.push_back(item);
    }
    std::vector<KeyValue> out;
    if (kept.size() < k) return out;

    if (bounded_binomial(kept.size(), k, n_candidates) <= n_candidates) {
      for_each_combination(kept, k, [&](const std::vector<Item>& subset) {
        std::string key;
        for (const auto& item : subset) {
          if (!key.empty()) key += ',';
          key += item;
        }
        if (table.contains(std::string(kCandidatePrefix) + key)) out.push_back({key, "1"});
      });
      return out;
    }
    const Itemset pruned(std::move(kept));
    for (auto it = table.lower_bound(kCandidatePrefix);
         it != table.end() && it->first.starts_with(kCandidatePrefix); ++it) {
      const auto key = it->first.substr(kCandidatePrefix.size());
      if (Itemset::from_key(key).is_subset_of(pruned)) out.push_back({key, "1"});
    }
    return out;
  };
  job.reduce_fn = sum_reducer;

  auto result = run_job(job, dataset, platform, policy);
  const auto counts = level_from_outputs(k, result.outputs);
  return {threshold(counts, absolute_support_threshold(params.min_support, dataset.size())),
          std::move(result.trace)};
}

RulesJobResult job_rules(const std::vector<FrequentLevel>& levels, const MiningParams& params,
                         std::size_t n_transactions, Platform& platform,
                         const SchedulingPolicy& policy, const PipelineOptions& options) {
  params.validate();
  if (n_transactions == 0) throw ConfigError("job_rules: transaction count must be >= 1");

  std::vector<Itemset> sources;
  for (const auto& level : levels) {
    if (level.k < 2) continue;
    for (const auto& [itemset, _] : level.entries) sources.push_back(itemset);
  }
  if (sources.empty()) return {};

  JobSpec job;
  job.job_name = "rules";
  job.n_partitions = partitions_for(platform, options);
  job.map_cost_factor = options.costs.rule_map;
  job.reduce_cost_factor = options.costs.reduce;
  job.broadcast["min_confidence"] = format_double(params.min_confidence);
  for (const auto& level : levels) {
    for (const auto& [itemset, count] : level.entries) {
      job.broadcast[std::string(kSupportPrefix) + itemset.key()] = std::to_string(count);
    }
  }

  job.map_fn = [](const Transaction& z, const Broadcast& table) {
    const double min_confidence = parse_double(lookup(table, "min_confidence"));
    const auto& items = z.items.items();
    if (items.size() >= 64) throw InvariantError("itemset too large for rule enumeration");
    const auto union_count = parse_count(lookup(table, std::string(kSupportPrefix) + z.items.key()));

    std::vector<KeyValue> out;
    const std::uint64_t full = (std::uint64_t{1} << items.size()) - 1;
    for (std::uint64_t mask = 1; mask < full; ++mask) {
      std::vector<Item> lhs;
      std::vector<Item> rhs;
      for (std::size_t i = 0; i < items.size(); ++i) {
        ((mask >> i) & 1 ? lhs : rhs).push_back(items[i]);
      }
      const Itemset antecedent(std::move(lhs));
      const auto it = table.find(std::string(kSupportPrefix) + antecedent.key());
      if (it == table.end()) {
        throw InvariantError("support table lacks subset {" + antecedent.key() +
                             "}: downward closure violated");
      }
      const auto antecedent_count = parse_count(it->second);
      const double confidence =
          static_cast<double>(union_count) / static_cast<double>(antecedent_count);
      if (confidence < min_confidence) continue;
      out.push_back({antecedent.key() + kRuleSeparator + Itemset(std::move(rhs)).key(),
                     std::to_string(union_count) + " " + std::to_string(antecedent_count)});
    }
    return out;
  };
  job.reduce_fn = [](const std::string& key, std::span<const std::string> values,
                     const Broadcast&) -> std::vector<KeyValue> { return {{key, values.front()}}; };

  auto result = run_job(job, TransactionDataset(std::move(sources)), platform, policy);

  RulesJobResult out;
  const double n = static_cast<double>(n_transactions);
  for (const auto& kv : result.outputs) {
    const auto sep = kv.key.find(kRuleSeparator);
    const auto space = kv.value.find(' ');
    if (sep == std::string::npos || space == std::string::npos) {
      throw InvariantError("malformed rule record");
    }
    AssociationRule rule;
    rule.antecedent = Itemset::from_key(std::string_view(kv.key).substr(0, sep));
    rule.consequent = Itemset::from_key(std::string_view(kv.key).substr(sep + 1));
    rule.union_count = parse_count(std::string_view(kv.value).substr(0, space));
    const auto antecedent_count = parse_count(std::string_view(kv.value).substr(space + 1));
    rule.support = static_cast<double>(rule.union_count) / n;
    rule.confidence =
        static_cast<double>(rule.union_count) / static_cast<double>(antecedent_count);
    out.rules.push_back(std::move(rule));
  }
  std::sort(out.rules.begin(), out.rules.end(), rule_order);
  out.trace = std::move(result.trace);
  return out;
}

MiningResult mine(const TransactionDataset& dataset, const MiningParams& params,
                  Platform& platform, const SchedulingPolicy& policy,
                  const PipelineOptions& options) {
  params.validate();
  if (dataset.empty()) throw ConfigError("dataset has no transactions");

  MiningResult result;
  result.params = params;
  result.n_transactions = dataset.size();

  auto frequency = job_frequency(dataset, params, platform, policy, options);
  result.trace.append(frequency.trace);
  if (!frequency.level.empty()) result.levels.push_back(std::move(frequency.level));

  while (!result.levels.empty()) {
    const std::size_t k = result.levels.back().k + 1;
    auto next = job_candidates(k, result.levels.back(), dataset, params, platform, policy, options);
    result.trace.append(next.trace);
    if (next.level.empty()) break;
    result.levels.push_back(std::move(next.level));
  }

  auto rules = job_rules(result.levels, params, dataset.size(), platform, policy, options);
  result.trace.append(rules.trace);
  result.rules = std::move(rules.rules);
  result.ledger = platform.ledger();
  return result;
}

MiningResult mine_reference(const TransactionDataset& dataset, const MiningParams& params) {
  params.validate();
  if (dataset.empty()) throw ConfigError("dataset has no transactions");
  const auto& universe = dataset.universe();
  if (universe.size() > kReferenceUniverseLimit) {
    throw ConfigError("reference miner refuses universes above " +
                      std::to_string(kReferenceUniverseLimit) + " items");
  }

  MiningResult result;
  result.params = params;
  result.n_transactions = dataset.size();
  const auto min_count = absolute_support_threshold(params.min_support, dataset.size());

  std::size_t longest = 0;
  for (const auto& t : dataset.transactions()) longest = std::max(longest, t.items.size());

  std::map<Itemset, std::uint64_t> frequent;
  for (std::size_t k = 1; k <= longest; ++k) {
    FrequentLevel level{k, {}};
    for_each_combination(universe, k, [&](const std::vector<Item>& subset) {
      Itemset candidate(subset);
      const auto count = count_support(dataset, candidate);
      if (count >= min_count) level.entries.emplace(std::move(candidate), count);
    });
    if (level.empty()) break;
    frequent.insert(level.entries.begin(), level.entries.end());
    result.levels.push_back(std::move(level));
  }

  for (const auto& [z, union_count] : frequent) {
    if (z.size() < 2) continue;
    const std::uint64_t full = (std::uint64_t{1} << z.size()) - 1;
    for (std::uint64_t mask = 1; mask < full; ++mask) {
      std::vector<Item> lhs;
      std::vector<Item> rhs;
      for (std::size_t i = 0; i < z.size(); ++i) ((mask >> i) & 1 ? lhs : rhs).push_back(z[i]);
      Itemset antecedent(std::move(lhs));
      const auto antecedent_count = count_support(dataset, antecedent);
      const double confidence =
          static_cast<double>(union_count) / static_cast<double>(antecedent_count);
      if (confidence < params.min_confidence) continue;
      result.rules.push_back({std::move(antecedent), Itemset(std::move(rhs)),
                              static_cast<double>(union_count) / static_cast<double>(dataset.size()),
                              confidence, union_count});
    }
  }
  std::sort(result.rules.begin(), result.rules.end(), rule_order);
  return result;
}

std::string rules_to_jsonl(const std::vector<AssociationRule>& rules) {
  std::string out;
  for (const auto& r : rules) {
    nlohmann::ordered_json obj;
    obj["antecedent"] = r.antecedent.items();
    obj["consequent"] = r.consequent.items();
    obj["support"] = r.support;
    obj["confidence"] = r.confidence;
    obj["count"] = r.union_count;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

std::string levels_to_json(const std::vector<FrequentLevel>& levels) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const auto& level : levels) {
    auto entries = nlohmann::ordered_json::array();
    for (const auto& [itemset, count] : level.entries) {
      entries.push_back({{"items", itemset.items()}, {"count", count}});
    }
    doc[std::to_string(level.k)] = std::move(entries);
  }
  return doc.dump(2) + "\n";
}

}  // namespace basketforge
