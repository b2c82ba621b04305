#include "basketforge/commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "basketforge/basket.hpp"
#include "basketforge/errors.hpp"
#include "basketforge/mapreduce.hpp"
#include "basketforge/pipeline.hpp"
#include "basketforge/platform.hpp"
#include "basketforge/trace_io.hpp"
#include "json.hpp"

namespace basketforge {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

/// Writes every file under a temporary name, then renames them all.
void write_all_atomically(const std::vector<std::pair<fs::path, std::string>>& files) {
  std::vector<fs::path> staged;
  try {
    for (const auto& [path, content] : files) {
      fs::path tmp = path;
      tmp += ".tmp";
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw ConfigError("cannot write " + tmp.string());
      out << content;
      out.close();
      if (!out) throw ConfigError("failed writing " + tmp.string());
      staged.push_back(tmp);
    }
  } catch (...) {
    for (const auto& tmp : staged) fs::remove(tmp);
    throw;
  }
  for (std::size_t i = 0; i < files.size(); ++i) fs::rename(staged[i], files[i].first);
}

PlatformConfig resolve_platform(const RunConfig& config) {
  if (config.platform_config_path) return load_platform_config(*config.platform_config_path);
  if (const char* env = std::getenv(kPlatformEnvVar); env && *env) {
    return load_platform_config(env);
  }
  return default_platform_config();
}

}  // namespace

int cmd_mine(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    if (config.output_dir.empty()) throw ConfigError("output directory is required");
    if (config.n_partitions && *config.n_partitions == 0) {
      throw ConfigError("n_partitions must be >= 1");
    }
    const MiningParams params{config.min_support, config.min_confidence};
    params.validate();

    std::ifstream in(config.input_path);
    if (!in) throw ConfigError("cannot open input file " + config.input_path.string());
    const auto dataset = parse_transactions(in);

    Platform platform(resolve_platform(config), CoreMode::off);
    const SchedulingPolicy policy{config.objective, config.gate_idle_cores, config.switching};
    PipelineOptions options;
    options.n_partitions = config.n_partitions;

    const auto result = mine(dataset, params, platform, policy, options);

    nlohmann::ordered_json summary;
    summary["transactions"] = result.n_transactions;
    summary["levels"] = result.levels.size();
    summary["rules"] = result.rules.size();
    summary["makespan"] = to_seconds(result.trace.makespan);
    summary["total_joules"] = result.ledger.total_joules;

    fs::create_directories(config.output_dir);
    write_all_atomically({
        {config.output_dir / "rules.jsonl", rules_to_jsonl(result.rules)},
        {config.output_dir / "levels.json", levels_to_json(result.levels)},
        {config.output_dir / "trace.jsonl", trace_to_jsonl(result.trace)},
        {config.output_dir / "ledger.json", ledger_to_json(result.ledger)},
        {config.output_dir / "summary.json", summary.dump(2) + "\n"},
    });

    out << "rules: " << result.rules.size() << "\n"
        << "frequent levels: " << result.levels.size() << "\n"
        << "makespan: " << to_seconds(result.trace.makespan) << " s\n"
        << "total energy: " << result.ledger.total_joules << " J\n";
    return kExitOk;
  } catch (const ParseError& e) {
    err << "error: " << config.input_path.string() << ": " << e.what() << "\n";
    return kExitInputError;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

int cmd_report(const fs::path& trace_path, const fs::path& ledger_path, std::ostream& out,
               std::ostream& err) {
  try {
    std::ifstream trace_in(trace_path);
    if (!trace_in) throw ConfigError("cannot open trace file " + trace_path.string());
    ScheduleTrace trace;
    try {
      trace = parse_trace_jsonl(trace_in);
    } catch (const ParseError& e) {
      err << "error: " << trace_path.string() << ": " << e.what() << "\n";
      return kExitInputError;
    }
    const auto ledger = parse_ledger_json(read_file(ledger_path));
    out << format_report(build_report(trace, ledger));
    return kExitOk;
  } catch (const ParseError& e) {
    err << "error: " << ledger_path.string() << ": " << e.what() << "\n";
    return kExitInputError;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

std::string generate_baskets(std::size_t n_transactions, std::size_t n_items, double density,
                             std::uint64_t seed) {
  if (n_transactions == 0) throw ConfigError("n_transactions must be >= 1");
  if (n_items == 0) throw ConfigError("n_items must be >= 1");
  if (!(density >= 1.0 && density <= static_cast<double>(n_items))) {
    throw ConfigError("density must be in [1, n_items]");
  }

  const std::size_t width = std::to_string(n_items - 1).size();
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n_items; ++i) {
    auto digits = std::to_string(i);
    names.push_back("item" + std::string(width - digits.size(), '0') + digits);
  }

  std::mt19937_64 rng(seed);
  std::binomial_distribution<std::size_t> size_dist(n_items, density / static_cast<double>(n_items));
  std::vector<std::size_t> pool(n_items);
  std::string out;
  for (std::size_t t = 0; t < n_transactions; ++t) {
    const std::size_t size = std::clamp<std::size_t>(size_dist(rng), 1, n_items);
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t i = 0; i < size; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n_items - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    std::vector<std::size_t> chosen(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(size));
    std::sort(chosen.begin(), chosen.end());
    for (std::size_t i = 0; i < chosen.size(); ++i) {
      if (i > 0) out += ',';
      out += names[chosen[i]];
    }
    out += '\n';
  }
  return out;
}

int cmd_gen(const GenConfig& config, std::ostream& out, std::ostream& err) {
  try {
    if (config.output_path.empty()) throw ConfigError("output path is required");
    const auto text =
        generate_baskets(config.n_transactions, config.n_items, config.density, config.seed);
    if (config.output_path.has_parent_path()) fs::create_directories(config.output_path.parent_path());
    write_all_atomically({{config.output_path, text}});
    out << "wrote " << config.n_transactions << " transactions to " << config.output_path.string()
        << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace basketforge
