// basketforge: market-basket mining on a simulated heterogeneous multi-core.
//
//   basketforge mine   --input baskets.txt --min-support 0.5 --min-confidence 0.6 --output-dir out
//   basketforge report --trace out/trace.jsonl --ledger out/ledger.json
//   basketforge gen    --n-transactions 100 --n-items 12 --density 4 --seed 7 --output baskets.txt

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "basketforge/commands.hpp"

int main(int argc, char** argv) {
  using namespace basketforge;

  CLI::App app{"Apriori market-basket analysis over a MapReduce engine on a simulated "
               "heterogeneous multi-core platform"};
  app.require_subcommand(1);

  RunConfig run;
  std::string platform_path;
  std::size_t n_partitions = 0;
  std::string objective = "fastest";
  std::string switching = "dynamic";

  auto* mine_cmd = app.add_subcommand("mine", "Mine association rules from a basket file");
  mine_cmd->add_option("--input", run.input_path, "Basket file")->required();
  mine_cmd->add_option("--min-support", run.min_support, "Minimum support fraction in (0,1]")
      ->required();
  mine_cmd->add_option("--min-confidence", run.min_confidence, "Minimum confidence in (0,1]")
      ->required();
  mine_cmd->add_option("--platform-config", platform_path,
                       std::string("Platform JSON (default: $") + kPlatformEnvVar +
                           " or the built-in 4-core platform)");
  mine_cmd->add_option("--objective", objective, "fastest|energy")
      ->check(CLI::IsMember({"fastest", "energy"}));
  mine_cmd->add_option("--switching", switching, "static|dynamic")
      ->check(CLI::IsMember({"static", "dynamic"}));
  mine_cmd->add_option("--gate-idle-cores", run.gate_idle_cores, "Power off idle cores (true|false)");
  mine_cmd->add_option("--n-partitions", n_partitions, "Map partitions (default: core count)");
  mine_cmd->add_option("--output-dir", run.output_dir, "Directory for output files")->required();

  std::string trace_path;
  std::string ledger_path;
  auto* report_cmd = app.add_subcommand("report", "Summarise a trace and energy ledger");
  report_cmd->add_option("--trace", trace_path, "trace.jsonl")->required();
  report_cmd->add_option("--ledger", ledger_path, "ledger.json")->required();

  GenConfig gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic basket file");
  gen_cmd->add_option("--n-transactions", gen.n_transactions, "Number of transactions")->required();
  gen_cmd->add_option("--n-items", gen.n_items, "Size of the item universe")->required();
  gen_cmd->add_option("--density", gen.density, "Expected items per transaction")->required();
  gen_cmd->add_option("--seed", gen.seed, "Random seed");
  gen_cmd->add_option("--output", gen.output_path, "Output basket file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInputError;
  }

  if (*mine_cmd) {
    run.objective = *parse_objective(objective);
    run.switching = *parse_switching(switching);
    if (!platform_path.empty()) run.platform_config_path = platform_path;
    if (mine_cmd->count("--n-partitions") > 0) run.n_partitions = n_partitions;
    return cmd_mine(run, std::cout, std::cerr);
  }
  if (*report_cmd) return cmd_report(trace_path, ledger_path, std::cout, std::cerr);
  return cmd_gen(gen, std::cout, std::cerr);
}
