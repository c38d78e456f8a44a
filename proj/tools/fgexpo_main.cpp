// fgexpo: experiment runner for the FG-ExPO / GRPO desk-scale testbed.
//
//   fgexpo gen-bank --out DIR [--n 300 --features 16 --length 3 --vocab 4 --spread 1 --bank-seed 0]
//   fgexpo train   --config cfg.json --bank DIR/bank.json --out DIR [--seed N]
//   fgexpo eval    --bank bank.json [--params final_params.json] --k 8 --out DIR
//   fgexpo ablate  --config cfg.json --bank bank.json --out DIR
//   fgexpo compare --config cfg.json --bank bank.json --seeds 0..9 --k 8 --out DIR
//   fgexpo trace-curriculum --trace run/curriculum.csv --out DIR
//
// Without --bank, commands generate the bank in-process from the generation flags.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fgexpo/cli.hpp"

int main(int argc, char** argv) {
  using namespace fgexpo;

  CLI::App app{"FG-ExPO desk-scale experiment runner"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  ExperimentManifest m;
  std::string config, bank, out, params, trace, seeds;
  std::optional<std::uint64_t> seed;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "TrainConfig JSON");
    sub->add_option("--bank", bank, "question bank JSON");
    sub->add_option("--out", out, "output directory (must be absent or empty)")->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--n", m.generation.n, "generated bank size");
    sub->add_option("--features", m.generation.features, "feature dimension F");
    sub->add_option("--length", m.generation.length, "sequence length L");
    sub->add_option("--vocab", m.generation.vocab, "vocabulary size V");
    sub->add_option("--spread", m.generation.difficulty_spread, "difficulty spread");
    sub->add_option("--bank-seed", m.bank_seed, "seed for in-process bank generation");
  };
  auto add_eval = [&](CLI::App* sub) {
    sub->add_option("--k", m.k, "samples per question")->check(CLI::PositiveNumber);
    sub->add_option("--temperature", m.eval_temperature, "evaluation temperature")
        ->check(CLI::PositiveNumber);
  };

  auto* gen = app.add_subcommand("gen-bank", "generate a question bank with its initial policy");
  add_common(gen);
  auto* tr = app.add_subcommand("train", "train one configuration");
  add_common(tr);
  auto* ev = app.add_subcommand("eval", "pass@1 / pass@k of a policy");
  add_common(ev);
  add_eval(ev);
  ev->add_option("--params", params, "final_params.json from train");
  auto* ab = app.add_subcommand("ablate", "GRPO, AKL-only, GCS-only and full runs");
  add_common(ab);
  add_eval(ab);
  auto* tc = app.add_subcommand("trace-curriculum", "summarize curriculum.csv per step");
  tc->add_option("--trace", trace, "curriculum.csv")->required();
  tc->add_option("--out", out, "output directory")->required();
  auto* cmp = app.add_subcommand("compare", "four-configuration comparison over seeds");
  add_common(cmp);
  add_eval(cmp);
  cmp->add_option("--seeds", seeds, "seed range N..M");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  const auto* sub = app.get_subcommands().front();
  m.command = *parse_command(sub->get_name());
  m.out = out;
  if (!config.empty()) m.config = config;
  if (!bank.empty()) m.bank = bank;
  if (!params.empty()) m.params = params;
  if (!trace.empty()) m.trace = trace;
  m.seed = seed;
  if (!seeds.empty()) {
    try {
      m.seeds = parse_seed_range(seeds);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitUsage;
    }
  }
  return run_command(m, std::cerr);
}
