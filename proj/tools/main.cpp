// Command-line front end: simulate / attack / verify / curve.
//
// Exit codes: 0 success, 1 usage or config error, 2 run failure,
// 3 verification failure.

#include <optional>
#include <string>

#include "CLI11.hpp"
#include "nflab/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"nflab: federated-learning privacy-utility trade-off laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 0;

  auto add_common = [&](CLI::App* cmd, bool with_jobs) {
    cmd->add_option("--config", config_path, "Configuration file (JSON)")
        ->required();
    cmd->add_option("--out", out_dir, "Output directory");
    cmd->add_option("--seed", seed, "Master seed override")
        ->each([&](const std::string&) { seed_set = true; });
    if (with_jobs) cmd->add_option("--jobs", jobs, "Parallel trial workers");
  };

  CLI::App* simulate = app.add_subcommand(
      "simulate", "Run the federation pipeline and write a trade-off report");
  add_common(simulate, true);

  CLI::App* attack = app.add_subcommand(
      "attack", "Run the seeded inference-attack suite and write a CSV table");
  add_common(attack, false);

  std::string run_dir;
  CLI::App* verify = app.add_subcommand(
      "verify", "Re-check every applicable bound on a finished run");
  verify->add_option("run_dir", run_dir, "Run directory to verify")->required();

  CLI::App* curve = app.add_subcommand(
      "curve", "Sweep a mechanism parameter and emit the trade-off curve CSV");
  add_common(curve, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  const std::optional<std::uint64_t> seed_opt =
      seed_set ? std::optional<std::uint64_t>(seed) : std::nullopt;

  if (simulate->parsed())
    return nflab::cmd_simulate(config_path, out_dir, seed_opt, jobs);
  if (attack->parsed()) return nflab::cmd_attack(config_path, out_dir, seed_opt);
  if (verify->parsed()) return nflab::cmd_verify(run_dir);
  if (curve->parsed())
    return nflab::cmd_curve(config_path, out_dir, seed_opt, jobs);
  return 1;
}
