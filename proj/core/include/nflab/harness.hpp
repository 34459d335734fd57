#pragma once

#include <string>
#include <vector>

#include "nflab/attacks.hpp"
#include "nflab/bounds.hpp"
#include "nflab/config.hpp"
#include "nflab/federation.hpp"

namespace nflab {

struct ExperimentArtifacts {
  ExperimentConfig config;  // resolved (pilot-fitted substitutes filled in)
  FederationResult fed;
  TradeoffReport report;
};

/// Full pipeline: federation run, belief analysis, constants, report.
ExperimentArtifacts run_experiment(const ExperimentConfig& config);

/// Belief/bound analysis of a finished federation run.
TradeoffReport analyze(const ExperimentConfig& config,
                       const FederationResult& fed);

std::string serialize_report(const TradeoffReport& report);
TradeoffReport parse_report(const std::string& json_text);
TradeoffReport load_report(const std::string& path);

struct Verdict {
  std::vector<CheckOutcome> checks;
  bool pass = true;
};

/// Every check applicable to a single report: the NFL inequalities, the
/// per-client belief-shift lemma, the BP-to-DP bound and the
/// mechanism-specific corollary.
Verdict verify_report(const TradeoffReport& report);
std::string serialize_verdict(const Verdict& verdict);

struct CurveRow {
  std::string mechanism_id;
  std::string param_name;
  double param_value = 0.0;
  double eps_p = 0.0;
  double eps_u = 0.0;
  double bound_privacy = 0.0;
  double bound_utility = 0.0;
  double c1 = 0.0;
  double c2 = std::numeric_limits<double>::quiet_NaN();
  double c3 = 0.0;
  double c4 = 1.0;
  double xi = 0.0;
  double gamma = std::numeric_limits<double>::quiet_NaN();
  double delta = std::numeric_limits<double>::quiet_NaN();
  bool feasible_at_budget = false;
};

struct CurveResult {
  std::vector<CurveRow> rows;
  std::vector<TradeoffReport> reports;
  TradeoffSolution best;
};

/// Sweeps the mechanism parameter named in config.sweep, running the full
/// pipeline per grid point.
CurveResult run_curve(const ExperimentConfig& config);
std::string curve_csv(const std::vector<CurveRow>& rows);

struct AttackRow {
  std::string attack;
  double param = 0.0;
  int instance = 0;
  bool converged = false;
  int iterations = 0;
  double final_loss = 0.0;
  double recovery_error = std::numeric_limits<double>::quiet_NaN();
  std::int64_t found_key_index = -1;
  std::uint64_t decrypt_calls = 0;
  int agree = -1;  // posterior-argmax cross-check; -1 = n/a
};

std::vector<AttackRow> run_attack_suite(const AttackSuiteSpec& spec);
std::string attack_csv(const std::vector<AttackRow>& rows);

/// Emits config.json, samples.csv, traces.csv, report.json and the closing
/// manifest.json into `dir` (created if needed).
void write_run_directory(const ExperimentArtifacts& artifacts,
                         const std::string& dir);

/// Command entry points shared by the CLI.  Exit codes: 0 success,
/// 1 usage/config error, 2 run failure, 3 verification failure.
int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed_override, int jobs_override);
int cmd_attack(const std::string& config_path, const std::string& out_dir,
               std::optional<std::uint64_t> seed_override);
int cmd_verify(const std::string& run_dir);
int cmd_curve(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed_override, int jobs_override);

/// Default output root: --out flag, else $NFLAB_OUT_ROOT, else "runs".
std::string resolve_out_root(const std::string& flag_value);

}  // namespace nflab
