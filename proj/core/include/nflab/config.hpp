#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nflab/federation.hpp"

namespace nflab {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kConfigSchemaVersion = 1;
inline constexpr int kReportSchemaVersion = 1;

/// Candidate-universe construction: how many candidate datasets, their
/// prior, the emission noise scale and the deterministic release map
/// (train-from-zero steps).
struct UniverseSpec {
  std::size_t candidates = 4;
  Vec prior;  // empty = uniform
  double sigma_obs = 0.1;
  int release_steps = 40;
  double release_lr = 0.1;
};

struct AnalysisSpec {
  std::string dist_path = "auto";  // auto | histogram | gaussian
  int bins_per_dim = 32;
  std::size_t w_grid_size = 4096;
  double delta_tol = 1e-6;
  int polish_steps = 50;
  int gaussian_marginal_samples = 2048;  // only for explicit sampling paths
};

struct SweepSpec {
  std::string param;  // sigma | kept_dims | delta
  Vec values;
  double eps_budget = std::numeric_limits<double>::infinity();
};

/// Seeded attack-suite parameters for the attack command.
struct AttackSuiteSpec {
  int instances = 100;
  Vec sigmas = {0.0, 0.1, 0.3, 1.0};
  std::size_t data_dim = 2;
  std::uint64_t seed = 7;
  int keyspace_bits = 12;
  std::size_t planted_index = 137;
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  FederationConfig federation;
  UniverseSpec universe;
  AnalysisSpec analysis;
  std::optional<SweepSpec> sweep;
  AttackSuiteSpec attacks;
  std::string out_dir;

  void validate() const;
};

/// Raised on malformed configs; carries the offending field path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& config);

/// Stable content hash (FNV-1a 64, hex) of the serialized config.
std::string config_hash(const ExperimentConfig& config);
std::string fnv1a_hex(const std::string& bytes);
std::string hash_file(const std::string& path);

struct ManifestEntry {
  std::string path;  // relative to the run directory
  std::string checksum;
  std::uint64_t bytes = 0;
};

/// Run metadata: every emitted file is listed with its checksum.  The
/// manifest is written last and is the only artifact carrying wall-clock
/// timestamps.
struct RunManifest {
  std::string config_hash;
  std::string tool_version = kToolVersion;
  std::string started_at;   // ISO 8601 UTC
  std::string finished_at;  // ISO 8601 UTC
  std::vector<ManifestEntry> files;
};

std::string serialize_manifest(const RunManifest& manifest);

}  // namespace nflab
