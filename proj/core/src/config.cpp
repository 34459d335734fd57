#include "nflab/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace nflab {

using nlohmann::json;

namespace {

// Typed getter with a field-path diagnostic on failure.
template <typename T>
T require(const json& j, const std::string& path, const std::string& key) {
  if (!j.contains(key))
    throw ConfigError("config: missing field " + path + "." + key);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad type at " + path + "." + key);
  }
}

template <typename T>
T optional_field(const json& j, const std::string& path, const std::string& key,
                 T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad type at " + path + "." + key);
  }
}

Vec parse_scalar_or_vec(const json& j, const std::string& path,
                        const std::string& key, std::size_t dim) {
  if (!j.contains(key))
    throw ConfigError("config: missing field " + path + "." + key);
  const json& v = j.at(key);
  if (v.is_number()) return Vec(dim, v.get<double>());
  try {
    Vec out = v.get<Vec>();
    if (out.size() != dim)
      throw ConfigError("config: " + path + "." + key + " must have " +
                        std::to_string(dim) + " entries");
    return out;
  } catch (const json::exception&) {
    throw ConfigError("config: bad type at " + path + "." + key);
  }
}

json mechanism_to_json(const MechanismSpec& spec) {
  json j;
  if (std::holds_alternative<NoOpSpec>(spec)) {
    j["kind"] = "noop";
  } else if (const auto* r = std::get_if<RandomizationSpec>(&spec)) {
    j["kind"] = "randomization";
    j["sigma"] = r->sigma_eps;
  } else if (const auto* s = std::get_if<SparsitySpec>(&spec)) {
    j["kind"] = "sparsity";
    j["kept_dims"] = s->kept_dims;
    j["mu_g"] = s->mu_g;
    j["sigma_g_var"] = s->sigma_g_var;
  } else if (const auto* ss = std::get_if<SecretSharingSpec>(&spec)) {
    j["kind"] = "secret-sharing";
    j["delta"] = ss->delta;
    j["a"] = ss->a;
    j["b"] = ss->b;
    j["fixed_point_bits"] = ss->fixed_point_bits;
    if (ss->centers) j["centers"] = *ss->centers;
  } else if (const auto* he = std::get_if<ToyHeSpec>(&spec)) {
    j["kind"] = "toy-he";
    j["key_known"] = he->key_known;
    j["lwe_dim"] = he->params.lwe_dim;
    j["log2_q"] = he->params.log2_q;
    j["error_bound"] = he->params.error_bound;
    j["message_bits"] = he->params.message_bits;
    j["budget_units"] = he->params.budget_units;
    j["fixed_point_bits"] = he->fixed_point_bits;
  }
  return j;
}

MechanismSpec mechanism_from_json(const json& j, std::size_t model_dim) {
  const std::string path = "mechanism";
  const auto kind = require<std::string>(j, "", "kind");
  if (kind == "noop") return NoOpSpec{};
  if (kind == "randomization") {
    RandomizationSpec r;
    r.sigma_eps = require<double>(j, path, "sigma");
    if (r.sigma_eps < 0)
      throw ConfigError("config: mechanism.sigma must be >= 0");
    return r;
  }
  if (kind == "sparsity") {
    SparsitySpec s;
    s.kept_dims = require<std::size_t>(j, path, "kept_dims");
    if (s.kept_dims > model_dim)
      throw ConfigError("config: mechanism.kept_dims exceeds model dim");
    const std::size_t tail = model_dim - s.kept_dims;
    if (j.contains("mu_g")) s.mu_g = parse_scalar_or_vec(j, path, "mu_g", tail);
    if (j.contains("sigma_g_var"))
      s.sigma_g_var = parse_scalar_or_vec(j, path, "sigma_g_var", tail);
    // empty mu_g / sigma_g_var means: fit from the unprotected pilot run
    return s;
  }
  if (kind == "secret-sharing") {
    SecretSharingSpec ss;
    ss.delta = parse_scalar_or_vec(j, path, "delta", model_dim);
    ss.a = parse_scalar_or_vec(j, path, "a", model_dim);
    ss.b = parse_scalar_or_vec(j, path, "b", model_dim);
    ss.fixed_point_bits = optional_field<int>(j, path, "fixed_point_bits", 8);
    if (j.contains("centers"))
      ss.centers = parse_scalar_or_vec(j, path, "centers", model_dim);
    ss.validate(model_dim);
    return ss;
  }
  if (kind == "toy-he") {
    ToyHeSpec he;
    he.key_known = require<bool>(j, path, "key_known");
    he.params.lwe_dim = optional_field<std::size_t>(j, path, "lwe_dim", 8);
    he.params.log2_q = optional_field<std::uint32_t>(j, path, "log2_q", 16);
    he.params.error_bound =
        optional_field<std::int64_t>(j, path, "error_bound", 1);
    he.params.message_bits = optional_field<int>(j, path, "message_bits", 10);
    he.params.budget_units = optional_field<int>(j, path, "budget_units", 15);
    he.fixed_point_bits = optional_field<int>(j, path, "fixed_point_bits", 8);
    he.params.validate();
    return he;
  }
  throw ConfigError("config: unknown mechanism kind '" + kind + "'");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (schema_version != kConfigSchemaVersion)
    throw ConfigError("config: unsupported schema_version " +
                      std::to_string(schema_version));
  federation.validate();
  if (universe.candidates < 2)
    throw ConfigError("config: universe.candidates must be >= 2");
  if (universe.candidates > CandidateUniverse::kDefaultCap)
    throw ConfigError("config: universe.candidates exceeds cap");
  if (!(universe.sigma_obs > 0))
    throw ConfigError("config: universe.sigma_obs must be > 0");
  if (!universe.prior.empty() &&
      universe.prior.size() != universe.candidates)
    throw ConfigError("config: universe.prior size mismatch");
  if (analysis.dist_path != "auto" && analysis.dist_path != "histogram" &&
      analysis.dist_path != "gaussian")
    throw ConfigError("config: analysis.dist_path must be auto|histogram|gaussian");
  if (analysis.bins_per_dim < 2)
    throw ConfigError("config: analysis.bins_per_dim must be >= 2");
  if (sweep && sweep->values.empty())
    throw ConfigError("config: sweep.values must be non-empty");
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  cfg.schema_version = require<int>(j, "", "schema_version");

  const json& f = j.contains("federation") ? j.at("federation") : json::object();
  cfg.federation.clients = optional_field<int>(f, "federation", "clients", 4);
  cfg.federation.rounds = optional_field<int>(f, "federation", "rounds", 50);
  cfg.federation.trials = optional_field<int>(f, "federation", "trials", 64);
  cfg.federation.steps_per_round =
      optional_field<int>(f, "federation", "steps_per_round", 4);
  cfg.federation.lr = optional_field<double>(f, "federation", "lr", 0.1);
  cfg.federation.init_scale =
      optional_field<double>(f, "federation", "init_scale", 0.5);
  cfg.federation.seed = optional_field<std::uint64_t>(f, "federation", "seed", 1);
  cfg.federation.jobs = optional_field<int>(f, "federation", "jobs", 1);
  cfg.federation.eval_samples =
      optional_field<int>(f, "federation", "eval_samples", 256);
  cfg.federation.resample_per_trial =
      optional_field<bool>(f, "federation", "resample_per_trial", true);
  cfg.federation.record_traces =
      optional_field<bool>(f, "federation", "record_traces", true);
  cfg.federation.model_kind = model_kind_from_string(
      optional_field<std::string>(f, "federation", "model", "linear"));

  const json& d = f.contains("data") ? f.at("data") : json::object();
  cfg.federation.data.kind =
      optional_field<std::string>(d, "federation.data", "kind", "linear");
  cfg.federation.data.samples =
      optional_field<std::size_t>(d, "federation.data", "samples", 40);
  cfg.federation.data.dim =
      optional_field<std::size_t>(d, "federation.data", "dim", 2);
  cfg.federation.data.noise =
      optional_field<double>(d, "federation.data", "noise", 0.1);
  cfg.federation.data.separation =
      optional_field<double>(d, "federation.data", "separation", 2.0);
  cfg.federation.data.true_weights =
      optional_field<Vec>(d, "federation.data", "true_weights", Vec{});
  if (d.contains("csv_path"))
    cfg.federation.csv_path = require<std::string>(d, "federation.data", "csv_path");

  const json& u = f.contains("utility") ? f.at("utility") : json::object();
  cfg.federation.utility.kind = optional_field<std::string>(
      u, "federation.utility", "kind", "clipped-regression");
  cfg.federation.utility.tau =
      optional_field<double>(u, "federation.utility", "tau", 4.0);

  if (!f.contains("mechanism"))
    throw ConfigError("config: missing field federation.mechanism");
  cfg.federation.mechanism =
      mechanism_from_json(f.at("mechanism"), cfg.federation.data.dim);

  const json& uv = j.contains("universe") ? j.at("universe") : json::object();
  cfg.universe.candidates =
      optional_field<std::size_t>(uv, "universe", "candidates", 4);
  cfg.universe.prior = optional_field<Vec>(uv, "universe", "prior", Vec{});
  cfg.universe.sigma_obs =
      optional_field<double>(uv, "universe", "sigma_obs", 0.1);
  cfg.universe.release_steps =
      optional_field<int>(uv, "universe", "release_steps", 40);
  cfg.universe.release_lr =
      optional_field<double>(uv, "universe", "release_lr", 0.1);

  const json& an = j.contains("analysis") ? j.at("analysis") : json::object();
  cfg.analysis.dist_path =
      optional_field<std::string>(an, "analysis", "dist_path", "auto");
  cfg.analysis.bins_per_dim =
      optional_field<int>(an, "analysis", "bins_per_dim", 32);
  cfg.analysis.w_grid_size =
      optional_field<std::size_t>(an, "analysis", "w_grid_size", 4096);
  cfg.analysis.delta_tol =
      optional_field<double>(an, "analysis", "delta_tol", 1e-6);
  cfg.analysis.polish_steps =
      optional_field<int>(an, "analysis", "polish_steps", 50);
  cfg.analysis.gaussian_marginal_samples = optional_field<int>(
      an, "analysis", "gaussian_marginal_samples", 2048);

  if (j.contains("sweep")) {
    SweepSpec sw;
    const json& s = j.at("sweep");
    sw.param = require<std::string>(s, "sweep", "param");
    sw.values = require<Vec>(s, "sweep", "values");
    sw.eps_budget = optional_field<double>(
        s, "sweep", "eps_budget", std::numeric_limits<double>::infinity());
    cfg.sweep = std::move(sw);
  }

  const json& at = j.contains("attacks") ? j.at("attacks") : json::object();
  cfg.attacks.instances = optional_field<int>(at, "attacks", "instances", 100);
  cfg.attacks.sigmas =
      optional_field<Vec>(at, "attacks", "sigmas", Vec{0.0, 0.1, 0.3, 1.0});
  cfg.attacks.data_dim =
      optional_field<std::size_t>(at, "attacks", "data_dim", 2);
  cfg.attacks.seed = optional_field<std::uint64_t>(at, "attacks", "seed", 7);
  cfg.attacks.keyspace_bits =
      optional_field<int>(at, "attacks", "keyspace_bits", 12);
  cfg.attacks.planted_index =
      optional_field<std::size_t>(at, "attacks", "planted_index", 137);

  cfg.out_dir = optional_field<std::string>(j, "", "out_dir", "");
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  json j;
  j["schema_version"] = cfg.schema_version;
  json f;
  f["clients"] = cfg.federation.clients;
  f["rounds"] = cfg.federation.rounds;
  f["trials"] = cfg.federation.trials;
  f["steps_per_round"] = cfg.federation.steps_per_round;
  f["lr"] = cfg.federation.lr;
  f["init_scale"] = cfg.federation.init_scale;
  f["seed"] = cfg.federation.seed;
  f["jobs"] = cfg.federation.jobs;
  f["eval_samples"] = cfg.federation.eval_samples;
  f["resample_per_trial"] = cfg.federation.resample_per_trial;
  f["record_traces"] = cfg.federation.record_traces;
  f["model"] = to_string(cfg.federation.model_kind);
  json d;
  d["kind"] = cfg.federation.data.kind;
  d["samples"] = cfg.federation.data.samples;
  d["dim"] = cfg.federation.data.dim;
  d["noise"] = cfg.federation.data.noise;
  d["separation"] = cfg.federation.data.separation;
  d["true_weights"] = cfg.federation.data.true_weights;
  if (cfg.federation.csv_path) d["csv_path"] = *cfg.federation.csv_path;
  f["data"] = std::move(d);
  json ut;
  ut["kind"] = cfg.federation.utility.kind;
  ut["tau"] = cfg.federation.utility.tau;
  f["utility"] = std::move(ut);
  f["mechanism"] = mechanism_to_json(cfg.federation.mechanism);
  j["federation"] = std::move(f);

  json uv;
  uv["candidates"] = cfg.universe.candidates;
  uv["prior"] = cfg.universe.prior;
  uv["sigma_obs"] = cfg.universe.sigma_obs;
  uv["release_steps"] = cfg.universe.release_steps;
  uv["release_lr"] = cfg.universe.release_lr;
  j["universe"] = std::move(uv);

  json an;
  an["dist_path"] = cfg.analysis.dist_path;
  an["bins_per_dim"] = cfg.analysis.bins_per_dim;
  an["w_grid_size"] = cfg.analysis.w_grid_size;
  an["delta_tol"] = cfg.analysis.delta_tol;
  an["polish_steps"] = cfg.analysis.polish_steps;
  an["gaussian_marginal_samples"] = cfg.analysis.gaussian_marginal_samples;
  j["analysis"] = std::move(an);

  if (cfg.sweep) {
    json s;
    s["param"] = cfg.sweep->param;
    s["values"] = cfg.sweep->values;
    if (std::isfinite(cfg.sweep->eps_budget))
      s["eps_budget"] = cfg.sweep->eps_budget;
    j["sweep"] = std::move(s);
  }

  json at;
  at["instances"] = cfg.attacks.instances;
  at["sigmas"] = cfg.attacks.sigmas;
  at["data_dim"] = cfg.attacks.data_dim;
  at["seed"] = cfg.attacks.seed;
  at["keyspace_bits"] = cfg.attacks.keyspace_bits;
  at["planted_index"] = cfg.attacks.planted_index;
  j["attacks"] = std::move(at);

  if (!cfg.out_dir.empty()) j["out_dir"] = cfg.out_dir;
  return j.dump(2) + "\n";
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const ExperimentConfig& config) {
  return fnv1a_hex(serialize_config(config));
}

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("hash_file: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return fnv1a_hex(ss.str());
}

std::string serialize_manifest(const RunManifest& m) {
  json j;
  j["schema_version"] = 1;
  j["config_hash"] = m.config_hash;
  j["tool_version"] = m.tool_version;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  json files = json::array();
  for (const auto& f : m.files) {
    json e;
    e["path"] = f.path;
    e["checksum"] = f.checksum;
    e["bytes"] = f.bytes;
    files.push_back(std::move(e));
  }
  j["files"] = std::move(files);
  return j.dump(2) + "\n";
}

}  // namespace nflab
