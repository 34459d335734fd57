#include "nflab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"

namespace nflab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct ClientBelief {
  CandidateUniverse universe;
  LikelihoodModel likelihood;
};

std::vector<ClientBelief> build_universes(const ExperimentConfig& cfg,
                                          const FederationResult& fed) {
  const auto& f = cfg.federation;
  RngStream useed = RngStream(f.seed).child("universe");
  Vec prior_mass = cfg.universe.prior;
  if (prior_mass.empty())
    prior_mass.assign(cfg.universe.candidates,
                      1.0 / static_cast<double>(cfg.universe.candidates));

  std::vector<ClientBelief> out;
  out.reserve(f.clients);
  for (int k = 0; k < f.clients; ++k) {
    std::vector<ClientDataset> cands;
    std::vector<Vec> releases;
    for (std::size_t j = 0; j < cfg.universe.candidates; ++j) {
      RngStream cs = useed.child(k).child(j);
      ClientDataset d = f.csv_path
                            ? bootstrap_rows(fed.eval_data.at(k), cs)
                            : generate_dataset(f.data, k, cs);
      ModelVector w0{Vec(d.cols, 0.0), f.model_kind};
      releases.push_back(
          local_update(w0, d, cfg.universe.release_steps, cfg.universe.release_lr)
              .weights);
      cands.push_back(std::move(d));
    }
    out.push_back(
        {CandidateUniverse(std::move(cands), DiscretePMF(prior_mass)),
         LikelihoodModel(std::move(releases), cfg.universe.sigma_obs)});
  }
  return out;
}

bool use_gaussian_path(const ExperimentConfig& cfg) {
  if (cfg.analysis.dist_path == "gaussian") return true;
  if (cfg.analysis.dist_path == "histogram") return false;
  return std::holds_alternative<RandomizationSpec>(cfg.federation.mechanism) ||
         std::holds_alternative<SparsitySpec>(cfg.federation.mechanism);
}

// Parametric protected distribution implied by the mechanism; aggregate
// variances shrink by 1/K where the mechanism acts per client.
DiagGaussian derive_protected(const DiagGaussian& fit_o,
                              const MechanismSpec& mech,
                              const EmpiricalModelDist& dist_s, bool aggregate,
                              int clients) {
  if (const auto* r = std::get_if<RandomizationSpec>(&mech)) {
    Vec var = fit_o.variance;
    const double add = aggregate
                           ? r->sigma_eps * r->sigma_eps / clients
                           : r->sigma_eps * r->sigma_eps;
    for (double& v : var) v += add;
    return DiagGaussian(fit_o.mean, std::move(var));
  }
  if (const auto* s = std::get_if<SparsitySpec>(&mech)) {
    Vec mean = fit_o.mean;
    Vec var = fit_o.variance;
    for (std::size_t i = 0; i < s->mu_g.size(); ++i) {
      mean[s->kept_dims + i] = s->mu_g[i];
      var[s->kept_dims + i] =
          aggregate ? s->sigma_g_var[i] / clients : s->sigma_g_var[i];
    }
    return DiagGaussian(std::move(mean), std::move(var));
  }
  return dist_s.fitted();
}

struct DistPair {
  ReleasedDist o, s;
  std::optional<DiagGaussian> fit_o, derived_s;  // gaussian path only
};

DistPair build_pair(const ExperimentConfig& cfg, const EmpiricalModelDist& o,
                    const EmpiricalModelDist& s, bool s_opaque, bool aggregate,
                    bool gaussian) {
  DistPair pair;
  if (!gaussian) {
    auto [po, ps] = histogram_pair(o.samples, s.samples,
                                   cfg.analysis.bins_per_dim, s_opaque);
    pair.o = std::move(po);
    pair.s = std::move(ps);
    return pair;
  }
  pair.fit_o = o.fitted();
  pair.derived_s = derive_protected(*pair.fit_o, cfg.federation.mechanism, s,
                                    aggregate, cfg.federation.clients);
  const std::vector<Vec> grid = low_discrepancy_grid(
      *pair.fit_o, *pair.derived_s, cfg.analysis.w_grid_size);
  pair.o = discretize_gaussian(*pair.fit_o, grid);
  pair.s = discretize_gaussian(*pair.derived_s, grid);
  return pair;
}

MomentFit pooled_client_fit(const std::vector<EmpiricalModelDist>& dists,
                            double floor_val = 1e-12) {
  std::vector<Vec> pooled;
  for (const auto& d : dists)
    for (const auto& v : d.samples) pooled.push_back(v);
  MomentFit fit = fit_moments(pooled);
  for (double& v : fit.variance) v = std::max(v, floor_val);
  return fit;
}

}  // namespace

TradeoffReport analyze(const ExperimentConfig& cfg,
                       const FederationResult& fed) {
  const auto& f = cfg.federation;
  const int K = f.clients;
  const std::size_t dim = fed.dist_o_agg.samples.front().size();
  const bool gaussian = use_gaussian_path(cfg);

  TradeoffReport rep;
  rep.schema_version = kReportSchemaVersion;
  rep.mechanism = mechanism_id(f.mechanism);
  rep.seed = f.seed;
  rep.clients = K;
  rep.dist_path = gaussian ? "gaussian" : "histogram";

  const std::vector<ClientBelief> beliefs = build_universes(cfg, fed);

  std::vector<DistPair> pairs;
  pairs.reserve(K);
  for (int k = 0; k < K; ++k)
    pairs.push_back(build_pair(cfg, fed.dist_o_clients[k],
                               fed.dist_s_clients[k], fed.s_is_opaque,
                               /*aggregate=*/false, gaussian));
  DistPair agg_pair =
      build_pair(cfg, fed.dist_o_agg, fed.dist_s_agg, fed.s_is_opaque,
                 /*aggregate=*/true, gaussian);

  double xi = 0.0;
  double dp_ratio = 0.0;
  for (int k = 0; k < K; ++k) {
    const auto& cb = beliefs[k];
    const auto& pr = pairs[k];

    BeliefDistribution f_b{cb.universe.prior, BeliefProvenance::kPrior, 0};
    const BeliefDistribution f_o = marginal_belief(
        pr.o, cb.universe, cb.likelihood, BeliefProvenance::kMarginalUnprotected);
    const BeliefDistribution f_a = marginal_belief(
        pr.s, cb.universe, cb.likelihood, BeliefProvenance::kMarginalProtected);

    rep.eps_p_k.push_back(bayesian_privacy_leakage(f_a, f_b));
    rep.c1_k.push_back(sqrt_js(f_o.pmf, f_b.pmf));
    rep.js_afo_k.push_back(js_discrete(f_a.pmf, f_o.pmf).value);
    rep.tv_k.push_back(tv_discrete(pr.o.as_pmf(), pr.s.as_pmf()).value);

    std::vector<ReleaseAtom> atoms = pr.o.atoms;
    atoms.insert(atoms.end(), pr.s.atoms.begin(), pr.s.atoms.end());
    xi = std::max(xi, compute_xi(cb.universe, cb.likelihood, atoms));
    dp_ratio = std::max(
        dp_ratio,
        dp_epsilon_check(cb.universe, cb.likelihood, atoms).max_log_ratio);
  }
  rep.eps_p = system_privacy_leakage(rep.eps_p_k);
  rep.c1 = system_privacy_leakage(rep.c1_k);
  rep.xi_hat = xi;
  rep.c3 = 0.5 * std::expm1(2.0 * xi);
  rep.dp_max_log_ratio = dp_ratio;
  rep.tv_a = tv_discrete(agg_pair.o.as_pmf(), agg_pair.s.as_pmf()).value;

  const UtilityLossResult ul =
      utility_loss(fed.dist_o_agg, fed.dist_s_agg, f.model_kind, fed.eval_data,
                   f.utility);
  rep.eps_u = ul.eps_u;
  rep.eps_u_k = ul.per_client;
  rep.eps_u_se = ul.std_error;

  const UStarResult ustar =
      estimate_u_star(fed.dist_o_agg, fed.dist_s_agg, f.model_kind,
                      fed.eval_data, f.utility, f.lr, cfg.analysis.polish_steps);
  rep.u_star = ustar.u_star;
  rep.w_star = ustar.w_star;

  try {
    rep.delta_hat =
        compute_delta(fed.dist_s_agg, ustar, f.model_kind, fed.eval_data,
                      f.utility, rep.tv_a, cfg.analysis.delta_tol);
    rep.assumption1_note = "ok";
  } catch (const AssumptionViolated& e) {
    rep.delta_hat.reset();
    rep.assumption1_note = e.what();
  }
  if (rep.tv_a > 0.0) {
    const GammaResult g = compute_gamma(rep.tv_k, rep.tv_a);
    rep.gamma_appendix = g.appendix_form;
    rep.gamma_maintext = g.main_text_form;
  }
  if (rep.delta_hat && rep.gamma_appendix)
    rep.c2 = *rep.gamma_appendix * std::expm1(2.0 * xi) / (4.0 * *rep.delta_hat);

  // Mechanism-specific parametric extras.
  RngStream tv_mc = RngStream(f.seed).child("tvmc");
  if (const auto* r = std::get_if<RandomizationSpec>(&f.mechanism);
      r != nullptr && gaussian) {
    RandomizationExtras ex;
    ex.sigma_eps = r->sigma_eps;
    for (int k = 0; k < K; ++k) {
      const DiagGaussian& fo = *pairs[k].fit_o;
      double inv4 = 0.0;
      for (double v : fo.variance) inv4 += 1.0 / (v * v);
      ex.inv_quartic_norm.push_back(std::sqrt(inv4));
      ex.bound_term.push_back(std::min(
          1.0, r->sigma_eps * r->sigma_eps * ex.inv_quartic_norm.back()));
      RngStream mk = tv_mc.child(k);
      ex.tv_quad.push_back(
          tv_gaussian(fo, *pairs[k].derived_s, dim > 3 ? &mk : nullptr).value);
    }
    double s = 0.0;
    for (double t : ex.bound_term) s += t;
    ex.bound_term_avg = s / K;
    RngStream ma = tv_mc.child("agg");
    ex.tv_a_quad = tv_gaussian(*agg_pair.fit_o, *agg_pair.derived_s,
                               dim > 3 ? &ma : nullptr)
                       .value;
    if (ex.tv_a_quad > 0.0) {
      double m = 0.0;
      for (double t : ex.tv_quad) m += t;
      ex.gamma_gauss = m / K / ex.tv_a_quad;
    }
    rep.randomization = std::move(ex);
  } else if (const auto* sp = std::get_if<SparsitySpec>(&f.mechanism);
             sp != nullptr && gaussian) {
    SparsityExtras ex;
    ex.kept_dims = sp->kept_dims;
    ex.total_dims = dim;
    const MomentFit pooled = pooled_client_fit(fed.dist_o_clients);
    ex.mu_o = pooled.mean;
    ex.var_o = pooled.variance;
    ex.mu_g = sp->mu_g;
    ex.var_g = sp->sigma_g_var;
    const Vec mu_o_tail(ex.mu_o.begin() + sp->kept_dims, ex.mu_o.end());
    const Vec var_o_tail(ex.var_o.begin() + sp->kept_dims, ex.var_o.end());
    ex.h = hellinger_suffix(mu_o_tail, var_o_tail, ex.mu_g, ex.var_g).front();
    for (int k = 0; k < K; ++k) {
      RngStream mk = tv_mc.child(k);
      ex.tv_quad.push_back(tv_gaussian(*pairs[k].fit_o, *pairs[k].derived_s,
                                       dim > 3 ? &mk : nullptr)
                               .value);
    }
    RngStream ma = tv_mc.child("agg");
    ex.tv_a_quad = tv_gaussian(*agg_pair.fit_o, *agg_pair.derived_s,
                               dim > 3 ? &ma : nullptr)
                       .value;
    rep.sparsity = std::move(ex);
  } else if (const auto* ss = std::get_if<SecretSharingSpec>(&f.mechanism)) {
    SecretSharingExtras ex;
    ex.delta = ss->delta;
    ex.a = ss->a;
    ex.b = ss->b;
    ex.closed_form_tv = secret_sharing_marginal_tv(*ss);
    rep.secret_sharing = std::move(ex);
  } else if (const auto* he = std::get_if<ToyHeSpec>(&f.mechanism)) {
    ToyHeExtras ex;
    ex.key_known = he->key_known;
    ex.fixed_point_bits = he->fixed_point_bits;
    ex.quantization_tol =
        std::ldexp(static_cast<double>(dim), -he->fixed_point_bits);
    rep.toy_he = std::move(ex);
  }
  return rep;
}

ExperimentArtifacts run_experiment(const ExperimentConfig& config) {
  ExperimentConfig resolved = config;
  if (auto* sp = std::get_if<SparsitySpec>(&resolved.federation.mechanism)) {
    if (sp->mu_g.empty() || sp->sigma_g_var.empty()) {
      // Substitute Gaussian fitted from a short unprotected pilot run.
      FederationConfig pilot = resolved.federation;
      pilot.mechanism = NoOpSpec{};
      pilot.trials = std::min(32, pilot.trials);
      pilot.record_traces = false;
      pilot.seed = RngStream(pilot.seed).child("pilot").key();
      const FederationResult pf = run_federation(pilot);
      const MomentFit fit = pooled_client_fit(pf.dist_o_clients);
      sp->mu_g.assign(fit.mean.begin() + sp->kept_dims, fit.mean.end());
      sp->sigma_g_var.assign(fit.variance.begin() + sp->kept_dims,
                             fit.variance.end());
    }
  }
  ExperimentArtifacts art;
  art.config = resolved;
  art.fed = run_federation(resolved.federation);
  art.report = analyze(resolved, art.fed);
  art.report.config_hash = config_hash(resolved);
  return art;
}

namespace {

json vec_to_json(const Vec& v) { return json(v); }

json optional_to_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

std::optional<double> optional_from_json(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

std::string serialize_report(const TradeoffReport& r) {
  json j;
  j["schema_version"] = r.schema_version;
  j["mechanism"] = r.mechanism;
  j["config_hash"] = r.config_hash;
  j["seed"] = r.seed;
  j["clients"] = r.clients;
  j["dist_path"] = r.dist_path;
  j["eps_p_k"] = vec_to_json(r.eps_p_k);
  j["eps_p"] = r.eps_p;
  j["c1_k"] = vec_to_json(r.c1_k);
  j["c1"] = r.c1;
  j["js_afo_k"] = vec_to_json(r.js_afo_k);
  j["xi_hat"] = r.xi_hat;
  j["c3"] = r.c3;
  j["c4"] = r.c4;
  j["tv_k"] = vec_to_json(r.tv_k);
  j["tv_a"] = r.tv_a;
  j["eps_u"] = r.eps_u;
  j["eps_u_k"] = vec_to_json(r.eps_u_k);
  j["eps_u_se"] = r.eps_u_se;
  j["dp_max_log_ratio"] = r.dp_max_log_ratio;
  j["u_star"] = r.u_star;
  j["w_star"] = vec_to_json(r.w_star);
  j["delta_hat"] = optional_to_json(r.delta_hat);
  j["assumption1_note"] = r.assumption1_note;
  j["gamma_appendix"] = optional_to_json(r.gamma_appendix);
  j["gamma_maintext"] = optional_to_json(r.gamma_maintext);
  j["c2"] = optional_to_json(r.c2);
  if (r.randomization) {
    const auto& e = *r.randomization;
    json x;
    x["sigma_eps"] = e.sigma_eps;
    x["inv_quartic_norm"] = vec_to_json(e.inv_quartic_norm);
    x["bound_term"] = vec_to_json(e.bound_term);
    x["bound_term_avg"] = e.bound_term_avg;
    x["tv_quad"] = vec_to_json(e.tv_quad);
    x["tv_a_quad"] = e.tv_a_quad;
    x["gamma_gauss"] = e.gamma_gauss;
    j["randomization"] = std::move(x);
  }
  if (r.sparsity) {
    const auto& e = *r.sparsity;
    json x;
    x["kept_dims"] = e.kept_dims;
    x["total_dims"] = e.total_dims;
    x["h"] = e.h;
    x["mu_o"] = vec_to_json(e.mu_o);
    x["var_o"] = vec_to_json(e.var_o);
    x["mu_g"] = vec_to_json(e.mu_g);
    x["var_g"] = vec_to_json(e.var_g);
    x["tv_quad"] = vec_to_json(e.tv_quad);
    x["tv_a_quad"] = e.tv_a_quad;
    j["sparsity"] = std::move(x);
  }
  if (r.secret_sharing) {
    const auto& e = *r.secret_sharing;
    json x;
    x["delta"] = vec_to_json(e.delta);
    x["a"] = vec_to_json(e.a);
    x["b"] = vec_to_json(e.b);
    x["closed_form_tv"] = e.closed_form_tv;
    j["secret_sharing"] = std::move(x);
  }
  if (r.toy_he) {
    const auto& e = *r.toy_he;
    json x;
    x["key_known"] = e.key_known;
    x["fixed_point_bits"] = e.fixed_point_bits;
    x["quantization_tol"] = e.quantization_tol;
    j["toy_he"] = std::move(x);
  }
  return j.dump(2) + "\n";
}

TradeoffReport parse_report(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("report: invalid JSON: ") + e.what());
  }
  TradeoffReport r;
  if (!j.contains("schema_version") ||
      j.at("schema_version").get<int>() != kReportSchemaVersion)
    throw std::runtime_error("report: schema_version mismatch");
  r.schema_version = j.at("schema_version").get<int>();
  r.mechanism = j.at("mechanism").get<std::string>();
  r.config_hash = j.at("config_hash").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.clients = j.at("clients").get<int>();
  r.dist_path = j.at("dist_path").get<std::string>();
  r.eps_p_k = j.at("eps_p_k").get<Vec>();
  r.eps_p = j.at("eps_p").get<double>();
  r.c1_k = j.at("c1_k").get<Vec>();
  r.c1 = j.at("c1").get<double>();
  r.js_afo_k = j.at("js_afo_k").get<Vec>();
  r.xi_hat = j.at("xi_hat").get<double>();
  r.c3 = j.at("c3").get<double>();
  r.c4 = j.at("c4").get<double>();
  r.tv_k = j.at("tv_k").get<Vec>();
  r.tv_a = j.at("tv_a").get<double>();
  r.eps_u = j.at("eps_u").get<double>();
  r.eps_u_k = j.at("eps_u_k").get<Vec>();
  r.eps_u_se = j.at("eps_u_se").get<double>();
  r.dp_max_log_ratio = j.at("dp_max_log_ratio").get<double>();
  r.u_star = j.at("u_star").get<double>();
  r.w_star = j.at("w_star").get<Vec>();
  r.delta_hat = optional_from_json(j, "delta_hat");
  r.assumption1_note = j.at("assumption1_note").get<std::string>();
  r.gamma_appendix = optional_from_json(j, "gamma_appendix");
  r.gamma_maintext = optional_from_json(j, "gamma_maintext");
  r.c2 = optional_from_json(j, "c2");
  if (j.contains("randomization")) {
    const json& x = j.at("randomization");
    RandomizationExtras e;
    e.sigma_eps = x.at("sigma_eps").get<double>();
    e.inv_quartic_norm = x.at("inv_quartic_norm").get<Vec>();
    e.bound_term = x.at("bound_term").get<Vec>();
    e.bound_term_avg = x.at("bound_term_avg").get<double>();
    e.tv_quad = x.at("tv_quad").get<Vec>();
    e.tv_a_quad = x.at("tv_a_quad").get<double>();
    e.gamma_gauss = x.at("gamma_gauss").get<double>();
    r.randomization = std::move(e);
  }
  if (j.contains("sparsity")) {
    const json& x = j.at("sparsity");
    SparsityExtras e;
    e.kept_dims = x.at("kept_dims").get<std::size_t>();
    e.total_dims = x.at("total_dims").get<std::size_t>();
    e.h = x.at("h").get<double>();
    e.mu_o = x.at("mu_o").get<Vec>();
    e.var_o = x.at("var_o").get<Vec>();
    e.mu_g = x.at("mu_g").get<Vec>();
    e.var_g = x.at("var_g").get<Vec>();
    e.tv_quad = x.at("tv_quad").get<Vec>();
    e.tv_a_quad = x.at("tv_a_quad").get<double>();
    r.sparsity = std::move(e);
  }
  if (j.contains("secret_sharing")) {
    const json& x = j.at("secret_sharing");
    SecretSharingExtras e;
    e.delta = x.at("delta").get<Vec>();
    e.a = x.at("a").get<Vec>();
    e.b = x.at("b").get<Vec>();
    e.closed_form_tv = x.at("closed_form_tv").get<double>();
    r.secret_sharing = std::move(e);
  }
  if (j.contains("toy_he")) {
    const json& x = j.at("toy_he");
    ToyHeExtras e;
    e.key_known = x.at("key_known").get<bool>();
    e.fixed_point_bits = x.at("fixed_point_bits").get<int>();
    e.quantization_tol = x.at("quantization_tol").get<double>();
    r.toy_he = std::move(e);
  }
  return r;
}

TradeoffReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("report: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_report(ss.str());
}

Verdict verify_report(const TradeoffReport& r) {
  Verdict v;
  const NflCheckResult nfl = check_nfl(r);
  v.checks.push_back(nfl.eq4);
  v.checks.push_back(nfl.eq5);

  // Per-client belief-shift lemma, exact on the discretized objects.
  const double expm_2xi = std::expm1(2.0 * r.xi_hat);
  for (std::size_t k = 0; k < r.js_afo_k.size(); ++k) {
    CheckOutcome c;
    c.name = "appendix-js-bound[k=" + std::to_string(k) + "]";
    c.lhs = r.js_afo_k[k];
    c.rhs = 0.25 * expm_2xi * expm_2xi * r.tv_k[k] * r.tv_k[k];
    c.slack = c.rhs - c.lhs;
    c.eps_stat = 1e-10;
    c.pass = c.slack >= -c.eps_stat;
    v.checks.push_back(c);
  }
  {
    CheckOutcome c;
    c.name = "bp-to-dp";
    c.lhs = r.dp_max_log_ratio;
    c.rhs = 2.0 * r.xi_hat;
    c.slack = c.rhs - c.lhs;
    c.eps_stat = 1e-12;
    c.pass = c.slack >= -c.eps_stat;
    v.checks.push_back(c);
  }

  if (r.randomization) {
    const SweepCheckResult sc = check_randomization({r});
    for (const auto& c : sc.per_report) v.checks.push_back(c);
    for (const auto& c : sc.sequence) v.checks.push_back(c);
  }
  if (r.sparsity) {
    const SweepCheckResult sc = check_sparsity({r});
    for (const auto& c : sc.per_report) v.checks.push_back(c);
    for (const auto& c : sc.sequence) v.checks.push_back(c);
  }
  if (r.secret_sharing)
    for (const auto& c : check_secret_sharing(r)) v.checks.push_back(c);
  if (r.toy_he) {
    if (!r.toy_he->key_known) {
      CheckOutcome c;
      c.name = "he-unknown-eps-p-zero";
      c.lhs = r.eps_p;
      c.rhs = 0.0;
      c.slack = -r.eps_p;
      c.pass = r.eps_p == 0.0;
      v.checks.push_back(c);
      if (r.c2) {
        CheckOutcome f;
        f.name = "he-unknown-eps-u-floor";
        f.lhs = r.c1 / *r.c2;
        f.rhs = r.eps_u;
        f.slack = f.rhs - f.lhs;
        f.eps_stat = 3.0 * r.eps_u_se;
        f.pass = f.slack >= -f.eps_stat;
        v.checks.push_back(f);
      }
    } else {
      CheckOutcome c;
      c.name = "he-known-eps-u-quantization";
      c.lhs = r.eps_u;
      c.rhs = r.toy_he->quantization_tol;
      c.slack = c.rhs - c.lhs;
      c.eps_stat = 3.0 * r.eps_u_se;
      c.pass = c.slack >= -c.eps_stat;
      v.checks.push_back(c);
      CheckOutcome f;
      f.name = "he-known-eps-p-floor";
      f.lhs = r.c1;
      f.rhs = r.eps_p + r.mean_sqrt_js_afo();
      f.slack = f.rhs - f.lhs;
      f.pass = f.slack >= 0.0;
      v.checks.push_back(f);
    }
  }

  v.pass = true;
  for (const auto& c : v.checks)
    if (!c.skipped && !c.pass) v.pass = false;
  return v;
}

std::string serialize_verdict(const Verdict& v) {
  json j;
  j["schema_version"] = 1;
  j["pass"] = v.pass;
  json checks = json::array();
  for (const auto& c : v.checks) {
    json e;
    e["name"] = c.name;
    e["lhs"] = c.lhs;
    e["rhs"] = c.rhs;
    e["slack"] = c.slack;
    e["eps_stat"] = c.eps_stat;
    e["pass"] = c.pass;
    e["skipped"] = c.skipped;
    e["note"] = c.note;
    checks.push_back(std::move(e));
  }
  j["checks"] = std::move(checks);
  return j.dump(2) + "\n";
}

namespace {

void apply_sweep_value(ExperimentConfig& cfg, const std::string& param,
                       double value) {
  if (param == "sigma") {
    auto* r = std::get_if<RandomizationSpec>(&cfg.federation.mechanism);
    if (!r) throw ConfigError("sweep: param 'sigma' needs a randomization mechanism");
    r->sigma_eps = value;
    return;
  }
  if (param == "kept_dims") {
    auto* s = std::get_if<SparsitySpec>(&cfg.federation.mechanism);
    if (!s) throw ConfigError("sweep: param 'kept_dims' needs a sparsity mechanism");
    s->kept_dims = static_cast<std::size_t>(std::llround(value));
    s->mu_g.clear();  // re-fit the substitute tail for the new split
    s->sigma_g_var.clear();
    return;
  }
  if (param == "delta") {
    auto* ss = std::get_if<SecretSharingSpec>(&cfg.federation.mechanism);
    if (!ss) throw ConfigError("sweep: param 'delta' needs secret sharing");
    std::fill(ss->delta.begin(), ss->delta.end(), value);
    return;
  }
  throw ConfigError("sweep: unknown param '" + param + "'");
}

double mechanism_param_value(const TradeoffReport& r) {
  if (r.randomization) return r.randomization->sigma_eps;
  if (r.sparsity) return static_cast<double>(r.sparsity->kept_dims);
  if (r.secret_sharing) return r.secret_sharing->delta.front();
  return 0.0;
}

CurveRow make_curve_row(const TradeoffReport& r, const std::string& param_name,
                        double param_value, double budget) {
  CurveRow row;
  row.mechanism_id = r.mechanism;
  row.param_name = param_name;
  row.param_value = param_value;
  row.eps_p = r.eps_p;
  row.eps_u = r.eps_u;
  row.c1 = r.c1;
  row.c2 = r.c2 ? *r.c2 : std::numeric_limits<double>::quiet_NaN();
  row.c3 = r.c3;
  row.c4 = r.c4;
  row.xi = r.xi_hat;
  row.gamma =
      r.gamma_appendix ? *r.gamma_appendix : std::numeric_limits<double>::quiet_NaN();
  row.delta =
      r.delta_hat ? *r.delta_hat : std::numeric_limits<double>::quiet_NaN();
  const double expm_2xi = std::expm1(2.0 * r.xi_hat);
  if (r.randomization) {
    row.bound_privacy = r.c1 - 0.75 * expm_2xi * r.randomization->bound_term_avg;
    row.bound_utility = r.c4 * r.randomization->bound_term_avg;
  } else if (r.sparsity) {
    row.bound_privacy = r.c1 - 0.5 * expm_2xi * std::sqrt(2.0) * r.sparsity->h;
    row.bound_utility = std::sqrt(2.0) * r.c4 * r.sparsity->h;
  } else if (r.secret_sharing) {
    row.bound_privacy =
        r.c1 - 0.5 * expm_2xi * r.secret_sharing->closed_form_tv;
    row.bound_utility = 0.0;
  } else if (r.toy_he && r.toy_he->key_known) {
    row.bound_privacy = r.c1;
    row.bound_utility = r.toy_he->quantization_tol;
  } else if (r.toy_he) {
    row.bound_privacy = 0.0;
    row.bound_utility = r.c2 ? r.c1 / *r.c2
                             : std::numeric_limits<double>::quiet_NaN();
  } else {
    row.bound_privacy = r.c1 - 0.5 * expm_2xi * r.mean_tv();
    row.bound_utility = r.c4 * r.tv_a;
  }
  row.feasible_at_budget = r.eps_p <= budget;
  return row;
}

}  // namespace

CurveResult run_curve(const ExperimentConfig& config) {
  if (!config.sweep) throw ConfigError("curve: config has no sweep section");
  CurveResult out;
  for (double value : config.sweep->values) {
    ExperimentConfig point = config;
    point.sweep.reset();
    apply_sweep_value(point, config.sweep->param, value);
    ExperimentArtifacts art = run_experiment(point);
    out.rows.push_back(make_curve_row(art.report, config.sweep->param, value,
                                      config.sweep->eps_budget));
    out.reports.push_back(std::move(art.report));
  }
  out.best = solve_constrained_tradeoff(out.reports, config.sweep->eps_budget);
  return out;
}

std::string curve_csv(const std::vector<CurveRow>& rows) {
  std::string s =
      "mechanism_id,param_name,param_value,eps_p,eps_u,bound_privacy,"
      "bound_utility,C1,C2,C3,C4,xi,gamma,delta,feasible_at_budget\n";
  for (const auto& r : rows) {
    s += r.mechanism_id + "," + r.param_name + "," + fmt_double(r.param_value) +
         "," + fmt_double(r.eps_p) + "," + fmt_double(r.eps_u) + "," +
         fmt_double(r.bound_privacy) + "," + fmt_double(r.bound_utility) + "," +
         fmt_double(r.c1) + "," + fmt_double(r.c2) + "," + fmt_double(r.c3) +
         "," + fmt_double(r.c4) + "," + fmt_double(r.xi) + "," +
         fmt_double(r.gamma) + "," + fmt_double(r.delta) + "," +
         (r.feasible_at_budget ? "1" : "0") + "\n";
  }
  return s;
}

std::vector<AttackRow> run_attack_suite(const AttackSuiteSpec& spec) {
  std::vector<AttackRow> rows;
  RngStream root(spec.seed);

  // Gradient inversion across the noise sweep: seeded linear instances with
  // a known label and a residual bounded away from zero.
  for (std::size_t si = 0; si < spec.sigmas.size(); ++si) {
    const double sigma = spec.sigmas[si];
    for (int inst = 0; inst < spec.instances; ++inst) {
      RngStream rs = root.child("gradient").child(si).child(inst);
      LinearAttackContext ctx;
      ctx.model_kind = ModelKind::kLinearRegression;
      ctx.weights.resize(spec.data_dim);
      for (double& w : ctx.weights) w = rs.normal(0.0, 1.0);
      Vec x_true(spec.data_dim);
      for (double& x : x_true) x = rs.normal(0.0, 1.0);
      // Residual near one keeps the observed gradient close to the datum,
      // so the gradient-informed start sits in the true root's basin and
      // the instance is identifiable.
      const double resid = rs.uniform(0.9, 1.1);
      const double y = dot(ctx.weights, x_true) - resid;
      ctx.label = y;
      Vec g(spec.data_dim);
      for (std::size_t i = 0; i < spec.data_dim; ++i)
        g[i] = resid * x_true[i] + sigma * rs.normal();
      AttackConfig cfg;
      cfg.kind = AttackKind::kGradientInversion;
      cfg.prior = AttackPrior::kLabel;
      cfg.seed = rs.child("opt").key();
      const AttackResult res = gradient_inversion(g, ctx, cfg);
      AttackRow row;
      row.attack = "gradient-inversion";
      row.param = sigma;
      row.instance = inst;
      row.converged = res.converged;
      row.iterations = res.iterations;
      row.final_loss = res.final_loss;
      row.recovery_error =
          std::sqrt(sq_dist(res.recovered, x_true));
      rows.push_back(std::move(row));
    }
  }

  // Model inversion on scalar instances (exactly identifiable).
  for (int inst = 0; inst < spec.instances; ++inst) {
    RngStream rs = root.child("model").child(inst);
    LinearAttackContext ctx;
    ctx.model_kind = ModelKind::kLinearRegression;
    ctx.weights = {rs.uniform(0.5, 2.0)};
    const Vec x_true = {rs.normal(0.0, 1.0)};
    const double observed = ctx.weights[0] * x_true[0];
    AttackConfig cfg;
    cfg.kind = AttackKind::kModelInversion;
    cfg.seed = rs.child("opt").key();
    const AttackResult res = model_inversion(observed, ctx, cfg);
    AttackRow row;
    row.attack = "model-inversion";
    row.instance = inst;
    row.converged = res.converged;
    row.iterations = res.iterations;
    row.final_loss = res.final_loss;
    row.recovery_error = std::abs(res.recovered[0] - x_true[0]);
    rows.push_back(std::move(row));
  }

  // Brute force over the toy key space with one planted key.
  {
    KeySpace ks;
    ks.count = 1ull << spec.keyspace_bits;
    ks.seed = root.child("keyspace").key();
    ks.params = HeParams{};
    const std::size_t planted = spec.planted_index % ks.count;
    const SecretKey true_key = ks.key_at(planted);
    const std::int64_t plaintext = 42;
    const Ciphertext ct =
        he_encrypt(plaintext, true_key, root.child("ciphertext"));
    const AttackResult res = brute_force_key(plaintext, ct, ks);
    AttackRow row;
    row.attack = "brute-force";
    row.param = static_cast<double>(ks.count);
    row.converged = res.converged;
    row.iterations = res.iterations;
    row.found_key_index =
        res.found_key_index ? static_cast<std::int64_t>(*res.found_key_index)
                            : -1;
    row.decrypt_calls = res.decrypt_calls;
    rows.push_back(std::move(row));
  }

  // Posterior-argmax cross-check on four-candidate universes.
  const int argmax_instances = std::min(spec.instances, 32);
  for (int inst = 0; inst < argmax_instances; ++inst) {
    RngStream rs = root.child("argmax").child(inst);
    LinearAttackContext ctx;
    ctx.model_kind = ModelKind::kLinearRegression;
    ctx.weights.resize(spec.data_dim);
    for (double& w : ctx.weights) w = rs.normal(0.0, 1.0);
    std::vector<Vec> cand_x(4, Vec(spec.data_dim));
    std::vector<ClientDataset> cands;
    std::vector<Vec> releases;
    for (int j = 0; j < 4; ++j) {
      for (double& x : cand_x[j]) x = rs.normal(0.0, 1.0);
      Vec targs = {dot(ctx.weights, cand_x[j]) - 1.0};
      cands.emplace_back(cand_x[j], targs, 1, spec.data_dim, j);
      releases.push_back(
          loss_gradient(ModelVector{ctx.weights, ctx.model_kind}, cands.back()));
    }
    const std::size_t true_idx = rs.uniform_u64(0, 3);
    Vec observed = releases[true_idx];
    for (double& v : observed) v += 0.01 * rs.normal();

    CandidateUniverse uni(cands, DiscretePMF(Vec(4, 0.25)));
    LikelihoodModel lik(releases, 0.1);
    const PosteriorArgmax pa = attack_as_posterior_argmax(observed, uni, lik);

    ctx.label = cands[true_idx].targets[0];
    AttackConfig cfg;
    cfg.kind = AttackKind::kGradientInversion;
    cfg.prior = AttackPrior::kLabel;
    cfg.seed = rs.child("opt").key();
    const AttackResult res = gradient_inversion(observed, ctx, cfg);
    std::size_t nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < 4; ++j) {
      const double d = sq_dist(res.recovered, cand_x[j]);
      if (d < best) {
        best = d;
        nearest = j;
      }
    }
    AttackRow row;
    row.attack = "posterior-argmax";
    row.instance = inst;
    row.converged = res.converged;
    row.iterations = res.iterations;
    row.final_loss = res.final_loss;
    row.agree = (pa.index == nearest) ? 1 : 0;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string attack_csv(const std::vector<AttackRow>& rows) {
  std::string s =
      "attack,param,instance,converged,iterations,final_loss,recovery_error,"
      "found_key_index,decrypt_calls,agree\n";
  for (const auto& r : rows) {
    s += r.attack + "," + fmt_double(r.param) + "," + std::to_string(r.instance) +
         "," + (r.converged ? "1" : "0") + "," + std::to_string(r.iterations) +
         "," + fmt_double(r.final_loss) + "," + fmt_double(r.recovery_error) +
         "," + std::to_string(r.found_key_index) + "," +
         std::to_string(r.decrypt_calls) + "," + std::to_string(r.agree) + "\n";
  }
  return s;
}

namespace {

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

std::string samples_csv(const FederationResult& fed) {
  std::string s = "trial,entity,kind";
  const std::size_t dim = fed.dist_o_agg.samples.front().size();
  for (std::size_t i = 0; i < dim; ++i) s += ",w" + std::to_string(i);
  s += "\n";
  auto emit = [&](const std::string& entity, const char* kind,
                  const std::vector<Vec>& samples) {
    for (std::size_t t = 0; t < samples.size(); ++t) {
      s += std::to_string(t) + "," + entity + "," + kind;
      for (double v : samples[t]) s += "," + fmt_double(v);
      s += "\n";
    }
  };
  for (std::size_t k = 0; k < fed.dist_o_clients.size(); ++k) {
    emit("c" + std::to_string(k), "O", fed.dist_o_clients[k].samples);
    emit("c" + std::to_string(k), "S", fed.dist_s_clients[k].samples);
  }
  emit("agg", "O", fed.dist_o_agg.samples);
  emit("agg", "S", fed.dist_s_agg.samples);
  return s;
}

std::string traces_csv(const FederationResult& fed) {
  std::string s = "trial,round,mean_loss,grad_norm\n";
  for (const auto& t : fed.traces)
    s += std::to_string(t.trial) + "," + std::to_string(t.round) + "," +
         fmt_double(t.mean_loss) + "," + fmt_double(t.grad_norm) + "\n";
  return s;
}

}  // namespace

void write_run_directory(const ExperimentArtifacts& art,
                         const std::string& dir) {
  const std::string started = iso_now();
  fs::create_directories(dir);
  const fs::path root(dir);
  write_text_file(root / "config.json", serialize_config(art.config));
  write_text_file(root / "samples.csv", samples_csv(art.fed));
  write_text_file(root / "traces.csv", traces_csv(art.fed));
  write_text_file(root / "report.json", serialize_report(art.report));

  RunManifest manifest;
  manifest.config_hash = art.report.config_hash;
  manifest.started_at = started;
  for (const char* name : {"config.json", "samples.csv", "traces.csv",
                           "report.json"}) {
    ManifestEntry e;
    e.path = name;
    e.checksum = hash_file((root / name).string());
    e.bytes = fs::file_size(root / name);
    manifest.files.push_back(std::move(e));
  }
  manifest.finished_at = iso_now();
  write_text_file(root / "manifest.json", serialize_manifest(manifest));
}

std::string resolve_out_root(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("NFLAB_OUT_ROOT"); env && *env) return env;
  return "runs";
}

namespace {

ExperimentConfig load_with_overrides(const std::string& config_path,
                                     std::optional<std::uint64_t> seed,
                                     int jobs) {
  ExperimentConfig cfg = load_config(config_path);
  if (seed) cfg.federation.seed = *seed;
  if (jobs > 0) cfg.federation.jobs = jobs;
  return cfg;
}

fs::path run_dir_for(const ExperimentConfig& cfg, const std::string& out_dir) {
  if (!out_dir.empty()) return out_dir;
  const std::string root =
      resolve_out_root(cfg.out_dir.empty() ? "" : cfg.out_dir);
  return fs::path(root) /
         ("run_" + config_hash(cfg) + "_s" + std::to_string(cfg.federation.seed));
}

}  // namespace

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed_override,
                 int jobs_override) {
  ExperimentConfig cfg;
  try {
    cfg = load_with_overrides(config_path, seed_override, jobs_override);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  try {
    const ExperimentArtifacts art = run_experiment(cfg);
    const fs::path dir = run_dir_for(art.config, out_dir);
    write_run_directory(art, dir.string());
    std::cout << dir.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return 2;
  }
}

int cmd_attack(const std::string& config_path, const std::string& out_dir,
               std::optional<std::uint64_t> seed_override) {
  ExperimentConfig cfg;
  try {
    cfg = load_with_overrides(config_path, std::nullopt, 0);
    if (seed_override) cfg.attacks.seed = *seed_override;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  try {
    const std::vector<AttackRow> rows = run_attack_suite(cfg.attacks);
    const fs::path dir = run_dir_for(cfg, out_dir);
    fs::create_directories(dir);
    write_text_file(dir / "attacks.csv", attack_csv(rows));
    std::cout << (dir / "attacks.csv").string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return 2;
  }
}

int cmd_verify(const std::string& run_dir) {
  const fs::path report_path = fs::path(run_dir) / "report.json";
  if (!fs::exists(report_path)) {
    std::cerr << "error: incomplete run, missing artifact: "
              << report_path.string() << "\n";
    return 2;
  }
  try {
    const TradeoffReport report = load_report(report_path.string());
    const Verdict v = verify_report(report);
    write_text_file(fs::path(run_dir) / "verdict.json", serialize_verdict(v));
    for (const auto& c : v.checks) {
      std::cout << (c.skipped ? "SKIP" : (c.pass ? "PASS" : "FAIL")) << " "
                << c.name;
      if (!c.skipped)
        std::cout << " slack=" << fmt_double(c.slack)
                  << " eps_stat=" << fmt_double(c.eps_stat);
      if (!c.note.empty()) std::cout << " (" << c.note << ")";
      std::cout << "\n";
    }
    std::cout << (v.pass ? "VERDICT PASS" : "VERDICT FAIL") << "\n";
    return v.pass ? 0 : 3;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return 2;
  }
}

int cmd_curve(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed_override, int jobs_override) {
  ExperimentConfig cfg;
  try {
    cfg = load_with_overrides(config_path, seed_override, jobs_override);
    if (!cfg.sweep) throw ConfigError("curve: config has no sweep section");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  try {
    const CurveResult res = run_curve(cfg);
    const fs::path dir = run_dir_for(cfg, out_dir);
    fs::create_directories(dir);
    write_text_file(dir / "curve.csv", curve_csv(res.rows));
    std::cout << (dir / "curve.csv").string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace nflab
