#include "nflab/federation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <thread>

namespace nflab {

namespace {

// Stream derivation tags; fixed so artifacts are reproducible across builds.
enum StreamTag : std::uint64_t {
  kTagData = 1,
  kTagInit = 2,
  kTagMech = 3,
  kTagEval = 4,
  kTagHeKey = 5,
};

}  // namespace

void FederationConfig::validate() const {
  if (clients < 2) throw std::invalid_argument("FederationConfig: K >= 2 required");
  if (trials < 2) throw std::invalid_argument("FederationConfig: trials >= 2 required");
  if (rounds < 1) throw std::invalid_argument("FederationConfig: rounds >= 1 required");
  if (steps_per_round < 1)
    throw std::invalid_argument("FederationConfig: steps_per_round >= 1 required");
  if (!(lr > 0.0)) throw std::invalid_argument("FederationConfig: lr > 0 required");
  if (jobs < 1) throw std::invalid_argument("FederationConfig: jobs >= 1 required");
}

DiagGaussian EmpiricalModelDist::fitted(double var_floor) const {
  if (samples.size() < 2)
    throw std::invalid_argument("EmpiricalModelDist: need >= 2 samples to fit");
  MomentFit f = fit_moments(samples);
  for (double& v : f.variance) v = std::max(v, var_floor);
  return DiagGaussian(std::move(f.mean), std::move(f.variance));
}

namespace {

struct TrialOutput {
  std::vector<Vec> o_clients;  // K converged local models
  std::vector<Vec> s_clients;  // K observed releases
  Vec o_agg;
  Vec s_agg;
  double final_grad_norm = 0.0;
  std::vector<RoundTrace> traces;
};

struct HeState {
  SecretKey key;
};

ClientDataset trial_dataset(const FederationConfig& cfg,
                            const std::vector<ClientDataset>& csv_base, int k,
                            int trial, const RngStream& master) {
  if (cfg.csv_path) {
    const ClientDataset& base = csv_base.at(static_cast<std::size_t>(k));
    if (!cfg.resample_per_trial) return base;
    return bootstrap_rows(
        base, master.child(kTagData).child(static_cast<std::uint64_t>(trial) *
                                               static_cast<std::uint64_t>(cfg.clients) +
                                           static_cast<std::uint64_t>(k)));
  }
  DataGenSpec spec = cfg.data;
  const std::uint64_t tag =
      cfg.resample_per_trial
          ? static_cast<std::uint64_t>(trial) * static_cast<std::uint64_t>(cfg.clients) +
                static_cast<std::uint64_t>(k)
          : static_cast<std::uint64_t>(k);
  return generate_dataset(spec, k, master.child(kTagData).child(tag));
}

// Slice first dim entries of the ciphertext's last row, centered mod q and
// rescaled; the "ciphertext as weights" reading of an undecryptable upload.
Vec ciphertext_as_weights(const Ciphertext& c, std::size_t dim, int fp_bits) {
  Vec out(dim, 0.0);
  const std::uint64_t q = c.params.q();
  for (std::size_t i = 0; i < dim && i < c.params.n_cols(); ++i) {
    std::int64_t v = static_cast<std::int64_t>(c.at(c.params.lwe_dim, i));
    if (v >= static_cast<std::int64_t>(q / 2)) v -= static_cast<std::int64_t>(q);
    out[i] = dequantize_fixed(v, fp_bits);
  }
  return out;
}

TrialOutput run_trial(const FederationConfig& cfg,
                      const std::vector<ClientDataset>& csv_base,
                      const HeState* he, int trial, const RngStream& master) {
  const int K = cfg.clients;
  std::vector<ClientDataset> data;
  data.reserve(K);
  for (int k = 0; k < K; ++k)
    data.push_back(trial_dataset(cfg, csv_base, k, trial, master));

  RngStream init = master.child(kTagInit).child(trial);
  ModelVector global{Vec(data.front().cols), cfg.model_kind};
  for (double& w : global.weights) w = init.normal(0.0, cfg.init_scale);

  TrialOutput out;
  std::vector<ModelVector> locals(K, global);
  for (int r = 0; r < cfg.rounds; ++r) {
    for (int k = 0; k < K; ++k)
      locals[k] = local_update(global, data[k], cfg.steps_per_round, cfg.lr);
    global = fedavg_aggregate(locals);
    if (cfg.record_traces) {
      double loss = 0.0, gn = 0.0;
      for (int k = 0; k < K; ++k) {
        loss += training_loss(global, data[k]);
        gn += norm2(loss_gradient(global, data[k]));
      }
      out.traces.push_back({trial, r, loss / K, gn / K});
    }
  }
  {
    double gn = 0.0;
    for (int k = 0; k < K; ++k) gn += norm2(loss_gradient(global, data[k]));
    out.final_grad_norm = gn / K;
  }

  for (int k = 0; k < K; ++k) out.o_clients.push_back(locals[k].weights);
  out.o_agg = global.weights;

  RngStream mech = master.child(kTagMech).child(trial);
  try {
    if (std::holds_alternative<NoOpSpec>(cfg.mechanism)) {
      out.s_clients = out.o_clients;
      out.s_agg = out.o_agg;
    } else if (const auto* rnd = std::get_if<RandomizationSpec>(&cfg.mechanism)) {
      std::vector<ModelVector> prot;
      for (int k = 0; k < K; ++k) {
        RngStream ck = mech.child(k);
        prot.push_back(randomize(locals[k], rnd->sigma_eps, ck));
        out.s_clients.push_back(prot.back().weights);
      }
      out.s_agg = fedavg_aggregate(prot).weights;
    } else if (const auto* sp = std::get_if<SparsitySpec>(&cfg.mechanism)) {
      std::vector<ModelVector> prot;
      for (int k = 0; k < K; ++k) {
        RngStream ck = mech.child(k);
        prot.push_back(sparsify(locals[k], *sp, ck));
        out.s_clients.push_back(prot.back().weights);
      }
      out.s_agg = fedavg_aggregate(prot).weights;
    } else if (const auto* ss = std::get_if<SecretSharingSpec>(&cfg.mechanism)) {
      // The wire format is fixed point, for both the unprotected record and
      // the shares, so mask cancellation is exact and eps_u is exactly zero.
      std::vector<ModelVector> lattice;
      for (int k = 0; k < K; ++k) {
        ModelVector m = locals[k];
        m.weights = snap_to_lattice(m.weights, ss->fixed_point_bits);
        lattice.push_back(std::move(m));
        out.o_clients[k] = lattice.back().weights;
      }
      out.o_agg = fedavg_aggregate(lattice).weights;
      const SecretShareResult shares = secret_share(lattice, *ss, mech);
      for (int k = 0; k < K; ++k)
        out.s_clients.push_back(shares.shares[k][0]);
      out.s_agg.resize(out.o_agg.size());
      for (std::size_t i = 0; i < out.s_agg.size(); ++i)
        out.s_agg[i] = shares.reconstructed_sum[i] / static_cast<double>(K);
    } else if (const auto* hespec = std::get_if<ToyHeSpec>(&cfg.mechanism)) {
      const std::size_t dim = out.o_agg.size();
      std::vector<std::vector<Ciphertext>> cts(K);
      for (int k = 0; k < K; ++k) {
        RngStream ck = mech.child(k);
        for (std::size_t i = 0; i < dim; ++i)
          cts[k].push_back(he_encrypt(
              quantize_fixed(locals[k].weights[i], hespec->fixed_point_bits),
              he->key, ck.child(i)));
      }
      std::vector<Ciphertext> sum = cts[0];
      for (int k = 1; k < K; ++k)
        for (std::size_t i = 0; i < dim; ++i) sum[i] = he_add(sum[i], cts[k][i]);
      if (hespec->key_known) {
        for (int k = 0; k < K; ++k) {
          Vec w(dim);
          for (std::size_t i = 0; i < dim; ++i)
            w[i] = dequantize_fixed(he_decrypt(cts[k][i], he->key),
                                    hespec->fixed_point_bits);
          out.s_clients.push_back(std::move(w));
        }
        out.s_agg.resize(dim);
        for (std::size_t i = 0; i < dim; ++i)
          out.s_agg[i] = dequantize_fixed(he_decrypt(sum[i], he->key),
                                          hespec->fixed_point_bits) /
                         static_cast<double>(K);
      } else {
        for (int k = 0; k < K; ++k)
          out.s_clients.push_back(
              ciphertext_as_weights(cts[k][0], dim, hespec->fixed_point_bits));
        Vec agg(dim, 0.0);
        for (std::size_t i = 0; i < dim; ++i)
          agg[i] = ciphertext_as_weights(sum[i], 1, hespec->fixed_point_bits)[0] /
                   static_cast<double>(K);
        out.s_agg = std::move(agg);
      }
    }
  } catch (const std::exception& e) {
    throw std::runtime_error("mechanism failure at trial " +
                             std::to_string(trial) + ", round " +
                             std::to_string(cfg.rounds) + ": " + e.what());
  }
  return out;
}

}  // namespace

FederationResult run_federation(const FederationConfig& cfg) {
  cfg.validate();
  RngStream master(cfg.seed);

  std::vector<ClientDataset> csv_base;
  if (cfg.csv_path) {
    ClientDataset all = load_csv_dataset(*cfg.csv_path, -1);
    const std::size_t per = all.rows / cfg.clients;
    if (per == 0)
      throw std::runtime_error("run_federation: CSV has fewer rows than clients");
    for (int k = 0; k < cfg.clients; ++k) {
      Vec f(all.features.begin() + k * per * all.cols,
            all.features.begin() + (k + 1) * per * all.cols);
      Vec t(all.targets.begin() + k * per, all.targets.begin() + (k + 1) * per);
      csv_base.emplace_back(std::move(f), std::move(t), per, all.cols, k);
    }
  }

  std::optional<HeState> he;
  if (const auto* hespec = std::get_if<ToyHeSpec>(&cfg.mechanism)) {
    hespec->params.validate();
    he = HeState{he_keygen(hespec->params, master.child(kTagHeKey))};
  }

  std::vector<TrialOutput> trials(cfg.trials);
  auto worker = [&](int begin, int end) {
    for (int t = begin; t < end; ++t)
      trials[t] = run_trial(cfg, csv_base, he ? &*he : nullptr, t, master);
  };
  if (cfg.jobs <= 1) {
    worker(0, cfg.trials);
  } else {
    const int n_threads = std::min(cfg.jobs, cfg.trials);
    std::vector<std::thread> pool;
    const int chunk = (cfg.trials + n_threads - 1) / n_threads;
    for (int i = 0; i < n_threads; ++i)
      pool.emplace_back(worker, i * chunk, std::min(cfg.trials, (i + 1) * chunk));
    for (auto& th : pool) th.join();
  }

  FederationResult res;
  res.dist_o_clients.resize(cfg.clients);
  res.dist_s_clients.resize(cfg.clients);
  res.s_is_opaque = std::holds_alternative<ToyHeSpec>(cfg.mechanism) &&
                    !std::get<ToyHeSpec>(cfg.mechanism).key_known;
  // Ordered reduction by trial index keeps outputs deterministic for any
  // job count.
  for (int t = 0; t < cfg.trials; ++t) {
    TrialOutput& tr = trials[t];
    for (int k = 0; k < cfg.clients; ++k) {
      res.dist_o_clients[k].samples.push_back(std::move(tr.o_clients[k]));
      res.dist_s_clients[k].samples.push_back(std::move(tr.s_clients[k]));
    }
    res.dist_o_agg.samples.push_back(std::move(tr.o_agg));
    res.dist_s_agg.samples.push_back(std::move(tr.s_agg));
    res.final_grad_norms.push_back(tr.final_grad_norm);
    for (auto& row : tr.traces) res.traces.push_back(row);
  }

  for (int k = 0; k < cfg.clients; ++k) {
    if (cfg.csv_path) {
      res.eval_data.push_back(csv_base[k]);
    } else {
      DataGenSpec eval_spec = cfg.data;
      eval_spec.samples = cfg.eval_samples;
      res.eval_data.push_back(
          generate_dataset(eval_spec, k, master.child(kTagEval).child(k)));
    }
  }
  return res;
}

double mean_utility(const Vec& w, ModelKind kind,
                    const std::vector<ClientDataset>& eval_data,
                    const UtilitySpec& spec) {
  ModelVector m{w, kind};
  double s = 0.0;
  for (const auto& d : eval_data) s += utility(m, d, spec);
  return s / static_cast<double>(eval_data.size());
}

UtilityLossResult utility_loss(const EmpiricalModelDist& dist_o_agg,
                               const EmpiricalModelDist& dist_s_agg,
                               ModelKind kind,
                               const std::vector<ClientDataset>& eval_data,
                               const UtilitySpec& spec) {
  const std::size_t n = dist_o_agg.samples.size();
  if (n != dist_s_agg.samples.size())
    throw std::invalid_argument("utility_loss: sample count mismatch");
  if (n == 0) throw std::invalid_argument("utility_loss: empty distributions");

  UtilityLossResult out;
  out.per_client.resize(eval_data.size());
  double var_acc = 0.0;
  for (std::size_t k = 0; k < eval_data.size(); ++k) {
    Vec diffs(n);
    double mean_diff = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      ModelVector mo{dist_o_agg.samples[t], kind};
      ModelVector ms{dist_s_agg.samples[t], kind};
      diffs[t] = utility(mo, eval_data[k], spec) - utility(ms, eval_data[k], spec);
      mean_diff += diffs[t];
    }
    mean_diff /= static_cast<double>(n);
    out.per_client[k] = mean_diff;
    double v = 0.0;
    for (double d : diffs) v += (d - mean_diff) * (d - mean_diff);
    v /= n > 1 ? static_cast<double>(n - 1) : 1.0;
    var_acc += v / static_cast<double>(n);
  }
  for (double d : out.per_client) out.eps_u += d;
  out.eps_u /= static_cast<double>(eval_data.size());
  out.std_error =
      std::sqrt(var_acc) / static_cast<double>(eval_data.size());
  return out;
}

UStarResult estimate_u_star(const EmpiricalModelDist& dist_o_agg,
                            const EmpiricalModelDist& dist_s_agg,
                            ModelKind kind,
                            const std::vector<ClientDataset>& eval_data,
                            const UtilitySpec& spec, double lr,
                            int polish_steps) {
  UStarResult best{-1.0, {}};
  auto consider = [&](const Vec& w) {
    const double u = mean_utility(w, kind, eval_data, spec);
    if (u > best.u_star) best = {u, w};
  };
  for (const auto& w : dist_o_agg.samples) consider(w);
  for (const auto& w : dist_s_agg.samples) consider(w);
  if (best.w_star.empty())
    throw std::invalid_argument("estimate_u_star: no samples");

  // Local polish: descend the pooled training loss from the best sample.
  ModelVector m{best.w_star, kind};
  for (int s = 0; s < polish_steps; ++s) {
    Vec g(m.dim(), 0.0);
    for (const auto& d : eval_data) {
      const Vec gk = loss_gradient(m, d);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += gk[i];
    }
    for (std::size_t i = 0; i < g.size(); ++i)
      m.weights[i] -= lr * g[i] / static_cast<double>(eval_data.size());
    if (!all_finite(m.weights)) break;
    consider(m.weights);
  }
  return best;
}

double compute_delta(const EmpiricalModelDist& dist_s_agg,
                     const UStarResult& u_star, ModelKind kind,
                     const std::vector<ClientDataset>& eval_data,
                     const UtilitySpec& spec, double tv_a, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("compute_delta: tol must be > 0");
  if (!(tv_a > 0.0))
    throw AssumptionViolated(
        "compute_delta: aggregate TV is zero (degenerate no-protection case), "
        "Assumption of positive Delta fails");
  const std::size_t n = dist_s_agg.samples.size();
  Vec alpha(n);
  for (std::size_t t = 0; t < n; ++t)
    alpha[t] = std::abs(u_star.u_star - mean_utility(dist_s_agg.samples[t], kind,
                                                     eval_data, spec));
  const double cap = tv_a / 2.0;
  auto mass = [&](double delta) {
    std::size_t c = 0;
    for (double a : alpha)
      if (a <= delta) ++c;
    return static_cast<double>(c) / static_cast<double>(n);
  };
  if (mass(tol) > cap)
    throw AssumptionViolated(
        "compute_delta: near-optimal mass exceeds TV/2 as Delta -> 0 "
        "(Assumption 1 violated, Delta <= 0)");

  double lo = tol;
  double hi = 1.0;
  // Utilities live in [0,1]; mass(1.0) = 1 > cap unless TV = 2, impossible.
  if (mass(hi) <= cap) return hi;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mass(mid) <= cap)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

GammaResult compute_gamma(const Vec& tv_clients, double tv_a) {
  if (tv_clients.empty())
    throw std::invalid_argument("compute_gamma: no client TVs");
  if (!(tv_a > 0.0))
    throw std::invalid_argument("compute_gamma: aggregate TV is zero");
  double s = 0.0;
  for (double v : tv_clients) s += v;
  return {s / static_cast<double>(tv_clients.size()) / tv_a, s / tv_a};
}

std::pair<ReleasedDist, ReleasedDist> histogram_pair(
    const std::vector<Vec>& o_samples, const std::vector<Vec>& s_samples,
    int bins_per_dim, bool s_opaque) {
  if (o_samples.empty() || s_samples.empty())
    throw std::invalid_argument("histogram_pair: empty sample set");
  const std::size_t dim = o_samples.front().size();
  if (dim > 3)
    throw std::invalid_argument(
        "histogram_pair: dims > 3 need the parametric DiagGaussian path");
  if (bins_per_dim < 1)
    throw std::invalid_argument("histogram_pair: bins_per_dim must be >= 1");

  Vec lo(dim, std::numeric_limits<double>::infinity());
  Vec hi(dim, -std::numeric_limits<double>::infinity());
  auto widen = [&](const std::vector<Vec>& set) {
    for (const auto& v : set)
      for (std::size_t d = 0; d < dim; ++d) {
        lo[d] = std::min(lo[d], v[d]);
        hi[d] = std::max(hi[d], v[d]);
      }
  };
  widen(o_samples);
  widen(s_samples);
  for (std::size_t d = 0; d < dim; ++d) {
    const double pad = 1e-9 * std::max(1.0, std::abs(hi[d]) + std::abs(lo[d]));
    lo[d] -= pad;
    hi[d] += pad;
  }

  auto flat_index = [&](const Vec& v) {
    std::size_t idx = 0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double t = (v[d] - lo[d]) / (hi[d] - lo[d]);
      auto bin = static_cast<std::size_t>(t * bins_per_dim);
      bin = std::min(bin, static_cast<std::size_t>(bins_per_dim - 1));
      idx = idx * bins_per_dim + bin;
    }
    return idx;
  };
  auto bin_center = [&](std::size_t idx) {
    Vec c(dim);
    for (std::size_t d = dim; d-- > 0;) {
      const std::size_t bin = idx % bins_per_dim;
      idx /= bins_per_dim;
      c[d] = lo[d] + (hi[d] - lo[d]) * (static_cast<double>(bin) + 0.5) /
                         bins_per_dim;
    }
    return c;
  };

  std::map<std::size_t, std::pair<std::size_t, std::size_t>> counts;
  for (const auto& v : o_samples) counts[flat_index(v)].first++;
  for (const auto& v : s_samples) counts[flat_index(v)].second++;

  ReleasedDist o, s;
  for (const auto& [idx, c] : counts) {
    const Vec center = bin_center(idx);
    const std::string label = "b" + std::to_string(idx);
    o.atoms.push_back({center,
                       static_cast<double>(c.first) / o_samples.size(), false,
                       label});
    s.atoms.push_back({center,
                       static_cast<double>(c.second) / s_samples.size(),
                       s_opaque, label});
  }
  return {std::move(o), std::move(s)};
}

}  // namespace nflab
