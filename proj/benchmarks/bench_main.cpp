#include <benchmark/benchmark.h>

#include "nflab/belief.hpp"
#include "nflab/divergence.hpp"
#include "nflab/federation.hpp"
#include "nflab/toyhe.hpp"

namespace {

using namespace nflab;

DiscretePMF random_pmf(RngStream& rng, std::size_t n) {
  Vec m(n);
  double total = 0.0;
  for (double& v : m) {
    v = rng.uniform(0.01, 1.0);
    total += v;
  }
  for (double& v : m) v /= total;
  return DiscretePMF(std::move(m));
}

void BM_JsDiscrete(benchmark::State& state) {
  RngStream rng(1);
  const auto p = random_pmf(rng, state.range(0));
  const auto q = random_pmf(rng, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(js_discrete(p, q).value);
}
BENCHMARK(BM_JsDiscrete)->Arg(16)->Arg(256)->Arg(4096);

void BM_TvGaussian1D(benchmark::State& state) {
  const DiagGaussian a({0.0}, {1.0});
  const DiagGaussian b({0.5}, {1.7});
  for (auto _ : state) benchmark::DoNotOptimize(tv_gaussian(a, b).value);
}
BENCHMARK(BM_TvGaussian1D);

void BM_TvGaussian2D(benchmark::State& state) {
  const DiagGaussian a({0.0, 0.0}, {1.0, 1.0});
  const DiagGaussian b({0.3, -0.2}, {1.5, 0.8});
  for (auto _ : state) benchmark::DoNotOptimize(tv_gaussian(a, b).value);
}
BENCHMARK(BM_TvGaussian2D);

void BM_Posterior(benchmark::State& state) {
  RngStream rng(2);
  const std::size_t n_cand = state.range(0);
  std::vector<ClientDataset> cands;
  std::vector<Vec> releases;
  DataGenSpec gen;
  for (std::size_t j = 0; j < n_cand; ++j) {
    cands.push_back(generate_dataset(gen, 0, rng.child(j)));
    releases.push_back({rng.normal(), rng.normal()});
  }
  CandidateUniverse uni(std::move(cands),
                        DiscretePMF(Vec(n_cand, 1.0 / n_cand)));
  LikelihoodModel lik(std::move(releases), 0.1);
  const Vec w = {0.1, -0.2};
  for (auto _ : state)
    benchmark::DoNotOptimize(posterior(w, uni, lik).pmf.size());
}
BENCHMARK(BM_Posterior)->Arg(4)->Arg(16)->Arg(64);

void BM_HeEncryptDecrypt(benchmark::State& state) {
  RngStream rng(3);
  const HeParams params;
  const SecretKey key = he_keygen(params, rng.child(0));
  std::uint64_t tag = 1;
  for (auto _ : state) {
    const Ciphertext c = he_encrypt(123, key, rng.child(tag++));
    benchmark::DoNotOptimize(he_decrypt(c, key));
  }
}
BENCHMARK(BM_HeEncryptDecrypt);

void BM_FederationTrial(benchmark::State& state) {
  FederationConfig cfg;
  cfg.clients = 4;
  cfg.rounds = 10;
  cfg.trials = 2;
  cfg.record_traces = false;
  for (auto _ : state) {
    const FederationResult res = run_federation(cfg);
    benchmark::DoNotOptimize(res.dist_o_agg.samples.size());
  }
}
BENCHMARK(BM_FederationTrial);

}  // namespace

BENCHMARK_MAIN();
