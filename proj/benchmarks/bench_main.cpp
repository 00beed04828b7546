#include <benchmark/benchmark.h>

#include <random>

#include "fedcpu/coeff_select.hpp"
#include "fedcpu/harness.hpp"
#include "fedcpu/lattice.hpp"

using namespace fedcpu;

static void BM_NearestPoint(benchmark::State& state, const char* name) {
  const LatticeSpec lat = LatticeSpec::from_name(name, 1.0);
  Rng rng = make_rng(1);
  std::normal_distribution<double> normal(0.0, 3.0);
  Eigen::VectorXd x(7848);
  for (auto& v : x) v = normal(rng);
  for (auto _ : state) benchmark::DoNotOptimize(lat.quantize(x));
  state.SetItemsProcessed(state.iterations() * x.size());
}
BENCHMARK_CAPTURE(BM_NearestPoint, identity, "identity");
BENCHMARK_CAPTURE(BM_NearestPoint, hexagonal, "hexagonal");
BENCHMARK_CAPTURE(BM_NearestPoint, e8, "e8");

static void BM_Relaxation(benchmark::State& state) {
  Rng rng = make_rng(2);
  ChannelConfig cc;
  cc.antennas = 30;
  cc.devices = static_cast<int>(state.range(0));
  const ChannelRealization h = sample_channel(cc, rng);
  const Eigen::MatrixXd m = decoding_matrix(h, cc.snr);
  SelectionConfig cfg;
  cfg.theta = 0.9 * Eigen::VectorXd::Ones(cc.devices).dot(m * Eigen::VectorXd::Ones(cc.devices));
  for (auto _ : state) benchmark::DoNotOptimize(solve_relaxation(m, 0.07, cfg));
}
BENCHMARK(BM_Relaxation)->Arg(10)->Arg(30);

static void BM_Round(benchmark::State& state) {
  nlohmann::json j = find_preset("baseline").overrides;
  ExperimentConfig cfg = config_from_json(j);
  const LatticeSpec lat = prepare_lattice(cfg);
  const DataSource src = load_data_source(cfg);
  SeedState st = init_seed(cfg, 0, lat, src);
  int round = 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_round(st, cfg, round++ % cfg.training.rounds));
}
BENCHMARK(BM_Round);

BENCHMARK_MAIN();
