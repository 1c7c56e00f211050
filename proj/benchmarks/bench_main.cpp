#include <benchmark/benchmark.h>

#include <random>

#include "dfx/econ/design.hpp"
#include "dfx/econ/estimation.hpp"
#include "dfx/econ/models.hpp"
#include "dfx/features.hpp"
#include "dfx/inpaint.hpp"
#include "dfx/observations.hpp"
#include "dfx/simulator.hpp"

using namespace dfx;

namespace {

std::vector<ObservationRow> simulated(std::uint32_t participants) {
  DgpConfig c;
  c.n_participants = participants;
  c.trials_per_participant = 12;
  c.participant_effect_sd = 0.025;
  c.image_effect_sd = 0.025;
  c.seed = 1;
  const auto sim = simulate(c, synthetic_pools(440, 440, 1));
  return build_observations(fold(sim.records), sim.features);
}

void BM_Delentropy(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 gen(1);
  std::uniform_int_distribution<int> u(0, 255);
  GrayImage img(side, side);
  for (auto& v : img.data()) v = u(gen);
  for (auto _ : state) benchmark::DoNotOptimize(delentropy(img));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(side * side));
}
BENCHMARK(BM_Delentropy)->Arg(64)->Arg(256)->Arg(1024);

void BM_HarmonicFill(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0.0, 255.0);
  Raster img(side, side, 3);
  for (auto& v : img.data) v = u(gen);
  Mask mask(side, side, 0);
  for (std::size_t r = side / 3; r < side / 2; ++r)
    for (std::size_t c = side / 3; c < side / 2; ++c) mask(r, c) = 1;
  for (auto _ : state) benchmark::DoNotOptimize(remove_object({img, mask, 1e-3}));
}
BENCHMARK(BM_HarmonicFill)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_DemeanTwoWay(benchmark::State& state) {
  const auto rows = econ::canonical_order(simulated(static_cast<std::uint32_t>(state.range(0))));
  Eigen::MatrixXd x(rows.size(), 1);
  Eigen::VectorXd y(rows.size());
  std::vector<std::string> p, i;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    x(r, 0) = std::log(static_cast<double>(rows[r].position));
    y(r) = rows[r].accuracy;
    p.push_back(rows[r].participant_key);
    i.push_back(rows[r].image_key);
  }
  const econ::DesignMatrix d(x, {"log_position"}, y, econ::encode_factor("image", i),
                             {econ::encode_factor("participant", p), econ::encode_factor("image", i)});
  for (auto _ : state) benchmark::DoNotOptimize(econ::demean_two_way(d));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows.size()));
}
BENCHMARK(BM_DemeanTwoWay)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_ClusterVcov(benchmark::State& state) {
  const auto n = state.range(0);
  std::mt19937_64 gen(3);
  std::normal_distribution<double> z;
  Eigen::MatrixXd x(n, 10);
  Eigen::VectorXd e(n);
  std::vector<std::string> keys;
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < 10; ++c) x(r, c) = z(gen);
    e(r) = z(gen);
    keys.push_back("g" + std::to_string(gen() % 440));
  }
  const auto f = econ::encode_factor("image", keys);
  for (auto _ : state) benchmark::DoNotOptimize(econ::cluster_robust_vcov(x, e, f));
}
BENCHMARK(BM_ClusterVcov)->Arg(60000)->Unit(benchmark::kMillisecond);

void BM_FitLogPosition(benchmark::State& state) {
  const auto rows = simulated(static_cast<std::uint32_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(econ::fit_log_position(rows, {}));
}
BENCHMARK(BM_FitLogPosition)->Arg(5000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
