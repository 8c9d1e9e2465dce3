#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "orthosep/encoding.hpp"
#include "orthosep/kinetics.hpp"
#include "orthosep/projection.hpp"
#include "orthosep/rng.hpp"
#include "orthosep/siren.hpp"
#include "orthosep/training.hpp"

using namespace orthosep;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
  }
  return m;
}

void BM_GramFactorize(benchmark::State& state) {
  const Eigen::MatrixXd X = random_matrix(state.range(0), 7, 1);
  const ProjectorSpec spec;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gram_factorize(X, spec));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GramFactorize)->Arg(4096)->Arg(32768);

void BM_ProjectParallel(benchmark::State& state) {
  const Eigen::MatrixXd X = random_matrix(state.range(0), 7, 2);
  const Eigen::VectorXd e = random_matrix(state.range(0), 1, 3).col(0);
  const auto fact = gram_factorize(X, ProjectorSpec{});
  for (auto _ : state) {
    benchmark::DoNotOptimize(project_parallel(X, fact, e));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ProjectParallel)->Arg(4096)->Arg(100000);

void BM_FourierEncode(benchmark::State& state) {
  const auto enc = FourierEncoding::create(128, 7, 1.0, 4);
  const Eigen::MatrixXd X = random_matrix(state.range(0), 7, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(enc.encode(X));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FourierEncode)->Arg(4096);

void BM_SirenForward(benchmark::State& state) {
  SirenModel model = build_model(ModelConfig{}, 7, 6);
  const auto enc = model.encoding.encode(random_matrix(state.range(0), 7, 7));
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(model, enc));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SirenForward)->Arg(4096);

void BM_TrainStep(benchmark::State& state) {
  const Eigen::MatrixXd X = random_matrix(4096, 7, 8) * 0.3;
  const Eigen::VectorXd y = random_matrix(4096, 1, 9).col(0);
  SirenModel model = build_model(ModelConfig{}, 7, 10);
  auto opt = make_optimizer_state(model.layers);
  const auto fact = gram_factorize(X, ProjectorSpec{});
  const Eigen::MatrixXd enc = model.encoding.encode(X);
  for (auto _ : state) {
    auto [loss, grads] = loss_and_grad_encoded(model, enc, X, y, fact, 1.0);
    adam_amsgrad_step(opt, model.layers, grads, 1e-5);
    benchmark::DoNotOptimize(loss.total);
  }
  state.SetItemsProcessed(state.iterations() * 4096);
}
BENCHMARK(BM_TrainStep);

void BM_ToftsForward(benchmark::State& state) {
  TimeGrid grid;
  for (int k = 0; k < 121; ++k) grid.t.push_back(2.0 * k);
  const AIF aif = population_aif(grid, 10.0, 1.0, 0.05, 0.003);
  const ToftsParams p{0.004, 0.4, 0.05};
  for (auto _ : state) {
    benchmark::DoNotOptimize(tofts_forward(p, aif, grid));
  }
}
BENCHMARK(BM_ToftsForward);

void BM_ToftsFit(benchmark::State& state) {
  TimeGrid grid;
  for (int k = 0; k < 121; ++k) grid.t.push_back(2.0 * k);
  const AIF aif = population_aif(grid, 10.0, 1.0, 0.05, 0.003);
  const auto curve = tofts_forward(ToftsParams{0.004, 0.4, 0.05}, aif, grid);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        fit_tofts(curve, aif, grid, ToftsParams{0.002, 0.3, 0.05}));
  }
}
BENCHMARK(BM_ToftsFit);

}  // namespace

BENCHMARK_MAIN();
