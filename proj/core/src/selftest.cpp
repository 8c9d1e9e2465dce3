#include "orthosep/selftest.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <span>

#include "orthosep/kinetics.hpp"
#include "orthosep/optimizer.hpp"
#include "orthosep/projection.hpp"
#include "orthosep/rng.hpp"
#include "orthosep/scheduler.hpp"
#include "orthosep/stats.hpp"
#include "orthosep/training.hpp"

namespace orthosep {
namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
  }
  return m;
}

CheckResult check_projector() {
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd X = random_matrix(200, 7, rng);
    const Eigen::VectorXd e = random_matrix(200, 1, rng).col(0);

    const auto pinv = gram_factorize(X, ProjectorSpec{ProjectorMode::pinv});
    const auto ridge = gram_factorize(X, ProjectorSpec{ProjectorMode::ridge});

    const Eigen::VectorXd p1 = project_parallel(X, pinv, e);
    const Eigen::VectorXd p2 = project_parallel(X, pinv, p1);
    worst = std::max(worst, (p2 - p1).norm() / (p1.norm() + 1e-30));

    const auto d = decompose_residual(X, pinv, e);
    worst = std::max(worst, std::abs(e.squaredNorm() - d.r_par.squaredNorm() -
                                     d.r_perp.squaredNorm()) /
                               e.squaredNorm());
    worst = std::max(worst, (X.transpose() * d.r_perp).norm() / e.norm());

    // Dense-projector agreement, both modes.
    const Eigen::MatrixXd gram = X.transpose() * X;
    const Eigen::MatrixXd dense_ridge =
        X * (gram + 1e-3 * Eigen::MatrixXd::Identity(7, 7)).inverse() * X.transpose();
    worst = std::max(
        worst, (dense_ridge * e - project_parallel(X, ridge, e)).cwiseAbs().maxCoeff());

    // Ridge identity, evaluated in extended precision.
    using MatLd = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    using VecLd = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
    const auto dr = decompose_residual(X, ridge, e);
    const MatLd Xl = X.cast<long double>();
    const VecLd lhs = Xl.transpose() * dr.r_perp.cast<long double>();
    MatLd A = Xl.transpose() * Xl;
    A.diagonal().array() += 1e-3L;
    const VecLd rhs = 1e-3L * (A.inverse() * (Xl.transpose() * e.cast<long double>()));
    worst = std::max(worst, static_cast<double>((lhs - rhs).norm() / rhs.norm()));
  }
  return {"projector identities", worst < 1e-9, "worst deviation " + fmt(worst)};
}

CheckResult check_gradients() {
  Rng rng(11);
  const int n_features = 7, rows = 32;
  const Eigen::MatrixXd X = random_matrix(rows, n_features, rng) * 0.3;
  const Eigen::VectorXd y = random_matrix(rows, 1, rng).col(0);

  ModelConfig mc;
  mc.fourier_features = 4;
  mc.hidden_width = 8;
  mc.hidden_layers = 3;
  SirenModel model = build_model(mc, n_features, 5);
  const auto fact = gram_factorize(X, ProjectorSpec{ProjectorMode::ridge});

  auto loss_of = [&](const SirenModel& m) {
    auto [loss, grads] = loss_and_grad(m, X, y, fact, 1.0);
    return loss.total;
  };

  auto [loss, grads] = loss_and_grad(model, X, y, fact, 1.0);
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    for (Eigen::Index r = 0; r < model.layers[k].W.rows(); ++r) {
      for (Eigen::Index c = 0; c < model.layers[k].W.cols(); ++c) {
        SirenModel lo = model, hi = model;
        lo.layers[k].W(r, c) -= h;
        hi.layers[k].W(r, c) += h;
        const double numeric = (loss_of(hi) - loss_of(lo)) / (2 * h);
        const double analytic = grads[k].W(r, c);
        worst = std::max(worst, std::abs(numeric - analytic) /
                                    std::max({std::abs(numeric), std::abs(analytic),
                                              1e-8}));
      }
    }
  }
  return {"analytic gradients vs finite differences", worst < 1e-4,
          "worst relative error " + fmt(worst)};
}

CheckResult check_tofts() {
  TimeGrid grid;
  for (int k = 0; k <= 240; ++k) grid.t.push_back(static_cast<double>(k));
  AIF constant;
  constant.cp.assign(grid.size(), 2.0);

  double worst = 0.0;
  const ToftsParams p{0.004, 0.3, 0.05};
  const auto curve = tofts_forward(p, constant, grid);
  const double kep = p.ktrans / p.ve;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double closed =
        p.vp * 2.0 + 2.0 * p.ve * (1.0 - std::exp(-kep * grid.t[k]));
    worst = std::max(worst, std::abs(curve[k] - closed) / closed);
  }

  // ktrans = 0 collapses to the plasma term exactly.
  AIF pop = population_aif(grid, 10.0, 1.0, 0.05, 0.003);
  const auto plasma = tofts_forward(ToftsParams{0.0, 0.3, 0.07}, pop, grid);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    worst = std::max(worst, std::abs(plasma[k] - 0.07 * pop.cp[k]));
  }

  // Noiseless recovery.
  const ToftsParams truth{0.0031, 0.42, 0.06};
  auto observed = tofts_forward(truth, pop, grid);
  for (double& v : observed) v += 0.11;
  const ToftsFit fit = fit_tofts(observed, pop, grid, ToftsParams{0.002, 0.3, 0.05});
  worst = std::max(worst, std::abs(fit.params.ktrans - truth.ktrans) / truth.ktrans);
  worst = std::max(worst, std::abs(fit.params.ve - truth.ve) / truth.ve);
  worst = std::max(worst, std::abs(fit.params.vp - truth.vp) / truth.vp);
  worst = std::max(worst, std::abs(fit.offset - 0.11) / 0.11);

  return {"exchange model oracles", worst < 2e-2, "worst deviation " + fmt(worst)};
}

CheckResult check_rank_sum() {
  const std::vector<double> a{1, 2, 3};
  const std::vector<double> b{10, 20, 30};
  const double p = rank_sum_exact(a, b);
  bool pass = std::abs(p - 0.1) < 1e-12;

  Rng rng(3);
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> x(8), z(8);
    for (auto& v : x) v = rng.normal();
    for (auto& v : z) v = rng.normal() + 0.3;
    const double exact = rank_sum_exact(x, z);
    const double approx = rank_sum_normal_approx(x, z);
    worst = std::max(worst, std::abs(exact - approx));
  }
  pass = pass && worst < 0.02;
  return {"rank-sum exact and approximate paths", pass,
          "p(1,2,3 vs 10,20,30) = " + fmt(p) + ", path gap " + fmt(worst)};
}

CheckResult check_encoding_and_optimizer() {
  auto enc = FourierEncoding::create(16, 7, 1.0, 99);
  Rng rng(4);
  const Eigen::MatrixXd X = random_matrix(10, 7, rng);
  const Eigen::MatrixXd phi = enc.encode(X);
  bool pass = phi.maxCoeff() <= 1.0 && phi.minCoeff() >= -1.0;
  double worst = 0.0;
  for (Eigen::Index r = 0; r < phi.rows(); ++r) {
    for (Eigen::Index j = 0; j < 16; ++j) {
      const double s = phi(r, j), c = phi(r, 16 + j);
      worst = std::max(worst, std::abs(s * s + c * c - 1.0));
    }
  }
  pass = pass && worst < 1e-12;

  // One Adam step on a single unit-gradient parameter.
  std::vector<DenseLayer> layer(1);
  layer[0].W = Eigen::MatrixXd::Zero(1, 1);
  layer[0].b = Eigen::VectorXd::Zero(1);
  std::vector<DenseLayer> grad(1);
  grad[0].W = Eigen::MatrixXd::Ones(1, 1);
  grad[0].b = Eigen::VectorXd::Zero(1);
  auto state = make_optimizer_state(layer);
  adam_amsgrad_step(state, layer, grad, 1e-5);
  const double expected = -1e-5 / (1.0 + 1e-8);
  pass = pass && std::abs(layer[0].W(0, 0) - expected) < 1e-18;

  // Six stalled epochs halve the rate exactly once.
  PlateauScheduler sched(PlateauConfig{}, 1e-5);
  sched.step(1.0);
  double lr = 1e-5;
  for (int k = 0; k < 6; ++k) lr = sched.step(1.0);
  pass = pass && lr == 0.5e-5 && sched.stall_count() == 0;

  return {"encoding bounds, optimizer step, scheduler trace", pass,
          "sin^2+cos^2 deviation " + fmt(worst)};
}

}  // namespace

std::vector<CheckResult> run_selftests() {
  std::vector<CheckResult> results;
  results.push_back(check_projector());
  results.push_back(check_gradients());
  results.push_back(check_tofts());
  results.push_back(check_rank_sum());
  results.push_back(check_encoding_and_optimizer());
  return results;
}

}  // namespace orthosep
