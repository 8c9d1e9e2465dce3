// Acceptance suite: each criterion prints one pass/fail line and the binary
// exits nonzero if any requested criterion fails. Run with no arguments for
// the full suite or with a criterion number (1-8) for a single one.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <span>
#include <string>
#include <vector>

#include "commands.hpp"
#include "orthosep/eval.hpp"
#include "orthosep/kinetics.hpp"
#include "orthosep/phantom.hpp"
#include "orthosep/preprocess.hpp"
#include "orthosep/projection.hpp"
#include "orthosep/rng.hpp"
#include "orthosep/run_config.hpp"
#include "orthosep/stats.hpp"
#include "orthosep/training.hpp"

using namespace orthosep;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
  }
  return m;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / "orthosep_acceptance" / tag;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) return "<missing:" + p.string() + ">";
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::trunc);
  f << text;
}

// --- 1. Projector identities ------------------------------------------------

/// Feature rows shaped like the real pipeline emits them: structural and
/// time-to-peak channels min-max normalized into [0, 1], exchange-model
/// channels z-scored at 1/20 scale.
Eigen::MatrixXd domain_feature_matrix(Eigen::Index rows, Rng& rng) {
  Eigen::MatrixXd X(rows, 7);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (int c : {0, 1, 2, 6}) X(r, c) = rng.uniform01();
    for (int c : {3, 4, 5}) X(r, c) = 0.05 * rng.normal();
  }
  return X;
}

Outcome criterion_projector() {
  Rng rng(101);
  double worst_pinv = 0.0, worst_ridge = 0.0, worst_dense = 0.0;

  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::MatrixXd X = domain_feature_matrix(1000, rng);
    const Eigen::VectorXd e = random_matrix(1000, 1, rng).col(0);
    const Eigen::VectorXd u = random_matrix(1000, 1, rng).col(0);
    const Eigen::VectorXd v = random_matrix(1000, 1, rng).col(0);

    const auto pinv = gram_factorize(X, ProjectorSpec{ProjectorMode::pinv});
    const Eigen::VectorXd p1 = project_parallel(X, pinv, e);
    const Eigen::VectorXd p2 = project_parallel(X, pinv, p1);
    worst_pinv = std::max(worst_pinv, (p2 - p1).norm() / (p1.norm() + 1e-300));

    const double sym_a = u.dot(project_parallel(X, pinv, v));
    const double sym_b = project_parallel(X, pinv, u).dot(v);
    worst_pinv = std::max(worst_pinv, std::abs(sym_a - sym_b) /
                                          std::max(std::abs(sym_a), 1e-300));

    const auto d = decompose_residual(X, pinv, e);
    worst_pinv =
        std::max(worst_pinv, (X.transpose() * d.r_perp).norm() / e.norm());
    worst_pinv = std::max(
        worst_pinv, std::abs(e.squaredNorm() - d.r_par.squaredNorm() -
                             d.r_perp.squaredNorm()) /
                        e.squaredNorm());

    // Ridge identity lives ~sigma_max^2/eps below the data scale; evaluate
    // both sides in extended precision against the dense oracle.
    using MatLd = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    using VecLd = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
    const auto ridge = gram_factorize(X, ProjectorSpec{ProjectorMode::ridge});
    const auto dr = decompose_residual(X, ridge, e);
    const MatLd Xl = X.cast<long double>();
    const VecLd lhs = Xl.transpose() * dr.r_perp.cast<long double>();
    MatLd A = Xl.transpose() * Xl;
    A.diagonal().array() += 1e-3L;
    const VecLd rhs =
        1e-3L * (A.inverse() * (Xl.transpose() * e.cast<long double>()));
    worst_ridge = std::max(
        worst_ridge, static_cast<double>((lhs - rhs).norm() / rhs.norm()));
  }

  // Dense M x M agreement at M <= 200, both modes.
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd X = domain_feature_matrix(200, rng);
    const Eigen::VectorXd e = random_matrix(200, 1, rng).col(0);
    const Eigen::MatrixXd gram = X.transpose() * X;

    const Eigen::MatrixXd dense_ridge =
        X * (gram + 1e-3 * Eigen::MatrixXd::Identity(7, 7)).inverse() *
        X.transpose();
    const auto ridge = gram_factorize(X, ProjectorSpec{ProjectorMode::ridge});
    worst_dense =
        std::max(worst_dense, (dense_ridge * e - project_parallel(X, ridge, e))
                                  .cwiseAbs()
                                  .maxCoeff());

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU);
    Eigen::MatrixXd dense_pinv = Eigen::MatrixXd::Zero(200, 200);
    for (Eigen::Index j = 0; j < svd.singularValues().size(); ++j) {
      if (svd.singularValues()[j] > 1e-10 * svd.singularValues()[0]) {
        dense_pinv += svd.matrixU().col(j) * svd.matrixU().col(j).transpose();
      }
    }
    const auto pinv = gram_factorize(X, ProjectorSpec{ProjectorMode::pinv});
    worst_dense =
        std::max(worst_dense, (dense_pinv * e - project_parallel(X, pinv, e))
                                  .cwiseAbs()
                                  .maxCoeff());
  }

  const bool pass = worst_pinv < 1e-10 && worst_ridge < 1e-10 && worst_dense < 1e-9;
  return {pass, "pinv " + fmt(worst_pinv) + ", ridge identity " + fmt(worst_ridge) +
                    ", dense gap " + fmt(worst_dense)};
}

// --- 2. Gradient correctness ------------------------------------------------

Outcome criterion_gradients() {
  Rng rng(202);
  const Eigen::MatrixXd X = random_matrix(32, 7, rng) * 0.4;
  const Eigen::VectorXd y = random_matrix(32, 1, rng).col(0) * 0.5;

  ModelConfig mc;
  mc.fourier_features = 4;
  mc.hidden_width = 12;
  mc.hidden_layers = 3;
  SirenModel model = build_model(mc, 7, 7);
  const auto fact = gram_factorize(X, ProjectorSpec{ProjectorMode::ridge});
  const double lambda = 1.0;

  auto loss_of = [&](const SirenModel& m) {
    return loss_and_grad(m, X, y, fact, lambda).first.total;
  };
  auto [loss, grads] = loss_and_grad(model, X, y, fact, lambda);

  const double h = 1e-6;
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    auto check_entry = [&](double& slot, double analytic) {
      const double saved = slot;
      slot = saved - h;
      const double lo = loss_of(model);
      slot = saved + h;
      const double hi = loss_of(model);
      slot = saved;
      const double fd = (hi - lo) / (2 * h);
      worst = std::max(worst, std::abs(fd - analytic) /
                                  std::max({std::abs(fd), std::abs(analytic), 1e-8}));
      ++checked;
    };
    for (Eigen::Index r = 0; r < model.layers[k].W.rows(); ++r) {
      for (Eigen::Index c = 0; c < model.layers[k].W.cols(); ++c) {
        check_entry(model.layers[k].W(r, c), grads[k].W(r, c));
      }
    }
    for (Eigen::Index r = 0; r < model.layers[k].b.size(); ++r) {
      check_entry(model.layers[k].b[r], grads[k].b[r]);
    }
  }
  return {worst <= 1e-4, std::to_string(checked) + " parameters, worst rel err " +
                             fmt(worst)};
}

// --- 3. Exchange-model oracles ----------------------------------------------

Outcome criterion_tofts() {
  TimeGrid grid;
  for (int k = 0; k <= 240; ++k) grid.t.push_back(static_cast<double>(k));

  // Constant input against the closed form.
  AIF constant;
  constant.cp.assign(grid.size(), 1.5);
  Rng rng(303);
  double worst_closed = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    ToftsParams p{rng.uniform(5e-4, 8e-3), rng.uniform(0.2, 0.6),
                  rng.uniform(0.0, 0.2)};
    const double kep = p.ktrans / p.ve;
    const auto c = tofts_forward(p, constant, grid);
    for (std::size_t k = 1; k < grid.size(); ++k) {
      const double closed =
          p.vp * 1.5 + 1.5 * p.ve * (1.0 - std::exp(-kep * grid.t[k]));
      worst_closed = std::max(worst_closed, std::abs(c[k] - closed) / closed);
    }
  }

  // ktrans = 0 limit.
  const AIF pop = population_aif(grid, 10.0, 1.0, 0.05, 0.003);
  double worst_zero = 0.0;
  const auto plasma = tofts_forward(ToftsParams{0.0, 0.5, 0.1}, pop, grid);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    worst_zero = std::max(worst_zero, std::abs(plasma[k] - 0.1 * pop.cp[k]));
  }

  // Noiseless recovery on 100 random draws.
  const TimeGrid fit_grid = [&] {
    TimeGrid g;
    for (int k = 0; k < 121; ++k) g.t.push_back(2.0 * k);
    return g;
  }();
  const AIF fit_aif = population_aif(fit_grid, 10.0, 1.0, 0.05, 0.003);
  double worst_fit = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    ToftsParams truth{rng.uniform(5e-4, 8e-3), rng.uniform(0.15, 0.6),
                      rng.uniform(0.01, 0.15)};
    const double offset = rng.uniform(0.0, 0.2);
    auto y = tofts_forward(truth, fit_aif, fit_grid);
    for (double& v : y) v += offset;
    const ToftsFit fit = fit_tofts(y, fit_aif, fit_grid, ToftsParams{0.002, 0.3, 0.05});
    worst_fit = std::max(
        worst_fit, std::abs(fit.params.ktrans - truth.ktrans) / truth.ktrans);
    worst_fit = std::max(worst_fit, std::abs(fit.params.ve - truth.ve) / truth.ve);
    worst_fit = std::max(worst_fit, std::abs(fit.params.vp - truth.vp) / truth.vp);
  }

  const bool pass = worst_closed < 1e-3 && worst_zero <= 1e-12 && worst_fit < 0.02;
  return {pass, "closed form " + fmt(worst_closed) + ", zero-transfer " +
                    fmt(worst_zero) + ", fit recovery " + fmt(worst_fit)};
}

// --- 4. Envelope learnability -----------------------------------------------

Outcome criterion_learnability() {
  PhantomSpec spec;  // defaults: 44^3, c = 0, noise 0
  spec.seed = 404;
  const PhantomDataset d = generate_phantom(spec);
  MultiChannelVolume all = d.features;
  all.add_channel(d.target);
  const auto assembled = assemble_features(
      all, d.mask, FeatureSelection{"full", canonical_feature_order()}, "SUV");
  std::printf("  criterion 4: %ld masked voxels, default 75-epoch schedule...\n",
              static_cast<long>(assembled.matrix.rows()));
  std::fflush(stdout);

  TrainConfig cfg;  // paper defaults: 75 epochs, batch 4096, lr 1e-5, lambda 1
  cfg.seed = 404;
  const TrainState state =
      train(Dataset{assembled.matrix, assembled.targets}, cfg);
  const ResidualDecomposition decomp = predict_and_decompose(
      state.model, assembled.matrix, assembled.targets, ProjectorSpec{});
  const auto table = regional_mse(decomp, d.mask);
  const double total = table.regions.at("overall").total_mse;
  return {total <= 1e-3,
          std::to_string(assembled.matrix.rows()) + " voxels, overall MSE " +
              fmt(total) + " (threshold 1e-3)"};
}

// --- 5. Orthogonal-signal localization ---------------------------------------

Outcome criterion_localization() {
  bool pass = true;
  std::string detail;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    PhantomSpec spec;
    spec.dims = {36, 36, 36};
    spec.seed = 500 + seed;
    spec.tumour_radius_vox = 4.0;
    spec.prostate_radius_vox = 8.0;
    spec.ortho_amplitude = 0.6;
    const PhantomDataset d = generate_phantom(spec);
    MultiChannelVolume all = d.features;
    all.add_channel(d.target);
    const auto assembled = assemble_features(
        all, d.mask, FeatureSelection{"full", canonical_feature_order()}, "SUV");

    TrainConfig cfg;
    cfg.epochs = 40;
    cfg.seed = seed;
    std::printf("  criterion 5: seed %llu, %ld voxels, 40 epochs...\n",
                static_cast<unsigned long long>(seed),
                static_cast<long>(assembled.matrix.rows()));
    std::fflush(stdout);
    const TrainState state =
        train(Dataset{assembled.matrix, assembled.targets}, cfg);
    const ResidualDecomposition decomp = predict_and_decompose(
        state.model, assembled.matrix, assembled.targets, ProjectorSpec{});
    const auto table = regional_mse(decomp, d.mask);

    const double tumour_perp = table.regions.at("tumour").mse_perp;
    const auto& prostate = table.regions.at("prostate");
    const auto& surrounding = table.regions.at("surrounding");
    const double non_tumour_perp =
        (prostate.mse_perp * static_cast<double>(prostate.n_voxels) +
         surrounding.mse_perp * static_cast<double>(surrounding.n_voxels)) /
        static_cast<double>(prostate.n_voxels + surrounding.n_voxels);
    const double overall_par = table.regions.at("overall").mse_par;
    const double overall_perp = table.regions.at("overall").mse_perp;

    std::vector<double> tumour_sq, non_tumour_sq;
    for (Eigen::Index r = 0; r < decomp.e.size(); ++r) {
      const auto label = d.mask.labels[decomp.index_map[static_cast<std::size_t>(r)]];
      const double sq = decomp.r_perp[r] * decomp.r_perp[r];
      if (label == static_cast<std::uint8_t>(Region::tumour)) {
        tumour_sq.push_back(sq);
      } else {
        non_tumour_sq.push_back(sq);
      }
    }
    const double p = rank_sum_test(tumour_sq, non_tumour_sq);

    const bool ratio_ok = tumour_perp >= 3.0 * non_tumour_perp;
    const bool par_ok = overall_par <= 0.05 * overall_perp;
    const bool p_ok = p < 0.05;
    // The injected component is not a function of the features, so no
    // feature-space model can fit it away: the tumour error is bounded
    // below by the injected energy (slack for partial incidental overlap).
    const double injected = d.truth.ortho_energy.at("tumour");
    const double tumour_total = table.regions.at("tumour").total_mse;
    const bool floor_ok = tumour_total >= 0.5 * injected;
    pass = pass && ratio_ok && par_ok && p_ok && floor_ok;
    detail += "seed " + std::to_string(seed) + ": ratio " +
              fmt(tumour_perp / non_tumour_perp) + ", par/perp " +
              fmt(overall_par / overall_perp) + ", p " + fmt(p) +
              ", tumour MSE " + fmt(tumour_total) + " >= 0.5*" + fmt(injected) +
              "; ";
  }
  return {pass, detail};
}

// --- 6. Ablation directionality ----------------------------------------------

Outcome criterion_ablation() {
  PhantomSpec spec;
  spec.dims = {32, 32, 32};
  spec.seed = 606;
  spec.tumour_radius_vox = 3.0;
  spec.prostate_radius_vox = 7.0;
  spec.noise_sd = 0.05;  // keeps the per-seed MSE floor stable
  const PhantomDataset d = generate_phantom(spec);

  AblationInput input{d.features, d.target, d.mask, "SUV"};
  TrainConfig cfg;
  cfg.epochs = 48;

  std::printf("  criterion 6: 11 configurations x 3 seeds...\n");
  std::fflush(stdout);
  const std::vector<AblationRun> runs =
      ablation_suite(input, cfg, {1, 2, 3}, 2);

  std::size_t distinct = 0;
  std::map<std::string, std::vector<double>> overall;
  for (const auto& run : runs) {
    overall[run.set_name].push_back(run.table.regions.at("overall").total_mse);
  }
  distinct = overall.size();
  auto median3 = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  const double med_full = median3(overall.at("full"));
  const double med_minus_t2 = median3(overall.at("minus_t2"));
  const double med_minus_vp = median3(overall.at("minus_vp"));

  const bool eleven = distinct == 11 && runs.size() == 33;
  const bool used_hurts = med_minus_t2 > med_full;
  const bool decoy_flat = std::abs(med_minus_vp - med_full) < 0.10 * med_full;
  const bool pass = eleven && used_hurts && decoy_flat;
  return {pass, "full " + fmt(med_full) + ", minus_t2 " + fmt(med_minus_t2) +
                    ", minus_vp " + fmt(med_minus_vp) + ", configs " +
                    std::to_string(distinct)};
}

// --- 7. Statistics oracle -----------------------------------------------------

double brute_force_two_sided(std::span<const double> a, std::span<const double> b) {
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t total = pooled.size();
  const std::size_t n = std::min(a.size(), b.size());
  const std::span<const double> small = a.size() <= b.size() ? a : b;
  const std::span<const double> large = a.size() <= b.size() ? b : a;
  std::int64_t obs = 0;
  for (double x : small) {
    for (double y : large) obs += x > y ? 2 : (x == y ? 1 : 0);
  }
  const std::int64_t mu2 =
      static_cast<std::int64_t>(a.size()) * static_cast<std::int64_t>(b.size());
  std::uint64_t extreme = 0, count = 0;
  for (std::uint64_t mask = 0; mask < (1ULL << total); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcountll(mask)) != n) continue;
    std::int64_t u2 = 0;
    for (std::size_t i = 0; i < total; ++i) {
      if (!((mask >> i) & 1)) continue;
      for (std::size_t j = 0; j < total; ++j) {
        if ((mask >> j) & 1) continue;
        u2 += pooled[i] > pooled[j] ? 2 : (pooled[i] == pooled[j] ? 1 : 0);
      }
    }
    if (std::llabs(u2 - mu2) >= std::llabs(obs - mu2)) ++extreme;
    ++count;
  }
  return static_cast<double>(extreme) / static_cast<double>(count);
}

Outcome criterion_statistics() {
  Rng rng(707);
  double worst_exact = 0.0;
  for (std::size_t n = 1; n <= 8; ++n) {
    for (std::size_t m = n; m <= std::min<std::size_t>(n + 4, 11); ++m) {
      std::vector<double> a(n), b(m);
      for (auto& v : a) v = std::round(rng.normal() * 4.0) / 4.0;
      for (auto& v : b) v = std::round((rng.normal() + 0.5) * 4.0) / 4.0;
      worst_exact = std::max(
          worst_exact, std::abs(rank_sum_exact(a, b) - brute_force_two_sided(a, b)));
    }
  }
  double worst_gap = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> a(8), b(8);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal() + rng.uniform(0.0, 1.2);
    worst_gap = std::max(worst_gap, std::abs(rank_sum_exact(a, b) -
                                             rank_sum_normal_approx(a, b)));
  }
  const bool pass = worst_exact <= 1e-14 && worst_gap < 0.02;
  return {pass, "enumeration gap " + fmt(worst_exact) + ", approx-vs-exact " +
                    fmt(worst_gap)};
}

// --- 8. Determinism -----------------------------------------------------------

Outcome criterion_determinism() {
  const fs::path base = fresh_dir("determinism");
  const std::string phantom_tmpl = R"({
    "output_dir": "%OUT%",
    "seed": 5,
    "phantom": {
      "dims": [18, 18, 18], "seed": 5,
      "tumour_radius_vox": 2.5, "prostate_radius_vox": 5.0,
      "ortho_amplitude": 0.4,
      "dce": {"enabled": true, "dims": [5,5,5], "n_times": 30, "dt_s": 8.0, "seed": 9}
    },
    "train": {
      "epochs": 3, "batch_size": 1024, "lr": 1e-4,
      "model": {"fourier_features": 8, "hidden_width": 16, "hidden_layers": 2}
    },
    "seeds": [1, 2],
    "threads": 1
  })";

  auto config_for = [&](const fs::path& out) {
    std::string text = phantom_tmpl;
    const std::string token = "%OUT%";
    text.replace(text.find(token), token.size(), out.generic_string());
    return text;
  };

  std::vector<std::string> mismatches;
  // Re-run each command into the same output directory and demand every
  // output byte matches the first run.
  auto rerun_identical = [&](const std::string& tag, auto&& run,
                             const fs::path& dir,
                             const std::vector<std::string>& files) {
    if (run() != 0) {
      mismatches.push_back(tag + ": first run failed");
      return;
    }
    std::vector<std::string> snapshot;
    for (const auto& name : files) snapshot.push_back(file_bytes(dir / name));
    if (run() != 0) {
      mismatches.push_back(tag + ": re-run failed");
      return;
    }
    for (std::size_t i = 0; i < files.size(); ++i) {
      if (file_bytes(dir / files[i]) != snapshot[i]) {
        mismatches.push_back(tag + "/" + files[i]);
      }
    }
  };

  const fs::path data = base / "data";
  write_text(base / "phantom.json", config_for(data));
  cli::CommonOptions popts;
  popts.config_path = (base / "phantom.json").string();
  rerun_identical(
      "phantom", [&] { return cli::cmd_phantom(popts); }, data,
      {"SUV.raw", "T1.raw", "TTP.raw", "mask_labels.raw", "phantom_truth.json",
       "envelope.raw", "ortho.raw", "manifest.json", "dce/dce_000.raw"});

  const fs::path trained = base / "train";
  write_text(base / "train.json",
             std::string(R"({"output_dir": ")") + trained.generic_string() +
                 R"(", "dataset": {"dir": ")" + data.generic_string() +
                 R"(", "target": "SUV"},
                 "train": {"epochs": 3, "batch_size": 1024, "lr": 1e-4,
                           "model": {"fourier_features": 8, "hidden_width": 16,
                                     "hidden_layers": 2}},
                 "seeds": [1, 2], "threads": 1})");
  cli::CommonOptions topts;
  topts.config_path = (base / "train.json").string();
  rerun_identical(
      "train", [&] { return cli::cmd_train(topts, "", ""); }, trained,
      {"checkpoint.bin", "checkpoint.json", "history.csv", "manifest.json"});

  const fs::path decomposed = base / "decompose";
  cli::CommonOptions dopts = topts;
  dopts.output_dir = decomposed.string();
  rerun_identical(
      "decompose",
      [&] { return cli::cmd_decompose(dopts, (trained / "checkpoint").string()); },
      decomposed,
      {"regional.csv", "r_par_sq.raw", "r_perp_sq.raw", "reconstruction.raw",
       "target.raw", "manifest.json"});

  // Two seeds fanned out across two threads: the fan-out must not affect
  // the emitted table.
  const fs::path ablated = base / "ablate";
  write_text(base / "ablate.json",
             std::string(R"({"output_dir": ")") + ablated.generic_string() +
                 R"(", "dataset": {"dir": ")" + data.generic_string() +
                 R"(", "target": "SUV"},
                 "train": {"epochs": 1, "batch_size": 1024, "lr": 1e-4,
                           "model": {"fourier_features": 4, "hidden_width": 8,
                                     "hidden_layers": 1}},
                 "seeds": [1, 2], "threads": 2})");
  cli::CommonOptions aopts;
  aopts.config_path = (base / "ablate.json").string();
  rerun_identical(
      "ablate", [&] { return cli::cmd_ablate(aopts); }, ablated,
      {"ablation.csv", "manifest.json"});

  // Voxel fits split across two threads write independent slots.
  const fs::path fitted = base / "fit";
  write_text(base / "fit.json",
             std::string(R"({"output_dir": ")") + fitted.generic_string() +
                 R"(", "threads": 2,
                 "dce_input": {"manifest": ")" +
                 (data / "dce" / "dce_manifest.json").generic_string() +
                 R"(", "valid_mask": ")" + (data / "dce" / "valid").generic_string() +
                 R"("}})");
  cli::CommonOptions fopts;
  fopts.config_path = (base / "fit.json").string();
  rerun_identical(
      "tofts-fit", [&] { return cli::cmd_tofts_fit(fopts); }, fitted,
      {"Ktrans.raw", "ve.raw", "vp.raw", "offset.raw", "manifest.json"});

  const fs::path ttp_dir = base / "ttp";
  cli::CommonOptions ttp_opts = fopts;
  ttp_opts.output_dir = ttp_dir.string();
  rerun_identical(
      "ttp", [&] { return cli::cmd_ttp(ttp_opts); }, ttp_dir,
      {"TTP.raw", "manifest.json"});

  std::string detail =
      "phantom/train/decompose/ablate/tofts-fit/ttp re-runs byte-identical";
  if (!mismatches.empty()) {
    detail = "mismatches:";
    for (const auto& name : mismatches) detail += " " + name;
  }
  return {mismatches.empty(), detail};
}

struct Criterion {
  int number;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "projector identities", criterion_projector},
    {2, "gradient correctness", criterion_gradients},
    {3, "exchange-model oracles", criterion_tofts},
    {4, "envelope learnability", criterion_learnability},
    {5, "orthogonal-signal localization", criterion_localization},
    {6, "ablation directionality", criterion_ablation},
    {7, "statistics oracle", criterion_statistics},
    {8, "determinism", criterion_determinism},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  if (argc > 1) {
    only = std::atoi(argv[1]);
    if (only < 1 || only > 8) {
      std::fprintf(stderr, "usage: %s [criterion 1-8]\n", argv[0]);
      return 2;
    }
  }

  bool all_pass = true;
  for (const auto& criterion : kCriteria) {
    if (only != 0 && criterion.number != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criterion.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::printf("[%s] criterion %d: %s (%.1f s) — %s\n",
                outcome.pass ? "PASS" : "FAIL", criterion.number, criterion.name,
                seconds, outcome.detail.c_str());
    std::fflush(stdout);
    all_pass = all_pass && outcome.pass;
  }
  return all_pass ? 0 : 1;
}
