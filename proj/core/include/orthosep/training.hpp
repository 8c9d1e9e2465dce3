#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "orthosep/optimizer.hpp"
#include "orthosep/projection.hpp"
#include "orthosep/scheduler.hpp"
#include "orthosep/siren.hpp"
#include "orthosep/volume.hpp"

namespace orthosep {

enum class ProjectionScope { batch, global };

struct TrainConfig {
  double lambda = 1.0;
  int epochs = 75;
  int batch_size = 4096;
  double lr = 1e-5;
  PlateauConfig scheduler;
  std::uint64_t seed = 0;
  ProjectorSpec projector;
  ProjectionScope scope = ProjectionScope::batch;
  ModelConfig model;

  void validate(int feature_count) const;
};

struct LossBreakdown {
  double mse_e = 0.0;
  double mse_par = 0.0;
  double total = 0.0;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  LossBreakdown loss;
  double lr = 0.0;  // rate used during this epoch
};

/// Loss over one batch:
///   e = yhat - y,  r_par = P e,
///   L = |e|^2/M + lambda |r_par|^2/M,
/// with gradients backpropagated analytically through every layer. P is a
/// constant within the step (it depends only on X), so nothing differentiates
/// through the factorization; the encoding matrix B is fixed and receives no
/// gradient.
std::pair<LossBreakdown, std::vector<DenseLayer>> loss_and_grad(
    const SirenModel& model, const Eigen::MatrixXd& features,
    const Eigen::VectorXd& y, const GramFactorization& fact, double lambda);

/// Variant for a pre-encoded batch (the training loop encodes once).
std::pair<LossBreakdown, std::vector<DenseLayer>> loss_and_grad_encoded(
    const SirenModel& model, const Eigen::MatrixXd& encoded,
    const Eigen::MatrixXd& features, const Eigen::VectorXd& y,
    const GramFactorization& fact, double lambda);

struct Dataset {
  FeatureMatrix X;
  Eigen::VectorXd y;
};

/// Everything needed to continue training deterministically.
struct TrainState {
  SirenModel model;
  OptimizerState optimizer;
  double scheduler_lr = 0.0;
  double scheduler_best = 0.0;
  int scheduler_stall = 0;
  int epochs_done = 0;
  std::vector<EpochRecord> history;
};

/// Runs (or resumes) the training loop: seeded epoch shuffles, batch- or
/// global-scope projector, Adam/AMSGrad updates, plateau scheduling on the
/// epoch mean loss. Single-threaded and bitwise deterministic per seed.
/// A final short batch keeps running if it has at least N rows, otherwise it
/// is merged into the previous batch.
TrainState train(const Dataset& dataset, const TrainConfig& config,
                 std::optional<TrainState> resume_from = std::nullopt);

/// Forward over all rows and global-scope residual decomposition.
ResidualDecomposition predict_and_decompose(const SirenModel& model,
                                            const FeatureMatrix& X,
                                            const Eigen::VectorXd& y,
                                            const ProjectorSpec& spec);

}  // namespace orthosep
