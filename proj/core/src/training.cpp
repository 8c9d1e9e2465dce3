#include "orthosep/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "orthosep/errors.hpp"
#include "orthosep/rng.hpp"

namespace orthosep {

void TrainConfig::validate(int feature_count) const {
  if (!(lambda >= 0.0)) throw ConfigError("TrainConfig: lambda must be >= 0");
  if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
  if (batch_size < feature_count) {
    throw ConfigError("TrainConfig: batch_size must be >= feature count");
  }
  if (!(lr > 0.0)) throw ConfigError("TrainConfig: lr must be > 0");
  projector.validate();
}

namespace {

struct BackpropResult {
  LossBreakdown loss;
  std::vector<DenseLayer> grads;
};

BackpropResult backprop(const SirenModel& model, const Eigen::MatrixXd& encoded,
                        const Eigen::VectorXd& grad_yhat_scaled,
                        const ForwardCache& cache) {
  const std::size_t L = model.layers.size();
  std::vector<DenseLayer> grads(L);

  // d(loss)/d(output column), as an M x 1 matrix.
  Eigen::MatrixXd delta = grad_yhat_scaled;
  for (std::size_t k = L; k-- > 0;) {
    if (k + 1 < L) {
      // Sine layer: h = sin(omega0 * a).
      delta = (delta.array() *
               (model.omega0 * cache.preact[k].array()).cos() * model.omega0)
                  .matrix();
    }
    grads[k].W = delta.transpose() * cache.h[k];
    grads[k].b = delta.colwise().sum().transpose();
    if (k > 0) delta = (delta * model.layers[k].W).eval();
  }
  return {LossBreakdown{}, std::move(grads)};
}

}  // namespace

std::pair<LossBreakdown, std::vector<DenseLayer>> loss_and_grad_encoded(
    const SirenModel& model, const Eigen::MatrixXd& encoded,
    const Eigen::MatrixXd& features, const Eigen::VectorXd& y,
    const GramFactorization& fact, double lambda) {
  if (encoded.rows() != y.size() || features.rows() != y.size()) {
    throw ConfigError("loss_and_grad: batch size mismatch");
  }
  if (lambda < 0.0) throw ConfigError("loss_and_grad: lambda must be >= 0");

  ForwardCache cache;
  const Eigen::VectorXd yhat = forward_cached(model, encoded, cache);
  const Eigen::VectorXd e = yhat - y;
  const double m = static_cast<double>(e.size());

  LossBreakdown loss;
  loss.mse_e = e.squaredNorm() / m;

  Eigen::VectorXd grad_yhat;
  if (lambda > 0.0) {
    const Eigen::VectorXd r_par = project_parallel(features, fact, e);
    loss.mse_par = r_par.squaredNorm() / m;
    // d/de of |P e|^2 is 2 P'P e = 2 P(P e); P is symmetric.
    const Eigen::VectorXd p2e = project_parallel(features, fact, r_par);
    grad_yhat = (2.0 / m) * (e + lambda * p2e);
  } else {
    const Eigen::VectorXd r_par = project_parallel(features, fact, e);
    loss.mse_par = r_par.squaredNorm() / m;
    grad_yhat = (2.0 / m) * e;
  }
  loss.total = loss.mse_e + lambda * loss.mse_par;

  BackpropResult bp = backprop(model, encoded, grad_yhat, cache);
  return {loss, std::move(bp.grads)};
}

std::pair<LossBreakdown, std::vector<DenseLayer>> loss_and_grad(
    const SirenModel& model, const Eigen::MatrixXd& features,
    const Eigen::VectorXd& y, const GramFactorization& fact, double lambda) {
  return loss_and_grad_encoded(model, model.encoding.encode(features), features, y,
                               fact, lambda);
}

namespace {

std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t m,
                                                              std::size_t batch,
                                                              std::size_t min_rows) {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  std::size_t start = 0;
  while (start < m) {
    const std::size_t end = std::min(start + batch, m);
    ranges.emplace_back(start, end);
    start = end;
  }
  if (ranges.size() > 1) {
    auto& last = ranges.back();
    if (last.second - last.first < min_rows) {
      ranges[ranges.size() - 2].second = last.second;
      ranges.pop_back();
    }
  }
  return ranges;
}

}  // namespace

TrainState train(const Dataset& dataset, const TrainConfig& config,
                 std::optional<TrainState> resume_from) {
  dataset.X.validate();
  const Eigen::Index m = dataset.X.rows();
  const Eigen::Index n = dataset.X.cols();
  if (dataset.y.size() != m) throw ConfigError("train: target length mismatch");
  config.validate(static_cast<int>(n));
  if (m < n) throw NumericError("train: fewer voxels than features");

  TrainState state;
  if (resume_from.has_value()) {
    state = std::move(*resume_from);
    if (state.model.input_dim() != n) {
      throw ConfigError("train: checkpoint feature dimension mismatch");
    }
  } else {
    state.model = build_model(config.model, static_cast<int>(n), config.seed);
    state.optimizer = make_optimizer_state(state.model.layers);
    state.scheduler_lr = config.lr;
    state.scheduler_best = std::numeric_limits<double>::infinity();
    state.scheduler_stall = 0;
    state.epochs_done = 0;
  }

  PlateauScheduler scheduler(config.scheduler, state.scheduler_lr);
  scheduler.restore(state.scheduler_lr, state.scheduler_best, state.scheduler_stall);

  // Encode the whole dataset once; batches gather rows from it.
  const Eigen::MatrixXd encoded_all = state.model.encoding.encode(dataset.X.values);

  std::optional<GramFactorization> global_fact;
  if (config.scope == ProjectionScope::global) {
    global_fact = gram_factorize(dataset.X.values, config.projector);
  }

  std::vector<std::size_t> order(static_cast<std::size_t>(m));
  const auto ranges =
      batch_ranges(static_cast<std::size_t>(m),
                   static_cast<std::size_t>(config.batch_size),
                   static_cast<std::size_t>(n));

  Eigen::MatrixXd batch_enc;
  Eigen::MatrixXd batch_feat;
  Eigen::VectorXd batch_y;

  for (int epoch = state.epochs_done + 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Batch composition is a pure function of (seed, epoch).
    Rng shuffle_rng(derive_seed(derive_seed(config.seed, 3), epoch));
    shuffle_rng.shuffle(order);

    const double lr = scheduler.lr();
    double sum_e2 = 0.0, sum_par2 = 0.0;
    for (const auto& [lo, hi] : ranges) {
      const Eigen::Index rows = static_cast<Eigen::Index>(hi - lo);
      batch_enc.resize(rows, encoded_all.cols());
      batch_feat.resize(rows, n);
      batch_y.resize(rows);
      for (Eigen::Index r = 0; r < rows; ++r) {
        const Eigen::Index src = static_cast<Eigen::Index>(order[lo + r]);
        batch_enc.row(r) = encoded_all.row(src);
        batch_feat.row(r) = dataset.X.values.row(src);
        batch_y[r] = dataset.y[src];
      }
      const GramFactorization& fact =
          config.scope == ProjectionScope::global
              ? *global_fact
              : gram_factorize(batch_feat, config.projector);
      auto [loss, grads] = loss_and_grad_encoded(state.model, batch_enc, batch_feat,
                                                 batch_y, fact, config.lambda);
      adam_amsgrad_step(state.optimizer, state.model.layers, grads, lr);
      const double rows_d = static_cast<double>(rows);
      sum_e2 += loss.mse_e * rows_d;
      sum_par2 += loss.mse_par * rows_d;
    }

    // Voxel-weighted epoch means.
    LossBreakdown epoch_loss;
    epoch_loss.mse_e = sum_e2 / static_cast<double>(m);
    epoch_loss.mse_par = sum_par2 / static_cast<double>(m);
    epoch_loss.total = epoch_loss.mse_e + config.lambda * epoch_loss.mse_par;
    state.history.push_back(EpochRecord{epoch, epoch_loss, lr});
    scheduler.step(epoch_loss.total);
    state.epochs_done = epoch;
  }

  state.scheduler_lr = scheduler.lr();
  state.scheduler_best = scheduler.best();
  state.scheduler_stall = scheduler.stall_count();
  return state;
}

ResidualDecomposition predict_and_decompose(const SirenModel& model,
                                            const FeatureMatrix& X,
                                            const Eigen::VectorXd& y,
                                            const ProjectorSpec& spec) {
  X.validate();
  if (y.size() != X.rows()) {
    throw ConfigError("predict_and_decompose: target length mismatch");
  }
  // Chunked forward keeps the encoded block bounded.
  const Eigen::Index chunk = 8192;
  Eigen::VectorXd yhat(X.rows());
  for (Eigen::Index lo = 0; lo < X.rows(); lo += chunk) {
    const Eigen::Index rows = std::min(chunk, X.rows() - lo);
    yhat.segment(lo, rows) =
        predict(model, X.values.middleRows(lo, rows));
  }
  const GramFactorization fact = gram_factorize(X.values, spec);
  ResidualDecomposition decomp = decompose_residual(X.values, fact, yhat - y);
  decomp.index_map = X.index_map;
  return decomp;
}

}  // namespace orthosep
