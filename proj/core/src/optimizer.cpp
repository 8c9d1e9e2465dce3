#include "orthosep/optimizer.hpp"

#include <cmath>

#include "orthosep/errors.hpp"

namespace orthosep {

OptimizerState make_optimizer_state(const std::vector<DenseLayer>& layers,
                                    const AdamConfig& config) {
  OptimizerState state;
  state.config = config;
  for (const auto& layer : layers) {
    TensorMoments w{Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols()),
                    Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols()),
                    Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols())};
    TensorMoments b{Eigen::MatrixXd::Zero(layer.b.size(), 1),
                    Eigen::MatrixXd::Zero(layer.b.size(), 1),
                    Eigen::MatrixXd::Zero(layer.b.size(), 1)};
    state.weights.push_back(std::move(w));
    state.biases.push_back(std::move(b));
  }
  return state;
}

namespace {

void update_tensor(TensorMoments& mom, Eigen::Ref<Eigen::MatrixXd> param,
                   const Eigen::Ref<const Eigen::MatrixXd>& grad,
                   const AdamConfig& cfg, double lr, double bc1, double bc2) {
  if (!grad.allFinite()) throw NumericError("adam_amsgrad_step: non-finite gradient");
  mom.m = cfg.beta1 * mom.m + (1.0 - cfg.beta1) * grad;
  mom.v = cfg.beta2 * mom.v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
  const Eigen::MatrixXd mhat = mom.m / bc1;
  const Eigen::MatrixXd vhat = mom.v / bc2;
  mom.vhat_max = mom.vhat_max.cwiseMax(vhat);
  param.array() -= lr * mhat.array() / (mom.vhat_max.array().sqrt() + cfg.eps);
}

}  // namespace

void adam_amsgrad_step(OptimizerState& state, std::vector<DenseLayer>& layers,
                       const std::vector<DenseLayer>& grads, double lr) {
  if (layers.size() != grads.size() || layers.size() != state.weights.size()) {
    throw ConfigError("adam_amsgrad_step: shape mismatch");
  }
  state.step_count += 1;
  const auto& cfg = state.config;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step_count));
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (layers[k].W.rows() != grads[k].W.rows() ||
        layers[k].W.cols() != grads[k].W.cols() ||
        layers[k].b.size() != grads[k].b.size()) {
      throw ConfigError("adam_amsgrad_step: gradient shape mismatch");
    }
    update_tensor(state.weights[k], layers[k].W, grads[k].W, cfg, lr, bc1, bc2);
    Eigen::Map<Eigen::MatrixXd> bias(layers[k].b.data(), layers[k].b.size(), 1);
    update_tensor(state.biases[k], bias, grads[k].b, cfg, lr, bc1, bc2);
  }
}

}  // namespace orthosep
