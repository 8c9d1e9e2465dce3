#pragma once

#include <Eigen/Core>
#include <vector>

#include "orthosep/siren.hpp"

namespace orthosep {

/// Adam with the AMSGrad running maximum of the bias-corrected second moment.
struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TensorMoments {
  Eigen::MatrixXd m;
  Eigen::MatrixXd v;
  Eigen::MatrixXd vhat_max;
};

struct OptimizerState {
  AdamConfig config;
  std::vector<TensorMoments> weights;  // one per layer
  std::vector<TensorMoments> biases;
  long step_count = 0;
};

OptimizerState make_optimizer_state(const std::vector<DenseLayer>& layers,
                                    const AdamConfig& config = {});

/// One update:
///   m = b1 m + (1-b1) g;  v = b2 v + (1-b2) g^2
///   mhat = m/(1-b1^t);    vhat = v/(1-b2^t);   vhat_max = max(vhat_max, vhat)
///   p -= lr * mhat / (sqrt(vhat_max) + eps)
/// Throws NumericError on non-finite gradients.
void adam_amsgrad_step(OptimizerState& state, std::vector<DenseLayer>& layers,
                       const std::vector<DenseLayer>& grads, double lr);

}  // namespace orthosep
