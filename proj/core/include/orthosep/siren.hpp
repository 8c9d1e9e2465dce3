#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "orthosep/encoding.hpp"

namespace orthosep {

struct DenseLayer {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;  // out
};

/// Sinusoidal MLP over Fourier-encoded features. All layers except the last
/// apply h -> sin(omega0 * (W h + b)); the output layer is linear.
struct SirenModel {
  FourierEncoding encoding;
  std::vector<DenseLayer> layers;
  double omega0 = 30.0;

  Eigen::Index input_dim() const { return encoding.input_dim(); }
  std::vector<int> widths() const;
  std::size_t parameter_count() const;
};

/// Layer stack for the given widths (first entry is the encoded input
/// dimension, last is the output dimension). First layer weights are
/// Uniform(-1/fan_in, 1/fan_in); later layers Uniform(+-sqrt(6/fan_in)/omega0);
/// biases zero. Deterministic per seed.
std::vector<DenseLayer> siren_init(const std::vector<int>& widths, double omega0,
                                   std::uint64_t seed);

struct ModelConfig {
  int fourier_features = 128;
  double fourier_bandwidth = 1.0;
  int hidden_width = 512;
  int hidden_layers = 3;  // sine layers after the sinusoidal input layer
  double omega0 = 30.0;
};

/// Encoding + initialized layers for an N-dimensional feature input.
SirenModel build_model(const ModelConfig& cfg, int input_dim, std::uint64_t seed);

/// Deterministic forward pass over encoded rows; one output per row.
/// Throws NumericError (naming the layer) on non-finite activations.
Eigen::VectorXd forward(const SirenModel& model, const Eigen::MatrixXd& encoded);

/// Forward pass retaining per-layer activations for backpropagation.
/// h[0] is the encoded input, h[k+1] = sin(omega0 * preact[k]) for sine
/// layers; the final entry of h is the linear output column.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> h;
  std::vector<Eigen::MatrixXd> preact;
};

Eigen::VectorXd forward_cached(const SirenModel& model,
                               const Eigen::MatrixXd& encoded, ForwardCache& cache);

/// Encodes raw feature rows and runs the network.
Eigen::VectorXd predict(const SirenModel& model, const Eigen::MatrixXd& features);

}  // namespace orthosep
