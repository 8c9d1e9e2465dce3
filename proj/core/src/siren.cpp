#include "orthosep/siren.hpp"

#include <cmath>
#include <string>

#include "orthosep/errors.hpp"
#include "orthosep/rng.hpp"

namespace orthosep {

std::vector<int> SirenModel::widths() const {
  std::vector<int> w;
  if (layers.empty()) return w;
  w.push_back(static_cast<int>(layers.front().W.cols()));
  for (const auto& layer : layers) w.push_back(static_cast<int>(layer.W.rows()));
  return w;
}

std::size_t SirenModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) {
    n += static_cast<std::size_t>(layer.W.size()) + layer.b.size();
  }
  return n;
}

std::vector<DenseLayer> siren_init(const std::vector<int>& widths, double omega0,
                                   std::uint64_t seed) {
  if (widths.size() < 2) throw ConfigError("siren_init: need at least two widths");
  for (int w : widths) {
    if (w < 1) throw ConfigError("siren_init: widths must be >= 1");
  }
  if (!(omega0 > 0.0)) throw ConfigError("siren_init: omega0 must be > 0");

  Rng rng(seed);
  std::vector<DenseLayer> layers(widths.size() - 1);
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const int fan_in = widths[k];
    const int fan_out = widths[k + 1];
    const double bound = k == 0 ? 1.0 / fan_in : std::sqrt(6.0 / fan_in) / omega0;
    layers[k].W.resize(fan_out, fan_in);
    for (Eigen::Index r = 0; r < fan_out; ++r) {
      for (Eigen::Index c = 0; c < fan_in; ++c) {
        layers[k].W(r, c) = rng.uniform(-bound, bound);
      }
    }
    layers[k].b = Eigen::VectorXd::Zero(fan_out);
  }
  return layers;
}

SirenModel build_model(const ModelConfig& cfg, int input_dim, std::uint64_t seed) {
  if (cfg.hidden_layers < 0) throw ConfigError("ModelConfig: hidden_layers < 0");
  if (cfg.hidden_width < 1) throw ConfigError("ModelConfig: hidden_width < 1");
  SirenModel model;
  model.omega0 = cfg.omega0;
  model.encoding = FourierEncoding::create(cfg.fourier_features, input_dim,
                                           cfg.fourier_bandwidth,
                                           derive_seed(seed, 1));
  std::vector<int> widths;
  widths.push_back(static_cast<int>(model.encoding.output_dim()));
  // Sinusoidal input layer plus hidden sine layers, then the linear output.
  widths.push_back(cfg.hidden_width);
  for (int k = 0; k < cfg.hidden_layers; ++k) widths.push_back(cfg.hidden_width);
  widths.push_back(1);
  model.layers = siren_init(widths, cfg.omega0, derive_seed(seed, 2));
  return model;
}

namespace {

void check_finite(const Eigen::MatrixXd& m, std::size_t layer_index) {
  if (!m.allFinite()) {
    throw NumericError("forward: non-finite activations at layer " +
                       std::to_string(layer_index));
  }
}

}  // namespace

Eigen::VectorXd forward_cached(const SirenModel& model,
                               const Eigen::MatrixXd& encoded, ForwardCache& cache) {
  if (model.layers.empty()) throw ConfigError("forward: empty model");
  if (encoded.cols() != model.layers.front().W.cols()) {
    throw ConfigError("forward: encoded width does not match the input layer");
  }
  cache.h.clear();
  cache.preact.clear();
  cache.h.reserve(model.layers.size() + 1);
  cache.preact.reserve(model.layers.size());
  cache.h.push_back(encoded);
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    const auto& layer = model.layers[k];
    Eigen::MatrixXd a = cache.h.back() * layer.W.transpose();
    a.rowwise() += layer.b.transpose();
    check_finite(a, k);
    if (k + 1 < model.layers.size()) {
      cache.preact.push_back(a);
      cache.h.push_back((model.omega0 * a.array()).sin().matrix());
    } else {
      cache.h.push_back(std::move(a));
    }
  }
  return cache.h.back().col(0);
}

Eigen::VectorXd forward(const SirenModel& model, const Eigen::MatrixXd& encoded) {
  ForwardCache cache;
  return forward_cached(model, encoded, cache);
}

Eigen::VectorXd predict(const SirenModel& model, const Eigen::MatrixXd& features) {
  return forward(model, model.encoding.encode(features));
}

}  // namespace orthosep
