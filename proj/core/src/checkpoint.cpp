#include "orthosep/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>

#include "orthosep/errors.hpp"

using nlohmann::json;

namespace orthosep {
namespace {

std::string stem_of(const std::string& path) {
  std::string s = path;
  if (s.size() > 5 && s.substr(s.size() - 5) == ".json") s.resize(s.size() - 5);
  return s;
}

void append_f64_le(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

double read_f64_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void append_matrix(std::string& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) append_f64_le(out, m(r, c));
  }
}

class BlobReader {
 public:
  explicit BlobReader(std::string bytes) : bytes_(std::move(bytes)) {}

  void read_matrix(Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (pos_ + 8 > bytes_.size()) throw IoError("checkpoint blob truncated");
        m(r, c) = read_f64_le(
            reinterpret_cast<const unsigned char*>(bytes_.data()) + pos_);
        pos_ += 8;
      }
    }
  }

  void read_vector(Eigen::VectorXd& v) {
    Eigen::MatrixXd m(v.size(), 1);
    read_matrix(m);
    v = m.col(0);
  }

  bool exhausted() const { return pos_ == bytes_.size(); }

 private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("missing file: " + path);
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

json loss_to_json(const EpochRecord& r) {
  return json{{"epoch", r.epoch},
              {"mse_e", r.loss.mse_e},
              {"mse_par", r.loss.mse_par},
              {"total", r.loss.total},
              {"lr", r.lr}};
}

}  // namespace

void save_checkpoint(const TrainState& state,
                     const std::vector<std::string>& feature_names,
                     const std::string& config_echo_json, const std::string& path) {
  const std::string stem = stem_of(path);
  const SirenModel& model = state.model;

  json manifest;
  manifest["format"] = "orthosep-checkpoint-v1";
  manifest["widths"] = model.widths();
  manifest["omega0"] = model.omega0;
  manifest["fourier"] = {{"features", model.encoding.feature_count()},
                         {"bandwidth", model.encoding.bandwidth},
                         {"seed", model.encoding.seed},
                         {"input_dim", model.encoding.input_dim()}};
  manifest["feature_names"] = feature_names;
  manifest["epochs_done"] = state.epochs_done;
  manifest["scheduler"] = {
      {"lr", state.scheduler_lr},
      {"best", std::isfinite(state.scheduler_best) ? json(state.scheduler_best)
                                                   : json(nullptr)},
      {"stall", state.scheduler_stall}};
  manifest["optimizer"] = {{"step_count", state.optimizer.step_count},
                           {"beta1", state.optimizer.config.beta1},
                           {"beta2", state.optimizer.config.beta2},
                           {"eps", state.optimizer.config.eps}};
  json hist = json::array();
  for (const auto& r : state.history) hist.push_back(loss_to_json(r));
  manifest["history"] = hist;
  try {
    manifest["train_config"] = json::parse(config_echo_json);
  } catch (const json::exception&) {
    throw ConfigError("save_checkpoint: config echo is not valid JSON");
  }
  manifest["blob"] = {{"file", stem.substr(stem.find_last_of('/') + 1) + ".bin"},
                      {"layout", "B, per-layer W and b, then m, v, vhat_max"}};

  std::string blob;
  append_matrix(blob, model.encoding.B);
  for (const auto& layer : model.layers) {
    append_matrix(blob, layer.W);
    append_matrix(blob, layer.b);
  }
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    append_matrix(blob, state.optimizer.weights[k].m);
    append_matrix(blob, state.optimizer.weights[k].v);
    append_matrix(blob, state.optimizer.weights[k].vhat_max);
    append_matrix(blob, state.optimizer.biases[k].m);
    append_matrix(blob, state.optimizer.biases[k].v);
    append_matrix(blob, state.optimizer.biases[k].vhat_max);
  }

  write_file(stem + ".json", manifest.dump(2) + "\n");
  write_file(stem + ".bin", blob);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  const std::string stem = stem_of(path);
  json manifest;
  try {
    manifest = json::parse(read_file(stem + ".json"));
  } catch (const json::exception& e) {
    throw IoError("bad checkpoint manifest: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != "orthosep-checkpoint-v1") {
    throw IoError("checkpoint: unknown format");
  }

  LoadedCheckpoint out;
  TrainState& state = out.state;
  try {
    const auto widths = manifest.at("widths").get<std::vector<int>>();
    state.model.omega0 = manifest.at("omega0").get<double>();
    const auto& f = manifest.at("fourier");
    state.model.encoding.bandwidth = f.at("bandwidth").get<double>();
    state.model.encoding.seed = f.at("seed").get<std::uint64_t>();
    state.model.encoding.B.resize(f.at("features").get<int>(),
                                  f.at("input_dim").get<int>());
    state.model.layers.resize(widths.size() - 1);
    for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
      state.model.layers[k].W.resize(widths[k + 1], widths[k]);
      state.model.layers[k].b.resize(widths[k + 1]);
    }
    out.feature_names = manifest.at("feature_names").get<std::vector<std::string>>();
    state.epochs_done = manifest.at("epochs_done").get<int>();
    const auto& sched = manifest.at("scheduler");
    state.scheduler_lr = sched.at("lr").get<double>();
    state.scheduler_best = sched.at("best").is_null()
                               ? std::numeric_limits<double>::infinity()
                               : sched.at("best").get<double>();
    state.scheduler_stall = sched.at("stall").get<int>();
    for (const auto& row : manifest.at("history")) {
      EpochRecord r;
      r.epoch = row.at("epoch").get<int>();
      r.loss.mse_e = row.at("mse_e").get<double>();
      r.loss.mse_par = row.at("mse_par").get<double>();
      r.loss.total = row.at("total").get<double>();
      r.lr = row.at("lr").get<double>();
      state.history.push_back(r);
    }
    out.config_echo_json = manifest.at("train_config").dump();
  } catch (const json::exception& e) {
    throw IoError("bad checkpoint manifest: " + std::string(e.what()));
  }

  state.optimizer = make_optimizer_state(state.model.layers);
  const auto& opt = manifest.at("optimizer");
  state.optimizer.step_count = opt.at("step_count").get<long>();
  state.optimizer.config.beta1 = opt.at("beta1").get<double>();
  state.optimizer.config.beta2 = opt.at("beta2").get<double>();
  state.optimizer.config.eps = opt.at("eps").get<double>();

  BlobReader blob(read_file(stem + ".bin"));
  blob.read_matrix(state.model.encoding.B);
  for (auto& layer : state.model.layers) {
    blob.read_matrix(layer.W);
    blob.read_vector(layer.b);
  }
  for (std::size_t k = 0; k < state.model.layers.size(); ++k) {
    blob.read_matrix(state.optimizer.weights[k].m);
    blob.read_matrix(state.optimizer.weights[k].v);
    blob.read_matrix(state.optimizer.weights[k].vhat_max);
    blob.read_matrix(state.optimizer.biases[k].m);
    blob.read_matrix(state.optimizer.biases[k].v);
    blob.read_matrix(state.optimizer.biases[k].vhat_max);
  }
  if (!blob.exhausted()) throw IoError("checkpoint blob has trailing bytes");
  return out;
}

}  // namespace orthosep
