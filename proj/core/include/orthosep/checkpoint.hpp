#pragma once

#include <string>
#include <vector>

#include "orthosep/training.hpp"

namespace orthosep {

// Checkpoints are a <stem>.json manifest (widths, omega0, encoding seed and
// bandwidth, optimizer/scheduler state, history, config echo) plus a
// <stem>.bin blob of little-endian 64-bit reals laid out as:
//   B (row-major), then per layer W (row-major) and b,
//   then the optimizer moments m, v, vhat_max in the same layer order.

/// config_echo must be a JSON object serialized to a string; it is embedded
/// verbatim under "train_config".
void save_checkpoint(const TrainState& state,
                     const std::vector<std::string>& feature_names,
                     const std::string& config_echo_json, const std::string& path);

struct LoadedCheckpoint {
  TrainState state;
  std::vector<std::string> feature_names;
  std::string config_echo_json;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace orthosep
