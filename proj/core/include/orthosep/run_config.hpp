#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "orthosep/kinetics.hpp"
#include "orthosep/phantom.hpp"
#include "orthosep/preprocess.hpp"
#include "orthosep/training.hpp"

namespace orthosep {

constexpr const char* kVersion = "0.1.0";

struct DatasetConfig {
  std::string dir;
  std::string target = "SUV";
  std::vector<std::string> channels;  // defaults to the canonical seven
};

struct AifConfig {
  double delay_s = 10.0;
  double amplitude = 1.0;
  double decay1 = 0.05;
  double decay2 = 0.003;
};

/// Input description for the `tofts-fit` and `ttp` commands.
struct DceInputConfig {
  std::string manifest;
  std::string valid_mask;  // optional stem of a u8 validity volume
  double norm_const = 240.0;
  AifConfig aif;
  ToftsParams init{0.002, 0.3, 0.05};
  double init_offset = 0.0;
};

/// Optional synthetic dynamic series emitted by the `phantom` command.
struct PhantomDceConfig {
  bool enabled = false;
  DcePhantomSpec spec;
};

/// Declarative description of one run. Every field has a default; the
/// resolved form (all defaults materialized) is echoed into manifests so a
/// run is reproducible from its manifest alone.
struct RunConfig {
  std::string output_dir = "out";
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds = {1, 2, 3};  // ablation sweeps
  int threads = 1;
  std::optional<DatasetConfig> dataset;
  std::optional<PhantomSpec> phantom;
  PhantomDceConfig phantom_dce;
  std::map<std::string, NormalizationRule> normalization;  // by channel name
  FeatureSelection features;
  TrainConfig train;
  ProjectorSpec eval_projector;  // decompose-time projector ("projector" key)
  std::optional<DceInputConfig> dce_input;
};

/// Parses and validates a config JSON document. Unknown keys are rejected
/// with the offending JSON path; defaults are filled in. A manifest document
/// (with a "config" key) is unwrapped transparently.
RunConfig parse_run_config(const std::string& json_text);

/// Fully resolved echo, indent-2 JSON with sorted keys.
std::string run_config_to_json_string(const RunConfig& cfg);

/// JSON object for the training section only (embedded in checkpoints).
std::string train_config_to_json_string(const TrainConfig& cfg);

/// Applies dotted-path assignments ("train.lr=1e-4") to a config document.
/// Values parse as JSON when possible, else as strings.
std::string apply_overrides(const std::string& json_text,
                            const std::vector<std::string>& assignments);

/// Writes <dir>/manifest.json with the command name, the resolved config and
/// any extra string fields. Deterministic byte-for-byte for equal inputs.
void write_run_manifest(const std::string& path, const std::string& command,
                        const RunConfig& cfg,
                        const std::map<std::string, std::string>& extra);

}  // namespace orthosep
