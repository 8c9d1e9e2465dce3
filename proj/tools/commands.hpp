#pragma once

#include <string>
#include <vector>

namespace orthosep::cli {

struct CommonOptions {
  std::string config_path;               // -c
  std::string output_dir;                // -o override
  bool has_seed = false;                 // --seed override
  std::uint64_t seed = 0;
  std::vector<std::string> overrides;    // --set key=value
};

// Exit codes: 0 success, 1 numerical/self-test failure, 2 configuration
// error, 3 I/O error.
int cmd_phantom(const CommonOptions& opts);
int cmd_train(const CommonOptions& opts, const std::string& ablate_name,
              const std::string& resume_checkpoint);
int cmd_decompose(const CommonOptions& opts, const std::string& checkpoint);
int cmd_ablate(const CommonOptions& opts);
int cmd_tofts_fit(const CommonOptions& opts);
int cmd_ttp(const CommonOptions& opts);
int cmd_check();

}  // namespace orthosep::cli
