#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "orthosep/preprocess.hpp"
#include "orthosep/projection.hpp"
#include "orthosep/training.hpp"
#include "orthosep/volume.hpp"

namespace orthosep {

struct RegionStats {
  std::size_t n_voxels = 0;
  double total_mse = 0.0, total_sd = 0.0;  // mean and SD of e_i^2
  double mse_par = 0.0, par_sd = 0.0;
  double mse_perp = 0.0, perp_sd = 0.0;
};

/// Region means of the squared residual components. Regions with no voxels
/// are absent. "overall" pools every decomposed voxel.
struct RegionalErrorTable {
  std::map<std::string, RegionStats> regions;
};

RegionalErrorTable regional_mse(const ResidualDecomposition& decomp,
                                const RegionMask& mask);

/// The eleven ablation configurations: full model, seven leave-one-out sets
/// and the structural / exchange / dynamic group removals, in table order.
const std::vector<FeatureSelection>& ablation_configurations();

struct AblationRun {
  std::string set_name;
  std::uint64_t seed = 0;
  RegionalErrorTable table;
  std::vector<double> e2;                  // per-row squared residuals
  std::vector<std::size_t> index_map;
};

struct AblationInput {
  MultiChannelVolume features;  // all seven channels
  ChannelVolume target;
  RegionMask mask;
  std::string target_name = "SUV";
};

/// Trains one model per configuration per seed (fresh init, same voxels) and
/// evaluates with a global-scope decomposition. `parallel` > 1 fans runs out
/// across threads; each run is single-threaded and seeded, so results do not
/// depend on the fan-out.
std::vector<AblationRun> ablation_suite(const AblationInput& input,
                                        const TrainConfig& base_config,
                                        const std::vector<std::uint64_t>& seeds,
                                        int parallel = 1);

/// CSV writers. Columns are fixed:
///   config,region,n_voxels,total_mse,total_sd,mse_par,par_sd,mse_perp,perp_sd,p_vs_full
/// Values are %.17g so re-reading loses nothing.
void write_regional_csv(const std::string& path, const std::string& config_name,
                        const RegionalErrorTable& table);

/// Aggregate rows (across-seed mean, across-seed SD of the per-seed means)
/// per configuration and region, then per-seed sub-rows named
/// "<config>@seed<k>". p_vs_full is a rank-sum test of the pooled squared
/// residuals against the full model over the same region.
void write_ablation_csv(const std::string& path,
                        const std::vector<AblationRun>& runs,
                        const RegionMask& mask);

}  // namespace orthosep
