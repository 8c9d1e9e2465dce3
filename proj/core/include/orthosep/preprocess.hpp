#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "orthosep/volume.hpp"

namespace orthosep {

enum class NormKind {
  none,
  minmax01,       // (x - min) / (max - min) over the valid mask
  divide_by,      // x / constant
  zscore_scaled,  // constant * (x - mean) / std over the valid mask
};

struct NormalizationRule {
  NormKind kind = NormKind::none;
  double constant = 1.0;  // divisor for divide_by, scale for zscore_scaled
};

/// Named subset of the canonical feature channels.
struct FeatureSelection {
  std::string name = "full";
  std::vector<std::string> included;  // subset of canonical_feature_order()

  void validate() const;
};

/// (T1, T2, ADC, Ktrans, ve, vp, TTP)
const std::vector<std::string>& canonical_feature_order();

/// Replaces NaN and +-Inf with zero; finite values pass through.
ChannelVolume sanitize(const ChannelVolume& ch);

/// Min-max to [0,1] over the valid voxels; invalid voxels become 0.
/// Throws NumericError on a constant channel.
ChannelVolume minmax_normalize(const ChannelVolume& ch,
                               const std::vector<std::uint8_t>& valid);

/// scale * (x - mean) / std over the valid voxels (population std);
/// invalid voxels become 0. Throws NumericError on zero variance.
ChannelVolume zscore_scaled(const ChannelVolume& ch,
                            const std::vector<std::uint8_t>& valid,
                            double scale = 1.0 / 20.0);

ChannelVolume divide_by(const ChannelVolume& ch, double constant);

ChannelVolume apply_normalization(const ChannelVolume& ch,
                                  const std::vector<std::uint8_t>& valid,
                                  const NormalizationRule& rule);

/// Per-voxel time of the peak signal, divided by norm_const. Ties break to
/// the earliest time. Voxels whose peak falls below the 20th percentile of
/// peak signals (nearest-rank, over the considered voxels) are set to 0.
/// Pass `valid` to restrict the percentile population; other voxels map to 0.
ChannelVolume ttp_map(const std::vector<ChannelVolume>& series,
                      const std::vector<double>& times_s,
                      double norm_const = 240.0,
                      const std::vector<std::uint8_t>* valid = nullptr);

/// Soft tissue by CT threshold: valid iff -300 <= HU <= 300.
std::vector<std::uint8_t> soft_tissue_mask(const ChannelVolume& ct_hu);

struct AssembledFeatures {
  FeatureMatrix matrix;    // columns in canonical order restricted to selection
  Eigen::VectorXd targets;
};

/// Builds the training matrix over valid voxels with columns in canonical
/// order restricted to the selection, plus the target vector.
AssembledFeatures assemble_features(const MultiChannelVolume& mcv,
                                    const RegionMask& mask,
                                    const FeatureSelection& sel,
                                    const std::string& target_name);

}  // namespace orthosep
