#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "orthosep/grid.hpp"

namespace orthosep {

/// One named scalar field on a grid. Data is held in 64-bit precision;
/// on-disk precision is 32-bit (see volume_io).
struct ChannelVolume {
  std::string name;
  GridSpec grid;
  std::vector<double> data;

  /// Throws unless data length matches the grid and the name is non-empty.
  void validate() const;
};

/// Ordered set of channels sharing one grid.
struct MultiChannelVolume {
  GridSpec grid;
  std::vector<ChannelVolume> channels;

  /// Enforces grid identity and name uniqueness.
  void add_channel(ChannelVolume ch);
  const ChannelVolume* find(const std::string& name) const;
  const ChannelVolume& at(const std::string& name) const;
};

/// Anatomical region codes, one byte per voxel.
enum class Region : std::uint8_t {
  background = 0,
  surrounding = 1,
  prostate = 2,
  tumour = 3,
};

inline const char* region_name(Region r) {
  switch (r) {
    case Region::background: return "background";
    case Region::surrounding: return "surrounding";
    case Region::prostate: return "prostate";
    case Region::tumour: return "tumour";
  }
  return "unknown";
}

/// Per-voxel region labels plus a validity bit.
struct RegionMask {
  GridSpec grid;
  std::vector<std::uint8_t> labels;
  std::vector<std::uint8_t> valid;

  void validate() const;
};

/// Masked voxel feature vectors: M rows of N features, with a map from row
/// back to the linear voxel index (strictly increasing).
struct FeatureMatrix {
  Eigen::MatrixXd values;
  std::vector<std::size_t> index_map;
  std::vector<std::string> feature_names;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }

  /// Checks row/index alignment, monotone index_map and finiteness.
  void validate() const;
};

/// Voxel selection predicate over (label, valid).
using VoxelPredicate = std::function<bool(std::uint8_t label, bool valid)>;

/// Predicate selecting every valid voxel.
VoxelPredicate valid_voxels();
/// Predicate selecting valid voxels with the given label.
VoxelPredicate label_is(Region r);

/// valid[i] = true iff every channel is nonzero at voxel i.
std::vector<std::uint8_t> intersect_valid_mask(const MultiChannelVolume& mcv);

/// Crops all channels and the mask to the tight bounding box of valid voxels,
/// shifting the grid origin accordingly.
std::pair<MultiChannelVolume, RegionMask> bounding_box_crop(
    const MultiChannelVolume& mcv, const RegionMask& mask);

struct FlattenResult {
  FeatureMatrix matrix;
  Eigen::VectorXd targets;  // empty unless target_name was given
};

/// Flattens the selected voxels into a feature matrix, rows in ascending
/// linear-index order. If target_name is non-empty, that channel is split out
/// as the target vector instead of becoming a column.
FlattenResult flatten_masked(const MultiChannelVolume& mcv, const RegionMask& mask,
                             const VoxelPredicate& include,
                             const std::string& target_name = "");

/// Same, but columns follow channel_order (which must name existing,
/// non-target channels).
FlattenResult flatten_masked_ordered(const MultiChannelVolume& mcv,
                                     const RegionMask& mask,
                                     const VoxelPredicate& include,
                                     const std::vector<std::string>& channel_order,
                                     const std::string& target_name = "");

/// Places values at the mapped voxel indices, fill elsewhere.
ChannelVolume scatter_to_volume(const Eigen::VectorXd& values,
                                const std::vector<std::size_t>& index_map,
                                const GridSpec& grid, double fill,
                                const std::string& name = "scattered");

}  // namespace orthosep
