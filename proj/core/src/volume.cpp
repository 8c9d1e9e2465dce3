#include "orthosep/volume.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "orthosep/errors.hpp"

namespace orthosep {

void GridSpec::validate() const {
  for (int d : dims) {
    if (d < 1) throw ConfigError("GridSpec: dims must be >= 1");
  }
  for (double s : spacing_mm) {
    if (!(s > 0.0)) throw ConfigError("GridSpec: spacing_mm must be > 0");
  }
}

void ChannelVolume::validate() const {
  grid.validate();
  if (name.empty()) throw ConfigError("ChannelVolume: name must be non-empty");
  if (data.size() != grid.voxel_count()) {
    throw ConfigError("ChannelVolume '" + name + "': length mismatch");
  }
}

void MultiChannelVolume::add_channel(ChannelVolume ch) {
  ch.validate();
  if (channels.empty()) {
    grid = ch.grid;
  } else if (!(ch.grid == grid)) {
    throw ConfigError("MultiChannelVolume: channel '" + ch.name +
                      "' grid differs from the shared grid");
  }
  if (find(ch.name) != nullptr) {
    throw ConfigError("MultiChannelVolume: duplicate channel name '" + ch.name + "'");
  }
  channels.push_back(std::move(ch));
}

const ChannelVolume* MultiChannelVolume::find(const std::string& name) const {
  for (const auto& ch : channels) {
    if (ch.name == name) return &ch;
  }
  return nullptr;
}

const ChannelVolume& MultiChannelVolume::at(const std::string& name) const {
  const ChannelVolume* ch = find(name);
  if (ch == nullptr) {
    throw ConfigError("MultiChannelVolume: unknown channel '" + name + "'");
  }
  return *ch;
}

void RegionMask::validate() const {
  grid.validate();
  const std::size_t n = grid.voxel_count();
  if (labels.size() != n || valid.size() != n) {
    throw ConfigError("RegionMask: length mismatch");
  }
  for (std::uint8_t l : labels) {
    if (l > 3) throw ConfigError("RegionMask: label code out of range");
  }
}

void FeatureMatrix::validate() const {
  if (static_cast<std::size_t>(values.rows()) != index_map.size()) {
    throw ConfigError("FeatureMatrix: index_map length mismatch");
  }
  if (static_cast<std::size_t>(values.cols()) != feature_names.size()) {
    throw ConfigError("FeatureMatrix: feature_names length mismatch");
  }
  for (std::size_t i = 1; i < index_map.size(); ++i) {
    if (index_map[i] <= index_map[i - 1]) {
      throw ConfigError("FeatureMatrix: index_map must be strictly increasing");
    }
  }
  if (!values.allFinite()) {
    throw NumericError("FeatureMatrix: unsanitized data (non-finite values)");
  }
}

VoxelPredicate valid_voxels() {
  return [](std::uint8_t, bool valid) { return valid; };
}

VoxelPredicate label_is(Region r) {
  return [r](std::uint8_t label, bool valid) {
    return valid && label == static_cast<std::uint8_t>(r);
  };
}

std::vector<std::uint8_t> intersect_valid_mask(const MultiChannelVolume& mcv) {
  if (mcv.channels.empty()) {
    throw ConfigError("intersect_valid_mask: empty channel list");
  }
  const std::size_t n = mcv.grid.voxel_count();
  std::vector<std::uint8_t> valid(n, 1);
  for (const auto& ch : mcv.channels) {
    for (std::size_t i = 0; i < n; ++i) {
      if (ch.data[i] == 0.0) valid[i] = 0;
    }
  }
  return valid;
}

std::pair<MultiChannelVolume, RegionMask> bounding_box_crop(
    const MultiChannelVolume& mcv, const RegionMask& mask) {
  mask.validate();
  if (!(mask.grid == mcv.grid)) {
    throw ConfigError("bounding_box_crop: mask grid differs from volume grid");
  }
  const GridSpec& g = mcv.grid;
  std::array<int, 3> lo{g.dims[0], g.dims[1], g.dims[2]};
  std::array<int, 3> hi{-1, -1, -1};
  for (std::size_t i = 0; i < mask.valid.size(); ++i) {
    if (!mask.valid[i]) continue;
    const auto c = g.coords(i);
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], c[a]);
      hi[a] = std::max(hi[a], c[a]);
    }
  }
  if (hi[0] < 0) throw NumericError("bounding_box_crop: all-invalid mask");

  GridSpec out = g;
  for (int a = 0; a < 3; ++a) {
    out.dims[a] = hi[a] - lo[a] + 1;
    out.origin_mm[a] = g.origin_mm[a] + lo[a] * g.spacing_mm[a];
  }

  auto crop_field = [&](const auto& src, auto& dst) {
    dst.resize(out.voxel_count());
    std::size_t k = 0;
    for (int z = lo[2]; z <= hi[2]; ++z) {
      for (int y = lo[1]; y <= hi[1]; ++y) {
        for (int x = lo[0]; x <= hi[0]; ++x) {
          dst[k++] = src[g.linear_index(x, y, z)];
        }
      }
    }
  };

  MultiChannelVolume cropped;
  cropped.grid = out;
  for (const auto& ch : mcv.channels) {
    ChannelVolume c{ch.name, out, {}};
    crop_field(ch.data, c.data);
    cropped.channels.push_back(std::move(c));
  }
  RegionMask m{out, {}, {}};
  crop_field(mask.labels, m.labels);
  crop_field(mask.valid, m.valid);
  return {std::move(cropped), std::move(m)};
}

FlattenResult flatten_masked_ordered(const MultiChannelVolume& mcv,
                                     const RegionMask& mask,
                                     const VoxelPredicate& include,
                                     const std::vector<std::string>& channel_order,
                                     const std::string& target_name) {
  if (!(mask.grid == mcv.grid)) {
    throw ConfigError("flatten_masked: mask grid differs from volume grid");
  }
  std::vector<const ChannelVolume*> cols;
  cols.reserve(channel_order.size());
  for (const auto& name : channel_order) {
    if (name == target_name) continue;
    cols.push_back(&mcv.at(name));
  }
  const ChannelVolume* target =
      target_name.empty() ? nullptr : &mcv.at(target_name);

  const std::size_t n = mcv.grid.voxel_count();
  std::vector<std::size_t> index_map;
  for (std::size_t i = 0; i < n; ++i) {
    if (include(mask.labels[i], mask.valid[i] != 0)) index_map.push_back(i);
  }
  if (index_map.empty()) throw NumericError("flatten_masked: empty selection");

  FlattenResult out;
  out.matrix.values.resize(static_cast<Eigen::Index>(index_map.size()),
                           static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < index_map.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out.matrix.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          cols[c]->data[index_map[r]];
    }
  }
  out.matrix.index_map = std::move(index_map);
  for (const auto* ch : cols) out.matrix.feature_names.push_back(ch->name);
  if (target != nullptr) {
    out.targets.resize(static_cast<Eigen::Index>(out.matrix.index_map.size()));
    for (std::size_t r = 0; r < out.matrix.index_map.size(); ++r) {
      out.targets[static_cast<Eigen::Index>(r)] = target->data[out.matrix.index_map[r]];
    }
  }
  out.matrix.validate();
  return out;
}

FlattenResult flatten_masked(const MultiChannelVolume& mcv, const RegionMask& mask,
                             const VoxelPredicate& include,
                             const std::string& target_name) {
  std::vector<std::string> order;
  for (const auto& ch : mcv.channels) {
    if (ch.name != target_name) order.push_back(ch.name);
  }
  return flatten_masked_ordered(mcv, mask, include, order, target_name);
}

ChannelVolume scatter_to_volume(const Eigen::VectorXd& values,
                                const std::vector<std::size_t>& index_map,
                                const GridSpec& grid, double fill,
                                const std::string& name) {
  if (static_cast<std::size_t>(values.size()) != index_map.size()) {
    throw ConfigError("scatter_to_volume: values/index_map length mismatch");
  }
  ChannelVolume out{name, grid, std::vector<double>(grid.voxel_count(), fill)};
  for (std::size_t r = 0; r < index_map.size(); ++r) {
    if (index_map[r] >= out.data.size()) {
      throw ConfigError("scatter_to_volume: index out of range");
    }
    out.data[index_map[r]] = values[static_cast<Eigen::Index>(r)];
  }
  return out;
}

}  // namespace orthosep
