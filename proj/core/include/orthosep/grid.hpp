#pragma once

#include <array>
#include <cstddef>

namespace orthosep {

/// Regular 3-D voxel grid. Linear storage order is x-fastest:
/// index = z*(ny*nx) + y*nx + x. Every module shares this convention.
struct GridSpec {
  std::array<int, 3> dims{1, 1, 1};                // nx, ny, nz
  std::array<double, 3> spacing_mm{1.0, 1.0, 1.0};  // sx, sy, sz
  std::array<double, 3> origin_mm{0.0, 0.0, 0.0};

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }

  std::size_t linear_index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * dims[1] + y) * dims[0] + x;
  }

  std::array<int, 3> coords(std::size_t linear) const {
    const int nx = dims[0];
    const int ny = dims[1];
    const int x = static_cast<int>(linear % nx);
    const int y = static_cast<int>((linear / nx) % ny);
    const int z = static_cast<int>(linear / (static_cast<std::size_t>(nx) * ny));
    return {x, y, z};
  }

  bool operator==(const GridSpec&) const = default;

  /// Throws ConfigError unless all dims >= 1 and all spacings > 0.
  void validate() const;
};

}  // namespace orthosep
