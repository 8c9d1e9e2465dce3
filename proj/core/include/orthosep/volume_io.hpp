#pragma once

#include <string>
#include <vector>

#include "orthosep/volume.hpp"

namespace orthosep {

// Volumes live on disk as a <stem>.json header plus a <stem>.raw blob of
// little-endian 32-bit floats (or one byte per voxel for masks), x-fastest.
// Paths may be given with or without the .json extension.

/// Writes header + raw pair. Throws NumericError on non-finite data.
void save_volume(const ChannelVolume& vol, const std::string& path);

/// Reads a header + raw pair; the channel name is the file stem.
ChannelVolume load_volume(const std::string& path);

/// One byte per voxel, same header layout with dtype "u8".
void save_u8_volume(const GridSpec& grid, const std::vector<std::uint8_t>& data,
                    const std::string& path);
std::pair<GridSpec, std::vector<std::uint8_t>> load_u8_volume(const std::string& path);

/// Labels and validity are stored as two u8 volumes.
void save_region_mask(const RegionMask& mask, const std::string& labels_path,
                      const std::string& valid_path);
RegionMask load_region_mask(const std::string& labels_path,
                            const std::string& valid_path);

/// A dynamic series: frames at sample times, tied together by a JSON manifest
/// listing times in seconds and frame stems relative to the manifest.
struct DceSeries {
  std::vector<double> times_s;
  std::vector<ChannelVolume> frames;
};

/// Writes frames as <stem>_000 ... plus <stem>_manifest.json into dir.
/// Returns the manifest path.
std::string save_dce_series(const DceSeries& series, const std::string& dir,
                            const std::string& stem);
DceSeries load_dce_series(const std::string& manifest_path);

}  // namespace orthosep
