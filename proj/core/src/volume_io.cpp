#include "orthosep/volume_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "orthosep/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace orthosep {
namespace {

std::string stem_of(const std::string& path) {
  std::string s = path;
  if (s.size() > 5 && s.substr(s.size() - 5) == ".json") s.resize(s.size() - 5);
  return s;
}

void put_u32_le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("missing file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  return bytes;
}

json header_json(const GridSpec& g, const std::string& dtype) {
  json h;
  h["dims"] = {g.dims[0], g.dims[1], g.dims[2]};
  h["spacing_mm"] = {g.spacing_mm[0], g.spacing_mm[1], g.spacing_mm[2]};
  h["origin_mm"] = {g.origin_mm[0], g.origin_mm[1], g.origin_mm[2]};
  h["dtype"] = dtype;
  h["order"] = "x-fastest";
  return h;
}

struct Header {
  GridSpec grid;
  std::string dtype;
};

Header parse_header(const std::string& path) {
  json h;
  try {
    h = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw IoError("bad volume header " + path + ": " + e.what());
  }
  for (const char* key : {"dims", "spacing_mm", "origin_mm", "dtype", "order"}) {
    if (!h.contains(key)) {
      throw IoError("volume header " + path + " missing field '" + key + "'");
    }
  }
  Header out;
  try {
    for (int a = 0; a < 3; ++a) {
      out.grid.dims[a] = h["dims"].at(a).get<int>();
      out.grid.spacing_mm[a] = h["spacing_mm"].at(a).get<double>();
      out.grid.origin_mm[a] = h["origin_mm"].at(a).get<double>();
    }
    out.dtype = h["dtype"].get<std::string>();
  } catch (const json::exception& e) {
    throw IoError("bad volume header " + path + ": " + e.what());
  }
  if (h["order"].get<std::string>() != "x-fastest") {
    throw IoError("volume header " + path + ": unsupported order");
  }
  for (int d : out.grid.dims) {
    if (d < 1) throw IoError("volume header " + path + ": non-positive dims");
  }
  for (double s : out.grid.spacing_mm) {
    if (!(s > 0.0)) throw IoError("volume header " + path + ": non-positive spacing");
  }
  return out;
}

}  // namespace

void save_u8_volume(const GridSpec& grid, const std::vector<std::uint8_t>& data,
                    const std::string& path) {
  const std::string stem = stem_of(path);
  if (data.size() != grid.voxel_count()) throw IoError("u8 volume: length mismatch");
  write_file(stem + ".json", header_json(grid, "u8").dump(2) + "\n");
  std::string raw(reinterpret_cast<const char*>(data.data()), data.size());
  write_file(stem + ".raw", raw);
}

std::pair<GridSpec, std::vector<std::uint8_t>> load_u8_volume(const std::string& path) {
  const std::string stem = stem_of(path);
  Header h = parse_header(stem + ".json");
  if (h.dtype != "u8") throw IoError(stem + ": unknown dtype '" + h.dtype + "'");
  std::string raw = read_file(stem + ".raw");
  if (raw.size() != h.grid.voxel_count()) {
    throw IoError(stem + ".raw: length mismatch");
  }
  std::vector<std::uint8_t> data(raw.begin(), raw.end());
  return {h.grid, std::move(data)};
}

void save_volume(const ChannelVolume& vol, const std::string& path) {
  vol.validate();
  const std::string stem = stem_of(path);
  for (double v : vol.data) {
    if (!std::isfinite(v)) {
      throw NumericError("save_volume '" + vol.name + "': unsanitized data");
    }
  }
  write_file(stem + ".json", header_json(vol.grid, "f32").dump(2) + "\n");
  std::string raw;
  raw.reserve(vol.data.size() * 4);
  for (double v : vol.data) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32_le(raw, bits);
  }
  write_file(stem + ".raw", raw);
}

ChannelVolume load_volume(const std::string& path) {
  const std::string stem = stem_of(path);
  Header h = parse_header(stem + ".json");
  if (h.dtype != "f32") throw IoError(stem + ": unknown dtype '" + h.dtype + "'");
  std::string raw = read_file(stem + ".raw");
  const std::size_t n = h.grid.voxel_count();
  if (raw.size() != n * 4) throw IoError(stem + ".raw: length mismatch");

  ChannelVolume vol;
  vol.name = fs::path(stem).filename().string();
  vol.grid = h.grid;
  vol.data.resize(n);
  const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t bits = get_u32_le(p + 4 * i);
    float f;
    std::memcpy(&f, &bits, 4);
    vol.data[i] = static_cast<double>(f);
  }
  return vol;
}

void save_region_mask(const RegionMask& mask, const std::string& labels_path,
                      const std::string& valid_path) {
  mask.validate();
  save_u8_volume(mask.grid, mask.labels, labels_path);
  save_u8_volume(mask.grid, mask.valid, valid_path);
}

RegionMask load_region_mask(const std::string& labels_path,
                            const std::string& valid_path) {
  auto [lgrid, labels] = load_u8_volume(labels_path);
  auto [vgrid, valid] = load_u8_volume(valid_path);
  if (!(lgrid == vgrid)) throw IoError("region mask: label/valid grid mismatch");
  RegionMask mask{lgrid, std::move(labels), std::move(valid)};
  for (auto& v : mask.valid) v = v ? 1 : 0;
  mask.validate();
  return mask;
}

std::string save_dce_series(const DceSeries& series, const std::string& dir,
                            const std::string& stem) {
  if (series.times_s.size() != series.frames.size()) {
    throw ConfigError("dce series: times/frames length mismatch");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  json manifest;
  manifest["times_s"] = series.times_s;
  std::vector<std::string> names;
  for (std::size_t k = 0; k < series.frames.size(); ++k) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%03zu", stem.c_str(), k);
    names.emplace_back(buf);
    ChannelVolume frame = series.frames[k];
    frame.name = names.back();
    save_volume(frame, (fs::path(dir) / names.back()).string());
  }
  manifest["frames"] = names;
  const std::string mpath = (fs::path(dir) / (stem + "_manifest.json")).string();
  write_file(mpath, manifest.dump(2) + "\n");
  return mpath;
}

DceSeries load_dce_series(const std::string& manifest_path) {
  json m;
  try {
    m = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    throw IoError(std::string("bad dce manifest: ") + e.what());
  }
  if (!m.contains("times_s") || !m.contains("frames")) {
    throw IoError("dce manifest: missing times_s/frames");
  }
  DceSeries out;
  out.times_s = m["times_s"].get<std::vector<double>>();
  const auto names = m["frames"].get<std::vector<std::string>>();
  if (names.size() != out.times_s.size()) {
    throw IoError("dce manifest: times/frames length mismatch");
  }
  const fs::path dir = fs::path(manifest_path).parent_path();
  for (const auto& name : names) {
    out.frames.push_back(load_volume((dir / name).string()));
  }
  return out;
}

}  // namespace orthosep
