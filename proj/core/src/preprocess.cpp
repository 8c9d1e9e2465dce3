#include "orthosep/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "orthosep/errors.hpp"

namespace orthosep {

const std::vector<std::string>& canonical_feature_order() {
  static const std::vector<std::string> order = {"T1", "T2",  "ADC", "Ktrans",
                                                 "ve", "vp", "TTP"};
  return order;
}

void FeatureSelection::validate() const {
  if (included.empty()) throw ConfigError("FeatureSelection: empty selection");
  const auto& canon = canonical_feature_order();
  for (const auto& name : included) {
    if (std::find(canon.begin(), canon.end(), name) == canon.end()) {
      throw ConfigError("FeatureSelection: unknown channel name '" + name + "'");
    }
  }
}

ChannelVolume sanitize(const ChannelVolume& ch) {
  ChannelVolume out = ch;
  for (double& v : out.data) {
    if (!std::isfinite(v)) v = 0.0;
  }
  return out;
}

namespace {

void check_mask(const ChannelVolume& ch, const std::vector<std::uint8_t>& valid) {
  if (valid.size() != ch.data.size()) {
    throw ConfigError("normalization: mask length mismatch for '" + ch.name + "'");
  }
}

}  // namespace

ChannelVolume minmax_normalize(const ChannelVolume& ch,
                               const std::vector<std::uint8_t>& valid) {
  check_mask(ch, valid);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  std::size_t count = 0;
  for (std::size_t i = 0; i < ch.data.size(); ++i) {
    if (!valid[i]) continue;
    lo = std::min(lo, ch.data[i]);
    hi = std::max(hi, ch.data[i]);
    ++count;
  }
  if (count < 2 || !(hi > lo)) {
    throw NumericError("minmax_normalize '" + ch.name + "': degenerate channel");
  }
  ChannelVolume out = ch;
  const double inv = 1.0 / (hi - lo);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = valid[i] ? (out.data[i] - lo) * inv : 0.0;
  }
  return out;
}

ChannelVolume zscore_scaled(const ChannelVolume& ch,
                            const std::vector<std::uint8_t>& valid, double scale) {
  check_mask(ch, valid);
  if (!(scale > 0.0)) throw ConfigError("zscore_scaled: scale must be > 0");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < ch.data.size(); ++i) {
    if (valid[i]) {
      sum += ch.data[i];
      ++count;
    }
  }
  if (count == 0) throw NumericError("zscore_scaled '" + ch.name + "': empty mask");
  const double mean = sum / static_cast<double>(count);
  double ss = 0.0;
  for (std::size_t i = 0; i < ch.data.size(); ++i) {
    if (valid[i]) {
      const double d = ch.data[i] - mean;
      ss += d * d;
    }
  }
  const double var = ss / static_cast<double>(count);  // population
  if (!(var > 0.0)) {
    throw NumericError("zscore_scaled '" + ch.name + "': zero variance");
  }
  const double inv_std = 1.0 / std::sqrt(var);
  ChannelVolume out = ch;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = valid[i] ? scale * (out.data[i] - mean) * inv_std : 0.0;
  }
  return out;
}

ChannelVolume divide_by(const ChannelVolume& ch, double constant) {
  if (!(constant > 0.0)) throw ConfigError("divide_by: constant must be > 0");
  ChannelVolume out = ch;
  for (double& v : out.data) v /= constant;
  return out;
}

ChannelVolume apply_normalization(const ChannelVolume& ch,
                                  const std::vector<std::uint8_t>& valid,
                                  const NormalizationRule& rule) {
  switch (rule.kind) {
    case NormKind::none: return ch;
    case NormKind::minmax01: return minmax_normalize(ch, valid);
    case NormKind::divide_by: return divide_by(ch, rule.constant);
    case NormKind::zscore_scaled: return zscore_scaled(ch, valid, rule.constant);
  }
  throw ConfigError("apply_normalization: unknown rule");
}

ChannelVolume ttp_map(const std::vector<ChannelVolume>& series,
                      const std::vector<double>& times_s, double norm_const,
                      const std::vector<std::uint8_t>* valid) {
  if (series.size() < 2) throw ConfigError("ttp_map: need >= 2 time points");
  if (times_s.size() != series.size()) {
    throw ConfigError("ttp_map: times/series length mismatch");
  }
  for (std::size_t k = 1; k < times_s.size(); ++k) {
    if (!(times_s[k] > times_s[k - 1])) {
      throw ConfigError("ttp_map: non-monotone time vector");
    }
  }
  if (!(norm_const > 0.0)) throw ConfigError("ttp_map: norm_const must be > 0");
  const GridSpec grid = series.front().grid;
  const std::size_t n = grid.voxel_count();
  for (const auto& frame : series) {
    if (!(frame.grid == grid)) throw ConfigError("ttp_map: frame grid mismatch");
  }
  if (valid != nullptr && valid->size() != n) {
    throw ConfigError("ttp_map: mask length mismatch");
  }

  std::vector<double> peak(n);
  std::vector<std::size_t> argmax(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double best = series[0].data[i];
    std::size_t best_k = 0;
    for (std::size_t k = 1; k < series.size(); ++k) {
      const double v = series[k].data[i];
      if (v > best) {  // strict: ties keep the earliest time
        best = v;
        best_k = k;
      }
    }
    peak[i] = best;
    argmax[i] = best_k;
  }

  // Nearest-rank 20th percentile of peak signal over the considered voxels.
  std::vector<double> peaks_considered;
  peaks_considered.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (valid == nullptr || (*valid)[i]) peaks_considered.push_back(peak[i]);
  }
  if (peaks_considered.empty()) throw NumericError("ttp_map: empty mask");
  const std::size_t m = peaks_considered.size();
  std::size_t rank = static_cast<std::size_t>(
      std::ceil(0.2 * static_cast<double>(m)));
  if (rank == 0) rank = 1;
  std::nth_element(peaks_considered.begin(), peaks_considered.begin() + (rank - 1),
                   peaks_considered.end());
  const double cut = peaks_considered[rank - 1];

  ChannelVolume out{"TTP", grid, std::vector<double>(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    if (valid != nullptr && !(*valid)[i]) continue;
    if (peak[i] < cut) continue;
    out.data[i] = times_s[argmax[i]] / norm_const;
  }
  return out;
}

std::vector<std::uint8_t> soft_tissue_mask(const ChannelVolume& ct_hu) {
  std::vector<std::uint8_t> valid(ct_hu.data.size());
  for (std::size_t i = 0; i < ct_hu.data.size(); ++i) {
    const double hu = ct_hu.data[i];
    valid[i] = (hu >= -300.0 && hu <= 300.0) ? 1 : 0;
  }
  return valid;
}

AssembledFeatures assemble_features(const MultiChannelVolume& mcv,
                                    const RegionMask& mask,
                                    const FeatureSelection& sel,
                                    const std::string& target_name) {
  sel.validate();
  if (target_name.empty()) throw ConfigError("assemble_features: no target channel");
  std::vector<std::string> order;
  for (const auto& name : canonical_feature_order()) {
    if (std::find(sel.included.begin(), sel.included.end(), name) !=
        sel.included.end()) {
      order.push_back(name);
    }
  }
  FlattenResult flat =
      flatten_masked_ordered(mcv, mask, valid_voxels(), order, target_name);
  return {std::move(flat.matrix), std::move(flat.targets)};
}

}  // namespace orthosep
