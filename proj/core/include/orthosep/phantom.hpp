#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "orthosep/kinetics.hpp"
#include "orthosep/projection.hpp"
#include "orthosep/volume.hpp"

namespace orthosep {

/// Target-generating function of the feature vector. Supported ids:
///   softplus_affine: scale * softplus(w.x + bias) + offset
///   tanh_affine:     scale * tanh(w.x + bias) + offset
///   linear:          scale * (w.x + bias) + offset
struct EnvelopeSpec {
  std::string id = "softplus_affine";
  std::vector<double> weights;  // one per canonical feature
  double bias = 0.0;
  double scale = 1.0;
  double offset = 0.0;

  double evaluate(const Eigen::VectorXd& x) const;
  void validate(std::size_t feature_count) const;
};

/// Stock envelope: a softplus ramp over six of the seven features, leaving
/// vp unused as the ablation decoy.
EnvelopeSpec default_envelope();

struct PhantomSpec {
  std::array<int, 3> dims{44, 44, 44};
  std::uint64_t seed = 1;
  int n_blobs = 6;
  double tumour_radius_vox = 4.0;
  double prostate_radius_vox = 9.0;
  std::array<double, 3> body_semiaxes_frac{0.45, 0.45, 0.45};
  EnvelopeSpec envelope = default_envelope();
  double ortho_amplitude = 0.0;  // c
  double noise_sd = 0.0;

  void validate() const;
};

/// Known decomposition of the generated target, aligned to the valid-voxel
/// index map: y = envelope + ortho + noise.
struct PhantomTruth {
  EnvelopeSpec envelope;
  double ortho_amplitude = 0.0;
  double noise_sd = 0.0;
  std::uint64_t seed = 0;
  Eigen::VectorXd envelope_values;           // g(x) per row
  Eigen::VectorXd ortho_values;              // c*u per row (zero outside tumour)
  std::vector<std::size_t> index_map;
  std::map<std::string, double> ortho_energy;  // mean (c*u)^2 per region
};

struct PhantomDataset {
  MultiChannelVolume features;  // normalized channels in canonical order
  ChannelVolume target;         // "SUV"
  RegionMask mask;
  PhantomTruth truth;
};

/// Region labels: a body ellipsoid of surrounding tissue enclosing a prostate
/// sphere which encloses a tumour sphere; everything else is background.
/// valid == (label != background).
RegionMask make_region_mask(const PhantomSpec& spec);

/// Seven smooth random-blob channels named per the canonical order, zero
/// outside the body, normalized like the real pipeline (min-max for the
/// structural channels, divide-by-240 for TTP, scaled z-score for the
/// exchange maps).
MultiChannelVolume make_feature_fields(const PhantomSpec& spec);

/// Removes the component of z inside col(X), then restricts to the support
/// rows and orthogonalizes once more against the support submatrix, so the
/// result is supported exactly on `support` with |X'u| / |u| <= 1e-6.
/// An empty support means no restriction. Throws NumericError when z has no
/// orthogonal content.
Eigen::VectorXd orthogonalize_against(const FeatureMatrix& X,
                                      const Eigen::VectorXd& z,
                                      const std::vector<std::uint8_t>& support,
                                      const ProjectorSpec& spec);

/// y = g(x) + c*u + noise over the valid voxels (zero elsewhere), with the
/// exact components returned for oracle use. u is unit-RMS over the tumour
/// and orthogonal to the feature columns.
std::pair<ChannelVolume, PhantomTruth> make_target(const MultiChannelVolume& features,
                                                   const RegionMask& mask,
                                                   const PhantomSpec& spec);

PhantomDataset generate_phantom(const PhantomSpec& spec);

/// Small synthetic exchange-model study: smooth parameter maps inside an
/// ellipsoid plus the corresponding dynamic series, for exercising the
/// fitting pipeline end to end.
struct DcePhantom {
  GridSpec grid;
  std::vector<std::uint8_t> valid;
  std::vector<ToftsParams> voxel_params;
  ChannelVolume ktrans, ve, vp;
  std::vector<ChannelVolume> frames;
  TimeGrid times;
  AIF aif;
};

struct DcePhantomSpec {
  std::array<int, 3> dims{12, 12, 12};
  std::uint64_t seed = 7;
  int n_times = 40;
  double dt_s = 6.0;
  double noise_sd = 0.0;
  double aif_delay_s = 10.0;
  double aif_amplitude = 1.0;
  double aif_decay1 = 0.05;
  double aif_decay2 = 0.003;
};

DcePhantom generate_dce_phantom(const DcePhantomSpec& spec);

}  // namespace orthosep
