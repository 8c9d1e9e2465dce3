#include "orthosep/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "orthosep/errors.hpp"
#include "orthosep/preprocess.hpp"
#include "orthosep/rng.hpp"

namespace orthosep {

double EnvelopeSpec::evaluate(const Eigen::VectorXd& x) const {
  if (x.size() != static_cast<Eigen::Index>(weights.size())) {
    throw ConfigError("EnvelopeSpec: weight/feature count mismatch");
  }
  double z = bias;
  for (Eigen::Index j = 0; j < x.size(); ++j) z += weights[j] * x[j];
  double g;
  if (id == "softplus_affine") {
    g = z > 30.0 ? z : std::log1p(std::exp(z));
  } else if (id == "tanh_affine") {
    g = std::tanh(z);
  } else if (id == "linear") {
    g = z;
  } else {
    throw ConfigError("EnvelopeSpec: unknown id '" + id + "'");
  }
  return scale * g + offset;
}

void EnvelopeSpec::validate(std::size_t feature_count) const {
  if (weights.size() != feature_count) {
    throw ConfigError("EnvelopeSpec: expected " + std::to_string(feature_count) +
                      " weights");
  }
  if (id != "softplus_affine" && id != "tanh_affine" && id != "linear") {
    throw ConfigError("EnvelopeSpec: unknown id '" + id + "'");
  }
  for (double w : weights) {
    if (!std::isfinite(w)) throw ConfigError("EnvelopeSpec: non-finite weight");
  }
}

EnvelopeSpec default_envelope() {
  EnvelopeSpec env;
  env.id = "softplus_affine";
  env.weights = {0.9, 1.1, 0.7, 9.0, 7.0, 0.0, 0.8};  // (T1,T2,ADC,Ktrans,ve,vp,TTP)
  env.bias = -1.2;
  env.scale = 0.6;
  env.offset = 0.05;
  return env;
}

void PhantomSpec::validate() const {
  GridSpec g{dims};
  g.validate();
  if (n_blobs < 1) throw ConfigError("PhantomSpec: n_blobs must be >= 1");
  if (!(tumour_radius_vox > 0.0) || !(prostate_radius_vox > tumour_radius_vox)) {
    throw ConfigError("PhantomSpec: need prostate_radius > tumour_radius > 0");
  }
  const double min_half = 0.5 * *std::min_element(dims.begin(), dims.end());
  const double min_body =
      min_half * *std::min_element(body_semiaxes_frac.begin(), body_semiaxes_frac.end()) * 2.0;
  if (!(prostate_radius_vox < min_body)) {
    throw ConfigError("PhantomSpec: prostate sphere must fit inside the body");
  }
  for (double f : body_semiaxes_frac) {
    if (!(f > 0.0 && f <= 0.5)) {
      throw ConfigError("PhantomSpec: body_semiaxes_frac must be in (0, 0.5]");
    }
  }
  if (!(ortho_amplitude >= 0.0) || !std::isfinite(ortho_amplitude)) {
    throw ConfigError("PhantomSpec: ortho_amplitude must be finite and >= 0");
  }
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) {
    throw ConfigError("PhantomSpec: noise_sd must be finite and >= 0");
  }
  envelope.validate(canonical_feature_order().size());
}

RegionMask make_region_mask(const PhantomSpec& spec) {
  spec.validate();
  GridSpec grid{spec.dims};
  const std::size_t n = grid.voxel_count();
  RegionMask mask{grid, std::vector<std::uint8_t>(n, 0), std::vector<std::uint8_t>(n, 0)};

  const double cx = 0.5 * (spec.dims[0] - 1);
  const double cy = 0.5 * (spec.dims[1] - 1);
  const double cz = 0.5 * (spec.dims[2] - 1);
  const double ax = spec.body_semiaxes_frac[0] * spec.dims[0];
  const double ay = spec.body_semiaxes_frac[1] * spec.dims[1];
  const double az = spec.body_semiaxes_frac[2] * spec.dims[2];
  // Tumour sits off-centre inside the prostate sphere.
  const double toff = 0.4 * (spec.prostate_radius_vox - spec.tumour_radius_vox);

  for (std::size_t i = 0; i < n; ++i) {
    const auto c = grid.coords(i);
    const double dx = c[0] - cx, dy = c[1] - cy, dz = c[2] - cz;
    const double body = dx * dx / (ax * ax) + dy * dy / (ay * ay) + dz * dz / (az * az);
    if (body > 1.0) continue;
    const double r2 = dx * dx + dy * dy + dz * dz;
    const double tx = dx - toff, ty = dy, tz = dz;
    const double tr2 = tx * tx + ty * ty + tz * tz;
    if (tr2 <= spec.tumour_radius_vox * spec.tumour_radius_vox) {
      mask.labels[i] = static_cast<std::uint8_t>(Region::tumour);
    } else if (r2 <= spec.prostate_radius_vox * spec.prostate_radius_vox) {
      mask.labels[i] = static_cast<std::uint8_t>(Region::prostate);
    } else {
      mask.labels[i] = static_cast<std::uint8_t>(Region::surrounding);
    }
    mask.valid[i] = 1;
  }
  return mask;
}

namespace {

/// Sum of random Gaussian blobs plus a positive base, masked to the body.
std::vector<double> blob_field(const GridSpec& grid,
                               const std::vector<std::uint8_t>& valid, int n_blobs,
                               Rng& rng) {
  struct Blob {
    double cx, cy, cz, inv_2s2, amp;
  };
  std::vector<Blob> blobs(n_blobs);
  const double min_dim = static_cast<double>(
      *std::min_element(grid.dims.begin(), grid.dims.end()));
  for (auto& b : blobs) {
    b.cx = rng.uniform(0.0, grid.dims[0] - 1.0);
    b.cy = rng.uniform(0.0, grid.dims[1] - 1.0);
    b.cz = rng.uniform(0.0, grid.dims[2] - 1.0);
    const double sigma = rng.uniform(0.10, 0.22) * min_dim;
    b.inv_2s2 = 1.0 / (2.0 * sigma * sigma);
    b.amp = rng.uniform(0.5, 1.5);
  }
  const std::size_t n = grid.voxel_count();
  std::vector<double> field(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!valid[i]) continue;
    const auto c = grid.coords(i);
    double v = 0.2;  // keeps valid voxels nonzero
    for (const auto& b : blobs) {
      const double dx = c[0] - b.cx, dy = c[1] - b.cy, dz = c[2] - b.cz;
      v += b.amp * std::exp(-(dx * dx + dy * dy + dz * dz) * b.inv_2s2);
    }
    field[i] = v;
  }
  return field;
}

}  // namespace

MultiChannelVolume make_feature_fields(const PhantomSpec& spec) {
  const RegionMask mask = make_region_mask(spec);
  const GridSpec grid = mask.grid;
  const auto& names = canonical_feature_order();

  MultiChannelVolume mcv;
  for (std::size_t c = 0; c < names.size(); ++c) {
    Rng rng(derive_seed(spec.seed, 10 + c));
    ChannelVolume raw{names[c], grid, blob_field(grid, mask.valid, spec.n_blobs, rng)};
    ChannelVolume normalized;
    if (names[c] == "TTP") {
      // Raw field rescaled to look like seconds in [0, 240], then the usual
      // divide-by-duration rule.
      double hi = 0.0;
      for (std::size_t i = 0; i < raw.data.size(); ++i) {
        if (mask.valid[i]) hi = std::max(hi, raw.data[i]);
      }
      for (double& v : raw.data) v = v / hi * 240.0;
      normalized = divide_by(raw, 240.0);
    } else if (names[c] == "Ktrans" || names[c] == "ve" || names[c] == "vp") {
      normalized = zscore_scaled(raw, mask.valid, 1.0 / 20.0);
    } else {
      normalized = minmax_normalize(raw, mask.valid);
    }
    mcv.add_channel(std::move(normalized));
  }
  return mcv;
}

Eigen::VectorXd orthogonalize_against(const FeatureMatrix& X,
                                      const Eigen::VectorXd& z,
                                      const std::vector<std::uint8_t>& support,
                                      const ProjectorSpec& spec) {
  X.validate();
  if (z.size() != X.rows()) throw ConfigError("orthogonalize_against: length mismatch");
  if (!z.allFinite()) throw NumericError("orthogonalize_against: non-finite z");
  if (!support.empty() && support.size() != static_cast<std::size_t>(X.rows())) {
    throw ConfigError("orthogonalize_against: support length mismatch");
  }
  ProjectorSpec pinv_spec = spec;
  pinv_spec.mode = ProjectorMode::pinv;

  const GramFactorization fact = gram_factorize(X.values, pinv_spec);
  Eigen::VectorXd u = z - project_parallel(X.values, fact, z);

  if (!support.empty()) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      if (support[static_cast<std::size_t>(i)]) rows.push_back(i);
    }
    if (rows.size() < static_cast<std::size_t>(X.cols())) {
      throw NumericError("orthogonalize_against: support smaller than feature count");
    }
    // Masking to the support re-introduces a parallel component; a second
    // projection against the support rows removes it without growing the
    // support.
    Eigen::MatrixXd Xs(static_cast<Eigen::Index>(rows.size()), X.cols());
    Eigen::VectorXd us(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      Xs.row(static_cast<Eigen::Index>(r)) = X.values.row(rows[r]);
      us[static_cast<Eigen::Index>(r)] = u[rows[r]];
    }
    const GramFactorization fact_s = gram_factorize(Xs, pinv_spec);
    us -= project_parallel(Xs, fact_s, us);
    u.setZero();
    for (std::size_t r = 0; r < rows.size(); ++r) {
      u[rows[r]] = us[static_cast<Eigen::Index>(r)];
    }
  }

  const double zn = z.norm();
  if (u.norm() <= 1e-12 * (zn > 0.0 ? zn : 1.0)) {
    throw NumericError("orthogonalize_against: no orthogonal content");
  }
  return u;
}

std::pair<ChannelVolume, PhantomTruth> make_target(const MultiChannelVolume& features,
                                                   const RegionMask& mask,
                                                   const PhantomSpec& spec) {
  spec.validate();
  FlattenResult flat = flatten_masked_ordered(features, mask, valid_voxels(),
                                              canonical_feature_order());
  const FeatureMatrix& X = flat.matrix;
  const Eigen::Index m = X.rows();

  PhantomTruth truth;
  truth.envelope = spec.envelope;
  truth.ortho_amplitude = spec.ortho_amplitude;
  truth.noise_sd = spec.noise_sd;
  truth.seed = spec.seed;
  truth.index_map = X.index_map;
  truth.envelope_values.resize(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    truth.envelope_values[r] = spec.envelope.evaluate(X.values.row(r).transpose());
  }

  truth.ortho_values = Eigen::VectorXd::Zero(m);
  if (spec.ortho_amplitude > 0.0) {
    std::vector<std::uint8_t> tumour_rows(static_cast<std::size_t>(m), 0);
    std::size_t tumour_count = 0;
    for (Eigen::Index r = 0; r < m; ++r) {
      if (mask.labels[X.index_map[static_cast<std::size_t>(r)]] ==
          static_cast<std::uint8_t>(Region::tumour)) {
        tumour_rows[static_cast<std::size_t>(r)] = 1;
        ++tumour_count;
      }
    }
    if (tumour_count == 0) {
      throw NumericError("make_target: no tumour voxels for the orthogonal signal");
    }
    Rng rng(derive_seed(spec.seed, 20));
    Eigen::VectorXd z(m);
    for (Eigen::Index r = 0; r < m; ++r) z[r] = rng.normal();
    Eigen::VectorXd u = orthogonalize_against(X, z, tumour_rows, ProjectorSpec{});
    const double rms = std::sqrt(u.squaredNorm() / static_cast<double>(tumour_count));
    truth.ortho_values = (spec.ortho_amplitude / rms) * u;
  }

  Eigen::VectorXd y = truth.envelope_values + truth.ortho_values;
  if (spec.noise_sd > 0.0) {
    Rng rng(derive_seed(spec.seed, 21));
    for (Eigen::Index r = 0; r < m; ++r) y[r] += rng.normal(0.0, spec.noise_sd);
  }

  for (const char* region : {"tumour", "prostate", "surrounding"}) {
    double sum = 0.0;
    std::size_t count = 0;
    const auto code = std::string(region) == "tumour"   ? Region::tumour
                      : std::string(region) == "prostate" ? Region::prostate
                                                           : Region::surrounding;
    for (Eigen::Index r = 0; r < m; ++r) {
      if (mask.labels[X.index_map[static_cast<std::size_t>(r)]] ==
          static_cast<std::uint8_t>(code)) {
        sum += truth.ortho_values[r] * truth.ortho_values[r];
        ++count;
      }
    }
    if (count > 0) truth.ortho_energy[region] = sum / static_cast<double>(count);
  }

  ChannelVolume target = scatter_to_volume(y, X.index_map, mask.grid, 0.0, "SUV");
  return {std::move(target), std::move(truth)};
}

PhantomDataset generate_phantom(const PhantomSpec& spec) {
  PhantomDataset out;
  out.mask = make_region_mask(spec);
  out.features = make_feature_fields(spec);
  auto [target, truth] = make_target(out.features, out.mask, spec);
  out.target = std::move(target);
  out.truth = std::move(truth);
  return out;
}

DcePhantom generate_dce_phantom(const DcePhantomSpec& spec) {
  if (spec.n_times < 2) throw ConfigError("DcePhantomSpec: n_times must be >= 2");
  if (!(spec.dt_s > 0.0)) throw ConfigError("DcePhantomSpec: dt_s must be > 0");

  DcePhantom out;
  out.grid = GridSpec{spec.dims};
  out.grid.validate();
  const std::size_t n = out.grid.voxel_count();

  // Ellipsoidal body of valid voxels.
  out.valid.assign(n, 0);
  const double cx = 0.5 * (spec.dims[0] - 1);
  const double cy = 0.5 * (spec.dims[1] - 1);
  const double cz = 0.5 * (spec.dims[2] - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = out.grid.coords(i);
    const double dx = (c[0] - cx) / (0.45 * spec.dims[0]);
    const double dy = (c[1] - cy) / (0.45 * spec.dims[1]);
    const double dz = (c[2] - cz) / (0.45 * spec.dims[2]);
    out.valid[i] = dx * dx + dy * dy + dz * dz <= 1.0 ? 1 : 0;
  }

  Rng kr(derive_seed(spec.seed, 31));
  Rng vr(derive_seed(spec.seed, 32));
  Rng pr(derive_seed(spec.seed, 33));
  auto kfield = blob_field(out.grid, out.valid, 4, kr);
  auto vfield = blob_field(out.grid, out.valid, 4, vr);
  auto pfield = blob_field(out.grid, out.valid, 4, pr);
  auto rescale = [&](std::vector<double>& f, double lo, double hi) {
    double fmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (out.valid[i]) fmax = std::max(fmax, f[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      f[i] = out.valid[i] ? lo + (hi - lo) * f[i] / fmax : 0.0;
    }
  };
  rescale(kfield, 0.0005, 0.008);  // 1/s
  rescale(vfield, 0.15, 0.5);
  rescale(pfield, 0.01, 0.08);

  out.voxel_params.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.voxel_params[i] = out.valid[i]
                              ? ToftsParams{kfield[i], vfield[i], pfield[i]}
                              : ToftsParams{0.0, 0.5, 0.0};
  }
  out.ktrans = ChannelVolume{"Ktrans", out.grid, kfield};
  out.ve = ChannelVolume{"ve", out.grid, vfield};
  out.vp = ChannelVolume{"vp", out.grid, pfield};

  out.times.t.resize(spec.n_times);
  for (int k = 0; k < spec.n_times; ++k) out.times.t[k] = k * spec.dt_s;
  out.aif = population_aif(out.times, spec.aif_delay_s, spec.aif_amplitude,
                           spec.aif_decay1, spec.aif_decay2);
  out.frames = generate_dce(out.voxel_params, out.grid, out.aif, out.times,
                            spec.noise_sd, derive_seed(spec.seed, 34));
  return out;
}

}  // namespace orthosep
