#include "orthosep/kinetics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "orthosep/errors.hpp"
#include "orthosep/rng.hpp"

namespace orthosep {

void TimeGrid::validate() const {
  if (t.size() < 2) throw ConfigError("TimeGrid: need >= 2 samples");
  if (t.front() != 0.0) throw ConfigError("TimeGrid: first sample must be 0");
  for (std::size_t k = 1; k < t.size(); ++k) {
    if (!(t[k] > t[k - 1])) throw ConfigError("TimeGrid: non-monotone time vector");
  }
}

void AIF::validate() const {
  if (cp.empty()) throw ConfigError("AIF: empty");
  if (cp.front() != 0.0) throw NumericError("AIF: cp(0) must be 0");
  for (double v : cp) {
    if (!(v >= 0.0)) throw NumericError("AIF: cp must be non-negative");
  }
}

void validate_params(const ToftsParams& p) {
  if (!(p.ktrans >= 0.0)) throw NumericError("ToftsParams: ktrans must be >= 0");
  if (!(p.ve > 0.0 && p.ve <= 1.0)) throw NumericError("ToftsParams: ve outside (0,1]");
  if (!(p.vp >= 0.0 && p.vp < 1.0)) throw NumericError("ToftsParams: vp outside [0,1)");
  if (p.ve + p.vp > 1.0) throw NumericError("ToftsParams: ve + vp > 1");
}

std::vector<double> tofts_forward(const ToftsParams& p, const AIF& aif,
                                  const TimeGrid& grid) {
  grid.validate();
  if (aif.cp.size() != grid.size()) {
    throw ConfigError("tofts_forward: aif not on the time grid");
  }
  const std::size_t n = grid.size();
  std::vector<double> c(n, 0.0);
  if (p.ktrans == 0.0) {
    for (std::size_t i = 0; i < n; ++i) c[i] = p.vp * aif.cp[i];
    return c;
  }
  if (!(p.ve > 0.0)) {
    throw NumericError("tofts_forward: ve = 0 with ktrans > 0");
  }
  const double kep = p.ktrans / p.ve;
  // Trapezoid of Cp(tau)*exp(-kep (t_i - tau)): the running integral picks up
  // a factor exp(-kep dt) per step, so one pass suffices.
  double integral = 0.0;
  c[0] = p.vp * aif.cp[0];
  for (std::size_t i = 1; i < n; ++i) {
    const double dt = grid.t[i] - grid.t[i - 1];
    const double a = std::exp(-kep * dt);
    integral = a * integral + 0.5 * dt * (a * aif.cp[i - 1] + aif.cp[i]);
    c[i] = p.vp * aif.cp[i] + p.ktrans * integral;
  }
  return c;
}

AIF population_aif(const TimeGrid& grid, double delay_s, double amplitude,
                   double decay1, double decay2) {
  grid.validate();
  if (!(decay1 > decay2 && decay2 > 0.0)) {
    throw ConfigError("population_aif: requires decay1 > decay2 > 0");
  }
  if (delay_s < 0.0) throw ConfigError("population_aif: delay must be >= 0");
  AIF out;
  out.cp.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double tt = grid.t[k] - delay_s;
    out.cp[k] = tt >= 0.0
                    ? amplitude * (std::exp(-decay2 * tt) - std::exp(-decay1 * tt))
                    : 0.0;
  }
  out.validate();
  return out;
}

namespace {

// Fit parameters are scaled to O(1): phi = (ktrans/ktrans_scale, ve, vp, offset).
constexpr double kKtransScale = 0.01;
constexpr double kVeFloor = 1e-6;

ToftsParams params_from_phi(const Eigen::Vector4d& phi) {
  return ToftsParams{phi[0] * kKtransScale, phi[1], phi[2]};
}

Eigen::Vector4d project_bounds(Eigen::Vector4d phi) {
  phi[0] = std::clamp(phi[0], 0.0, 100.0);       // ktrans in [0, 1] 1/s
  phi[1] = std::clamp(phi[1], kVeFloor, 1.0);    // ve in (0, 1]
  phi[2] = std::clamp(phi[2], 0.0, 1.0 - 1e-9);  // vp in [0, 1)
  if (phi[1] + phi[2] > 1.0) phi[2] = 1.0 - phi[1];
  return phi;
}

struct Evaluated {
  Eigen::VectorXd residual;
  double sse = 0.0;
};

Evaluated evaluate(const Eigen::Vector4d& phi, const std::vector<double>& curve,
                   const AIF& aif, const TimeGrid& grid) {
  const auto model = tofts_forward(params_from_phi(phi), aif, grid);
  Evaluated out;
  out.residual.resize(static_cast<Eigen::Index>(curve.size()));
  for (std::size_t i = 0; i < curve.size(); ++i) {
    out.residual[static_cast<Eigen::Index>(i)] = model[i] + phi[3] - curve[i];
  }
  out.sse = out.residual.squaredNorm();
  return out;
}

struct LmResult {
  Eigen::Vector4d phi;
  double sse = 0.0;
  int iterations = 0;
  bool converged = false;
};

LmResult levenberg_marquardt(Eigen::Vector4d phi, const std::vector<double>& curve,
                             const AIF& aif, const TimeGrid& grid) {
  constexpr int kMaxIter = 200;
  constexpr double kStepTol = 1e-8;
  phi = project_bounds(phi);
  Evaluated cur = evaluate(phi, curve, aif, grid);
  double lambda = 1e-3;
  LmResult best{phi, cur.sse, 0, false};

  const Eigen::Index nt = cur.residual.size();
  Eigen::MatrixXd jac(nt, 4);
  for (int iter = 1; iter <= kMaxIter; ++iter) {
    // Central-difference Jacobian on the scaled parameters.
    for (int j = 0; j < 4; ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(phi[j]));
      Eigen::Vector4d lo = phi, hi = phi;
      lo[j] -= h;
      hi[j] += h;
      lo = project_bounds(lo);
      hi = project_bounds(hi);
      const double span = hi[j] - lo[j];
      if (span <= 0.0) {
        jac.col(j).setZero();
        continue;
      }
      const Evaluated el = evaluate(lo, curve, aif, grid);
      const Evaluated eh = evaluate(hi, curve, aif, grid);
      jac.col(j) = (eh.residual - el.residual) / span;
    }
    const Eigen::Matrix4d jtj = jac.transpose() * jac;
    const Eigen::Vector4d jtr = jac.transpose() * cur.residual;

    bool accepted = false;
    for (int retry = 0; retry < 24; ++retry) {
      Eigen::Matrix4d damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal();
      damped.diagonal().array() += 1e-14;
      const Eigen::Vector4d step = damped.ldlt().solve(-jtr);
      const Eigen::Vector4d cand = project_bounds(phi + step);
      const Evaluated ec = evaluate(cand, curve, aif, grid);
      if (ec.sse < cur.sse) {
        const double rel_step = (cand - phi).norm() / (phi.norm() + 1e-12);
        phi = cand;
        cur = ec;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (cur.sse < best.sse) best = {phi, cur.sse, iter, false};
        if (rel_step < kStepTol) {
          best = {phi, cur.sse, iter, true};
          return best;
        }
        break;
      }
      lambda *= 3.0;
      if (lambda > 1e14) break;
    }
    if (cur.sse < best.sse) best = {phi, cur.sse, iter, false};
    if (!accepted) {
      // No descent direction left; treat the current point as stationary.
      best.converged = true;
      best.iterations = iter;
      return best;
    }
  }
  best.iterations = kMaxIter;
  return best;
}

}  // namespace

ToftsFit fit_tofts(const std::vector<double>& curve, const AIF& aif,
                   const TimeGrid& grid, const ToftsParams& init,
                   double init_offset) {
  grid.validate();
  if (curve.size() != grid.size() || aif.cp.size() != grid.size()) {
    throw ConfigError("fit_tofts: curve/aif not on the time grid");
  }
  for (double v : curve) {
    if (!std::isfinite(v)) throw NumericError("fit_tofts: non-finite curve values");
  }

  double cp_max = 0.0;
  for (double v : aif.cp) cp_max = std::max(cp_max, std::abs(v));
  double y_max = 0.0, y_sum = 0.0;
  for (double v : curve) {
    y_max = std::max(y_max, std::abs(v));
    y_sum += v;
  }
  const double y_mean = y_sum / static_cast<double>(curve.size());

  ToftsFit out;
  if (cp_max == 0.0) {
    // No input signal: the kinetic parameters are unidentifiable.
    out.params = ToftsParams{0.0, init.ve > 0.0 ? init.ve : 0.5, 0.0};
    out.offset = y_mean;
    Eigen::VectorXd r(static_cast<Eigen::Index>(curve.size()));
    for (std::size_t i = 0; i < curve.size(); ++i) {
      r[static_cast<Eigen::Index>(i)] = y_mean - curve[i];
    }
    out.residual_norm = r.norm();
    out.degenerate = true;
    out.converged = true;
    return out;
  }

  std::vector<Eigen::Vector4d> starts;
  starts.emplace_back(init.ktrans / kKtransScale, init.ve, init.vp, init_offset);
  starts.emplace_back(0.1, 0.2, 0.02, y_mean);
  starts.emplace_back(0.5, 0.5, 0.10, 0.0);
  starts.emplace_back(0.05, 0.1, 0.01, 0.0);

  LmResult best;
  best.sse = std::numeric_limits<double>::infinity();
  const double exact_sse =
      std::pow(1e-10 * std::max(y_max, 1e-30), 2) * static_cast<double>(curve.size());
  for (std::size_t s = 0; s < starts.size(); ++s) {
    const LmResult r = levenberg_marquardt(starts[s], curve, aif, grid);
    if (r.sse < best.sse) best = r;
    if (best.sse <= exact_sse) break;  // already an essentially perfect fit
  }

  out.params = params_from_phi(best.phi);
  out.offset = best.phi[3];
  out.residual_norm = std::sqrt(best.sse);
  out.iterations = best.iterations;
  out.converged = best.converged;
  out.degenerate = false;
  return out;
}

std::vector<ChannelVolume> generate_dce(const std::vector<ToftsParams>& voxel_params,
                                        const GridSpec& grid, const AIF& aif,
                                        const TimeGrid& tgrid, double noise_sd,
                                        std::uint64_t seed) {
  grid.validate();
  tgrid.validate();
  const std::size_t n = grid.voxel_count();
  if (voxel_params.size() != n) {
    throw ConfigError("generate_dce: one parameter set per voxel required");
  }
  if (noise_sd < 0.0) throw ConfigError("generate_dce: noise_sd must be >= 0");

  std::vector<ChannelVolume> frames(tgrid.size());
  for (std::size_t k = 0; k < tgrid.size(); ++k) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "dce_%03zu", k);
    frames[k] = ChannelVolume{buf, grid, std::vector<double>(n, 0.0)};
  }

  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    validate_params(voxel_params[i]);
    const auto curve = tofts_forward(voxel_params[i], aif, tgrid);
    for (std::size_t k = 0; k < tgrid.size(); ++k) {
      const double noise = noise_sd > 0.0 ? rng.normal(0.0, noise_sd) : 0.0;
      frames[k].data[i] = curve[k] + noise;
    }
  }
  return frames;
}

}  // namespace orthosep
