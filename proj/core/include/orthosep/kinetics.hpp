#pragma once

#include <cstdint>
#include <vector>

#include "orthosep/volume.hpp"

namespace orthosep {

/// Sample times in seconds, strictly increasing, starting at 0.
struct TimeGrid {
  std::vector<double> t;

  std::size_t size() const { return t.size(); }
  void validate() const;
};

/// Arterial input function sampled on a TimeGrid.
struct AIF {
  std::vector<double> cp;

  /// Checks cp >= 0 everywhere and cp(0) = 0.
  void validate() const;
};

/// One-compartment exchange parameters. ktrans in 1/s, ve and vp are
/// dimensionless fractions.
struct ToftsParams {
  double ktrans = 0.0;
  double ve = 0.5;
  double vp = 0.0;
};

/// Throws NumericError unless ktrans >= 0, ve in (0,1], vp in [0,1),
/// ve + vp <= 1.
void validate_params(const ToftsParams& p);

/// Tissue concentration
///   C(t) = vp*Cp(t) + ktrans * int_0^t Cp(tau) exp(-(ktrans/ve)(t-tau)) dtau,
/// with the convolution evaluated by trapezoidal quadrature on the grid
/// (O(n) exponential recursion, algebraically identical to the direct sum).
std::vector<double> tofts_forward(const ToftsParams& p, const AIF& aif,
                                  const TimeGrid& grid);

/// Bi-exponential population input:
///   Cp(t) = amplitude * (exp(-decay2*(t-delay)) - exp(-decay1*(t-delay)))
/// for t >= delay, else 0. Requires decay1 > decay2 > 0 and delay >= 0.
AIF population_aif(const TimeGrid& grid, double delay_s, double amplitude,
                   double decay1, double decay2);

struct ToftsFit {
  ToftsParams params;
  double offset = 0.0;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  bool degenerate = false;
};

/// Least-squares fit of (ktrans, ve, vp, offset) to a measured curve by
/// damped Gauss-Newton (Levenberg-Marquardt) with projection onto the
/// parameter bounds. Converges when the relative step < 1e-8, capped at 200
/// iterations; on divergence returns the best point found with
/// converged=false.
ToftsFit fit_tofts(const std::vector<double>& curve, const AIF& aif,
                   const TimeGrid& grid, const ToftsParams& init,
                   double init_offset = 0.0);

/// Per-voxel forward model plus i.i.d. Gaussian noise, seeded. voxel_params
/// must have one entry per grid voxel.
std::vector<ChannelVolume> generate_dce(const std::vector<ToftsParams>& voxel_params,
                                        const GridSpec& grid, const AIF& aif,
                                        const TimeGrid& tgrid, double noise_sd,
                                        std::uint64_t seed);

}  // namespace orthosep
