#pragma once

#include <Eigen/Core>
#include <cstdint>

namespace orthosep {

/// Gaussian Fourier feature lift phi(x) = [sin(2 pi B x), cos(2 pi B x)].
/// B is drawn Normal(0, bandwidth^2) once at construction and stays fixed for
/// the lifetime of the model; it is never optimized.
struct FourierEncoding {
  Eigen::MatrixXd B;  // F x N
  double bandwidth = 1.0;
  std::uint64_t seed = 0;

  Eigen::Index feature_count() const { return B.rows(); }
  Eigen::Index input_dim() const { return B.cols(); }
  Eigen::Index output_dim() const { return 2 * B.rows(); }

  static FourierEncoding create(int feature_count, int input_dim, double bandwidth,
                                std::uint64_t seed);

  /// Rows of X are input vectors; output is M x 2F, sin block then cos block.
  Eigen::MatrixXd encode(const Eigen::MatrixXd& X) const;
  Eigen::VectorXd encode_one(const Eigen::VectorXd& x) const;
};

}  // namespace orthosep
