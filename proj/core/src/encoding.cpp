#include "orthosep/encoding.hpp"

#include <cmath>

#include "orthosep/errors.hpp"
#include "orthosep/rng.hpp"

namespace orthosep {

FourierEncoding FourierEncoding::create(int feature_count, int input_dim,
                                        double bandwidth, std::uint64_t seed) {
  if (feature_count < 1 || input_dim < 1) {
    throw ConfigError("FourierEncoding: feature_count and input_dim must be >= 1");
  }
  if (!(bandwidth > 0.0)) throw ConfigError("FourierEncoding: bandwidth must be > 0");
  FourierEncoding enc;
  enc.bandwidth = bandwidth;
  enc.seed = seed;
  enc.B.resize(feature_count, input_dim);
  Rng rng(seed);
  for (Eigen::Index r = 0; r < enc.B.rows(); ++r) {
    for (Eigen::Index c = 0; c < enc.B.cols(); ++c) {
      enc.B(r, c) = rng.normal(0.0, bandwidth);
    }
  }
  return enc;
}

Eigen::MatrixXd FourierEncoding::encode(const Eigen::MatrixXd& X) const {
  if (X.cols() != B.cols()) throw ConfigError("fourier_encode: dimension mismatch");
  if (!X.allFinite()) throw NumericError("fourier_encode: non-finite input");
  const double two_pi = 2.0 * 3.14159265358979323846;
  Eigen::MatrixXd phase = two_pi * (X * B.transpose());  // M x F
  Eigen::MatrixXd out(X.rows(), 2 * B.rows());
  out.leftCols(B.rows()) = phase.array().sin();
  out.rightCols(B.rows()) = phase.array().cos();
  return out;
}

Eigen::VectorXd FourierEncoding::encode_one(const Eigen::VectorXd& x) const {
  return encode(x.transpose()).row(0);
}

}  // namespace orthosep
