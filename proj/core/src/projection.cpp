#include "orthosep/projection.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "orthosep/errors.hpp"

namespace orthosep {

namespace {

using MatrixLd = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using VectorLd = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

/// X' v with extended-precision accumulation. The epsilon-damped subspace is
/// ~sigma_max^2/eps below the data scale, so plain double accumulation here
/// would dominate the ridge identity error.
VectorLd transpose_times(const Eigen::MatrixXd& X, const Eigen::VectorXd& v) {
  const Eigen::Index n = X.cols();
  VectorLd t = VectorLd::Zero(n);
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const long double vr = v[r];
    for (Eigen::Index j = 0; j < n; ++j) {
      t[j] += static_cast<long double>(X(r, j)) * vr;
    }
  }
  return t;
}

/// Solves (gram + eps I) x = t with one step of iterative refinement.
VectorLd ridge_solve(const MatrixLd& gram, long double eps, const VectorLd& t) {
  MatrixLd A = gram;
  A.diagonal().array() += eps;
  Eigen::LDLT<MatrixLd> ldlt(A);
  VectorLd x = ldlt.solve(t);
  x += ldlt.solve(t - A * x);
  return x;
}

}  // namespace

void ProjectorSpec::validate() const {
  if (mode == ProjectorMode::ridge && !(epsilon > 0.0)) {
    throw ConfigError("ProjectorSpec: epsilon must be > 0");
  }
  if (mode == ProjectorMode::pinv && !(rcond > 0.0 && rcond < 1.0)) {
    throw ConfigError("ProjectorSpec: rcond must be in (0, 1)");
  }
}

GramFactorization gram_factorize(const Eigen::MatrixXd& X, const ProjectorSpec& spec) {
  spec.validate();
  if (X.rows() < X.cols()) {
    throw NumericError("gram_factorize: M < N (underdetermined feature matrix)");
  }
  if (!X.allFinite()) {
    throw NumericError("gram_factorize: non-finite entries");
  }

  // Thin SVD of the skinny X itself: the Gram eigenproblem would floor small
  // singular values at sqrt(eps)*sigma_max and break rank detection.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinV);

  const Eigen::Index n = X.cols();
  GramFactorization fact;
  fact.spec = spec;
  fact.V = svd.matrixV();
  fact.sigma = svd.singularValues();
  fact.filter.resize(n);
  const double sigma_max = n > 0 ? fact.sigma[0] : 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double s2 = fact.sigma[j] * fact.sigma[j];
    if (spec.mode == ProjectorMode::ridge) {
      fact.filter[j] = s2 / (s2 + spec.epsilon);
    } else {
      fact.filter[j] = fact.sigma[j] > spec.rcond * sigma_max ? 1.0 : 0.0;
    }
  }

  fact.gram.setZero(n, n);
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    for (Eigen::Index a = 0; a < n; ++a) {
      const long double xa = X(r, a);
      for (Eigen::Index b = a; b < n; ++b) {
        fact.gram(a, b) += xa * static_cast<long double>(X(r, b));
      }
    }
  }
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < a; ++b) fact.gram(a, b) = fact.gram(b, a);
  }
  return fact;
}

GramFactorization gram_factorize(const FeatureMatrix& X, const ProjectorSpec& spec) {
  X.validate();
  return gram_factorize(X.values, spec);
}

Eigen::VectorXd apply_gram_inverse(const GramFactorization& fact,
                                   const Eigen::VectorXd& v) {
  if (v.size() != fact.n()) {
    throw ConfigError("apply_gram_inverse: dimension mismatch");
  }
  if (fact.spec.mode == ProjectorMode::ridge) {
    const VectorLd x =
        ridge_solve(fact.gram, fact.spec.epsilon, v.cast<long double>());
    return x.cast<double>();
  }
  Eigen::VectorXd w = fact.V.transpose() * v;
  for (Eigen::Index j = 0; j < fact.n(); ++j) {
    const double s2 = fact.sigma[j] * fact.sigma[j];
    w[j] = fact.filter[j] > 0.0 ? w[j] / s2 : 0.0;
  }
  return fact.V * w;
}

Eigen::VectorXd project_parallel(const Eigen::MatrixXd& X,
                                 const GramFactorization& fact,
                                 const Eigen::VectorXd& e) {
  if (X.cols() != fact.n()) {
    throw ConfigError("project_parallel: factorization does not match X");
  }
  if (e.size() != X.rows()) {
    throw ConfigError("project_parallel: dimension mismatch");
  }
  if (fact.spec.mode == ProjectorMode::ridge) {
    const VectorLd t = transpose_times(X, e);
    const VectorLd x = ridge_solve(fact.gram, fact.spec.epsilon, t);
    return X * x.cast<double>();
  }
  Eigen::VectorXd w = fact.V.transpose() * (X.transpose() * e);
  for (Eigen::Index j = 0; j < fact.n(); ++j) {
    const double s2 = fact.sigma[j] * fact.sigma[j];
    w[j] = fact.filter[j] > 0.0 ? w[j] / s2 : 0.0;
  }
  return X * (fact.V * w);
}

ResidualDecomposition decompose_residual(const Eigen::MatrixXd& X,
                                         const GramFactorization& fact,
                                         const Eigen::VectorXd& e) {
  ResidualDecomposition out;
  out.e = e;
  out.r_par = project_parallel(X, fact, e);
  out.r_perp = e - out.r_par;
  return out;
}

int effective_rank(const GramFactorization& fact, double tol) {
  if (fact.sigma.size() == 0) return 0;
  const double cut = tol * fact.sigma[0];
  int rank = 0;
  for (Eigen::Index j = 0; j < fact.sigma.size(); ++j) {
    if (fact.sigma[j] > cut) ++rank;
  }
  return rank;
}

}  // namespace orthosep
