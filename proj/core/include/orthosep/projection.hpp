#pragma once

#include <Eigen/Core>
#include <vector>

#include "orthosep/volume.hpp"

namespace orthosep {

enum class ProjectorMode {
  ridge,  // X (X'X + eps I)^-1 X'
  pinv,   // exact orthogonal projector onto col(X), truncated at rcond
};

struct ProjectorSpec {
  ProjectorMode mode = ProjectorMode::ridge;
  double epsilon = 1e-3;
  double rcond = 1e-10;

  void validate() const;
};

/// Spectral factorization of X: right singular vectors V, singular values
/// (descending), and the cached filter diagonal
///   ridge: d_j = sigma_j^2 / (sigma_j^2 + eps)
///   pinv:  d_j = 1[sigma_j > rcond * sigma_max].
/// The M x M projector is never materialized; applications go through three
/// skinny products. Ridge applications solve (X'X + eps I) x = v against an
/// extended-precision Gram with iterative refinement: the epsilon-damped
/// identities are verified at 1e-10 relative, which the SVD factors alone
/// cannot reach once sigma_max^2/eps grows past ~1e5.
struct GramFactorization {
  Eigen::MatrixXd V;       // N x N
  Eigen::VectorXd sigma;   // N, descending, >= 0
  Eigen::VectorXd filter;  // N, in [0, 1]
  ProjectorSpec spec;
  Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> gram;  // X'X

  Eigen::Index n() const { return sigma.size(); }
};

GramFactorization gram_factorize(const Eigen::MatrixXd& X, const ProjectorSpec& spec);
GramFactorization gram_factorize(const FeatureMatrix& X, const ProjectorSpec& spec);

/// Applies (X'X + eps I)^-1 (ridge) or pinv(X'X) (pinv) to an N-vector.
Eigen::VectorXd apply_gram_inverse(const GramFactorization& fact,
                                   const Eigen::VectorXd& v);

/// r_par = P e as X * gram_inverse * (X' e); cost O(MN).
Eigen::VectorXd project_parallel(const Eigen::MatrixXd& X,
                                 const GramFactorization& fact,
                                 const Eigen::VectorXd& e);

/// e split into the feature-subspace component and its complement.
struct ResidualDecomposition {
  Eigen::VectorXd e;
  Eigen::VectorXd r_par;
  Eigen::VectorXd r_perp;
  std::vector<std::size_t> index_map;  // empty when decomposing raw vectors
};

ResidualDecomposition decompose_residual(const Eigen::MatrixXd& X,
                                         const GramFactorization& fact,
                                         const Eigen::VectorXd& e);

/// Count of singular values above tol * sigma_max.
int effective_rank(const GramFactorization& fact, double tol);

}  // namespace orthosep
