#pragma once

// Least-squares building blocks: fixed-effect absorption by alternating
// projections, QR-based OLS, and the cluster-robust sandwich.

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

#include "dfx/econ/design.hpp"

namespace dfx::econ {

struct DemeanOptions {
  double tol = 1e-10;
  int max_iter = 10000;
};

struct DemeanResult {
  DesignMatrix design;
  int sweeps = 0;
  double last_delta = 0.0;
};

/// Repeatedly subtracts group means of each absorbed factor from the response
/// and every regressor until the largest adjustment in a sweep drops below
/// `tol`. Throws Errc::convergence (with the last delta) after `max_iter`
/// sweeps.
DemeanResult demean_two_way(const DesignMatrix& design, const DemeanOptions& options = {});

struct OlsResult {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd residuals;
  /// (X'X)^-1 assembled from the triangular factor.
  Eigen::MatrixXd bread;
};

/// Householder QR with column pivoting. Rank deficiency throws
/// Errc::singularity naming the columns left outside the numerical rank.
OlsResult fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                  const std::vector<std::string>& names = {});

struct VcovOptions {
  /// Multiply by (G/(G-1)) * ((n-1)/(n-k-absorbed_dof)).
  bool small_sample = true;
  /// Fixed-effect parameters absorbed before the fit that are not nested
  /// within clusters.
  std::size_t absorbed_dof = 0;
};

/// (X'X)^-1 [sum_g (X_g' e_g)(X_g' e_g)'] (X'X)^-1, symmetrized. Needs at
/// least two clusters (Errc::inference).
Eigen::MatrixXd cluster_robust_vcov(const Eigen::MatrixXd& x, const Eigen::VectorXd& residuals,
                                    const Factor& clusters, const VcovOptions& options = {});
/// Same, reusing an already-computed bread.
Eigen::MatrixXd cluster_robust_vcov(const Eigen::MatrixXd& x, const Eigen::VectorXd& residuals,
                                    const Factor& clusters, const Eigen::MatrixXd& bread,
                                    const VcovOptions& options);

/// Per-cluster score sums X_g' e_g, one row per cluster level.
Eigen::MatrixXd cluster_scores(const Eigen::MatrixXd& x, const Eigen::VectorXd& residuals,
                               const Factor& clusters);

}  // namespace dfx::econ
