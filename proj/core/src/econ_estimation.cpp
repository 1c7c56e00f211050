#include "dfx/econ/estimation.hpp"

#include <cmath>
#include <string>

#include "dfx/error.hpp"

namespace dfx::econ {

namespace {

// Subtracts the group means of one factor from every column of `m` in place
// and returns the largest mean removed. Sums run in row order.
double sweep_factor(Eigen::MatrixXd& m, const Factor& f, std::vector<double>& sums,
                    std::vector<double>& counts) {
  const auto cols = m.cols();
  const auto n = m.rows();
  sums.assign(static_cast<std::size_t>(f.levels) * static_cast<std::size_t>(cols), 0.0);
  counts.assign(f.levels, 0.0);
  for (Eigen::Index i = 0; i < n; ++i) counts[f.codes[static_cast<std::size_t>(i)]] += 1.0;
  for (Eigen::Index j = 0; j < cols; ++j) {
    double* col_sums = sums.data() + static_cast<std::size_t>(j) * f.levels;
    const double* col = m.col(j).data();
    for (Eigen::Index i = 0; i < n; ++i) col_sums[f.codes[static_cast<std::size_t>(i)]] += col[i];
  }
  double delta = 0.0;
  for (Eigen::Index j = 0; j < cols; ++j) {
    double* col_sums = sums.data() + static_cast<std::size_t>(j) * f.levels;
    for (std::uint32_t g = 0; g < f.levels; ++g) {
      col_sums[g] /= counts[g];
      delta = std::max(delta, std::abs(col_sums[g]));
    }
    double* col = m.col(j).data();
    for (Eigen::Index i = 0; i < n; ++i) col[i] -= col_sums[f.codes[static_cast<std::size_t>(i)]];
  }
  return delta;
}

}  // namespace

DemeanResult demean_two_way(const DesignMatrix& design, const DemeanOptions& options) {
  if (!(options.tol > 0.0)) fail(Errc::configuration, "demeaning tolerance must be positive");
  if (options.max_iter < 1) fail(Errc::configuration, "demeaning needs at least one sweep");
  if (design.absorb().empty()) return DemeanResult{design, 0, 0.0};

  Eigen::MatrixXd m(design.n(), design.k() + 1);
  m.col(0) = design.y();
  if (design.k() > 0) m.rightCols(design.k()) = design.x();

  std::vector<double> sums, counts;
  double delta = 0.0;
  int sweeps = 0;
  bool converged = false;
  while (sweeps < options.max_iter) {
    ++sweeps;
    delta = 0.0;
    for (const auto& f : design.absorb()) delta = std::max(delta, sweep_factor(m, f, sums, counts));
    if (delta < options.tol) {
      converged = true;
      break;
    }
  }
  if (!converged)
    fail(Errc::convergence, "fixed-effect demeaning did not converge in " +
                                std::to_string(options.max_iter) + " sweeps (last delta " +
                                std::to_string(delta) + ")");
  Eigen::VectorXd y = m.col(0);
  Eigen::MatrixXd x = m.rightCols(design.k());
  return DemeanResult{design.with_values(std::move(x), std::move(y)), sweeps, delta};
}

OlsResult fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                  const std::vector<std::string>& names) {
  const auto n = x.rows(), k = x.cols();
  if (y.size() != n) fail(Errc::dimension, "response length does not match design rows");
  if (k == 0) fail(Errc::singularity, "no regressors to estimate");
  if (n < k)
    fail(Errc::singularity, "fewer observations (" + std::to_string(n) + ") than regressors (" +
                                std::to_string(k) + ")");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < k) {
    std::string offending;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index j = qr.rank(); j < k; ++j) {
      const auto col = perm[j];
      if (!offending.empty()) offending += ", ";
      offending += static_cast<std::size_t>(col) < names.size() ? names[col]
                                                                : "column " + std::to_string(col);
    }
    fail(Errc::singularity, "design is rank deficient; collinear: " + offending);
  }
  OlsResult out;
  out.coefficients = qr.solve(y);
  out.residuals = y - x * out.coefficients;

  // (X'X)^-1 = P R^-1 R^-T P'
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::MatrixXd inner = r_inv * r_inv.transpose();
  const auto perm = qr.colsPermutation();
  out.bread = perm * inner * perm.transpose();
  out.bread = (out.bread + out.bread.transpose()) / 2.0;
  return out;
}

Eigen::MatrixXd cluster_scores(const Eigen::MatrixXd& x, const Eigen::VectorXd& residuals,
                               const Factor& clusters) {
  const auto n = x.rows(), k = x.cols();
  if (residuals.size() != n || static_cast<Eigen::Index>(clusters.codes.size()) != n)
    fail(Errc::dimension, "residuals or cluster keys do not match design rows");
  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(clusters.levels, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto g = clusters.codes[static_cast<std::size_t>(i)];
    scores.row(g) += x.row(i) * residuals[i];
  }
  return scores;
}

Eigen::MatrixXd cluster_robust_vcov(const Eigen::MatrixXd& x, const Eigen::VectorXd& residuals,
                                    const Factor& clusters, const Eigen::MatrixXd& bread,
                                    const VcovOptions& options) {
  const auto n = x.rows(), k = x.cols();
  const auto g = static_cast<Eigen::Index>(clusters.levels);
  if (g < 2) fail(Errc::inference, "cluster-robust inference needs at least 2 clusters");
  if (bread.rows() != k || bread.cols() != k) fail(Errc::dimension, "bread has the wrong shape");
  const Eigen::MatrixXd scores = cluster_scores(x, residuals, clusters);
  const Eigen::MatrixXd meat = scores.transpose() * scores;
  Eigen::MatrixXd v = bread * meat * bread;
  if (options.small_sample) {
    const auto resid_dof =
        static_cast<double>(n) - static_cast<double>(k) - static_cast<double>(options.absorbed_dof);
    if (!(resid_dof > 0.0))
      fail(Errc::inference, "no residual degrees of freedom for the small-sample correction");
    const double gd = static_cast<double>(g);
    v *= (gd / (gd - 1.0)) * ((static_cast<double>(n) - 1.0) / resid_dof);
  }
  return (v + v.transpose()) / 2.0;
}

Eigen::MatrixXd cluster_robust_vcov(const Eigen::MatrixXd& x, const Eigen::VectorXd& residuals,
                                    const Factor& clusters, const VcovOptions& options) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
  const auto k = x.cols();
  if (x.rows() < k) fail(Errc::singularity, "fewer observations than regressors");
  const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::MatrixXd bread = r_inv * r_inv.transpose();
  return cluster_robust_vcov(x, residuals, clusters, (bread + bread.transpose()) / 2.0, options);
}

}  // namespace dfx::econ
