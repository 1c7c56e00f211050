#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace dfx::econ {

/// Categorical key vector recoded to dense levels 0..levels-1, assigned in
/// sorted key order.
struct Factor {
  std::string name;
  std::vector<std::uint32_t> codes;
  std::uint32_t levels = 0;

  /// True when every level of this factor falls inside a single level of
  /// `outer`.
  bool nested_in(const Factor& outer) const;
};

Factor encode_factor(std::string name, const std::vector<std::string>& keys);

/// Regression inputs: response, named regressors, the clustering factor and
/// the factors whose fixed effects are absorbed. Shapes are fixed at
/// construction.
class DesignMatrix {
 public:
  DesignMatrix(Eigen::MatrixXd x, std::vector<std::string> names, Eigen::VectorXd y,
               Factor clusters, std::vector<Factor> absorb);

  Eigen::Index n() const noexcept { return x_.rows(); }
  Eigen::Index k() const noexcept { return x_.cols(); }
  const Eigen::MatrixXd& x() const noexcept { return x_; }
  const Eigen::VectorXd& y() const noexcept { return y_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const Factor& clusters() const noexcept { return clusters_; }
  std::uint32_t n_clusters() const noexcept { return clusters_.levels; }
  const std::vector<Factor>& absorb() const noexcept { return absorb_; }

  /// Same keys and names, new numeric content of identical shape.
  DesignMatrix with_values(Eigen::MatrixXd x, Eigen::VectorXd y) const;
  /// Keeps only the listed columns, in order.
  DesignMatrix select_columns(const std::vector<Eigen::Index>& keep) const;

 private:
  Eigen::MatrixXd x_;
  std::vector<std::string> names_;
  Eigen::VectorXd y_;
  Factor clusters_;
  std::vector<Factor> absorb_;
};

}  // namespace dfx::econ
