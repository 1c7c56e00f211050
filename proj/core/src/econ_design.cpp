#include "dfx/econ/design.hpp"

#include <algorithm>
#include <map>

#include "dfx/error.hpp"

namespace dfx::econ {

bool Factor::nested_in(const Factor& outer) const {
  if (outer.codes.size() != codes.size()) return false;
  std::vector<std::int64_t> owner(levels, -1);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    auto& o = owner[codes[i]];
    if (o < 0) o = outer.codes[i];
    else if (o != outer.codes[i]) return false;
  }
  return true;
}

Factor encode_factor(std::string name, const std::vector<std::string>& keys) {
  std::map<std::string, std::uint32_t> levels;
  for (const auto& k : keys) levels.emplace(k, 0);
  std::uint32_t next = 0;
  for (auto& [k, code] : levels) code = next++;
  Factor f;
  f.name = std::move(name);
  f.levels = next;
  f.codes.reserve(keys.size());
  for (const auto& k : keys) f.codes.push_back(levels.at(k));
  return f;
}

DesignMatrix::DesignMatrix(Eigen::MatrixXd x, std::vector<std::string> names, Eigen::VectorXd y,
                           Factor clusters, std::vector<Factor> absorb)
    : x_(std::move(x)),
      names_(std::move(names)),
      y_(std::move(y)),
      clusters_(std::move(clusters)),
      absorb_(std::move(absorb)) {
  const auto n = static_cast<std::size_t>(x_.rows());
  if (static_cast<std::size_t>(y_.size()) != n)
    fail(Errc::dimension, "response length does not match design rows");
  if (names_.size() != static_cast<std::size_t>(x_.cols()))
    fail(Errc::dimension, "column names do not match design columns");
  if (clusters_.codes.size() != n) fail(Errc::dimension, "cluster key length mismatch");
  for (const auto& f : absorb_)
    if (f.codes.size() != n) fail(Errc::dimension, "absorbed key '" + f.name + "' length mismatch");
}

DesignMatrix DesignMatrix::with_values(Eigen::MatrixXd x, Eigen::VectorXd y) const {
  if (x.rows() != x_.rows() || x.cols() != x_.cols() || y.size() != y_.size())
    fail(Errc::dimension, "replacement values change the design shape");
  return DesignMatrix(std::move(x), names_, std::move(y), clusters_, absorb_);
}

DesignMatrix DesignMatrix::select_columns(const std::vector<Eigen::Index>& keep) const {
  Eigen::MatrixXd x(x_.rows(), static_cast<Eigen::Index>(keep.size()));
  std::vector<std::string> names;
  for (std::size_t j = 0; j < keep.size(); ++j) {
    x.col(static_cast<Eigen::Index>(j)) = x_.col(keep[j]);
    names.push_back(names_.at(static_cast<std::size_t>(keep[j])));
  }
  return DesignMatrix(std::move(x), std::move(names), y_, clusters_, absorb_);
}

}  // namespace dfx::econ
