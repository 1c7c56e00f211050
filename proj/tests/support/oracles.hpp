#pragma once

// Independent reference computations used by the tests. Nothing here calls the
// estimators it is checking.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dfx/econ/design.hpp"
#include "dfx/model.hpp"

namespace dfx::oracle {

inline std::filesystem::path scratch_dir(const std::string& name) {
  const char* root = std::getenv("DFX_TEST_TMP");
  std::filesystem::path dir = root ? root : std::filesystem::temp_directory_path() / "dfx_tests";
  dir /= name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Panel {
  std::vector<std::string> participant;
  std::vector<std::string> image;
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

/// Unbalanced random panel; every participant and image appears at least once
/// and the bipartite graph is connected through participant 0.
inline Panel random_panel(std::mt19937_64& gen, int max_p = 12, int max_i = 12, int max_rows = 300,
                          int k = 2) {
  std::uniform_int_distribution<int> np(2, max_p), ni(2, max_i);
  const int P = np(gen), I = ni(gen);
  std::uniform_int_distribution<int> pick_p(0, P - 1), pick_i(0, I - 1);
  std::vector<std::pair<int, int>> cells;
  for (int i = 0; i < I; ++i) cells.emplace_back(0, i);
  for (int p = 1; p < P; ++p) cells.emplace_back(p, pick_i(gen));
  const int target = std::uniform_int_distribution<int>(static_cast<int>(cells.size()) + k + 5,
                                                        max_rows)(gen);
  while (static_cast<int>(cells.size()) < target) cells.emplace_back(pick_p(gen), pick_i(gen));

  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> alpha(P), gamma(I);
  for (auto& a : alpha) a = z(gen);
  for (auto& g : gamma) g = z(gen);
  Panel out;
  const auto n = static_cast<Eigen::Index>(cells.size());
  out.x.resize(n, k);
  out.y.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto [p, i] = cells[static_cast<std::size_t>(r)];
    out.participant.push_back("p" + std::to_string(p));
    out.image.push_back("i" + std::to_string(i));
    double y = alpha[p] + gamma[i] + z(gen);
    for (int c = 0; c < k; ++c) {
      out.x(r, c) = z(gen) + 0.5 * alpha[p] - 0.3 * gamma[i];
      y += (c + 1) * 0.7 * out.x(r, c);
    }
    out.y(r) = y;
  }
  return out;
}

/// OLS with explicit participant and image dummies (first image dropped),
/// solved by SVD. Returns the coefficients of the first x.cols() regressors.
inline Eigen::VectorXd dummy_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                 const std::vector<std::string>& participant,
                                 const std::vector<std::string>& image) {
  std::map<std::string, int> pl, il;
  for (const auto& p : participant) pl.emplace(p, 0);
  for (const auto& i : image) il.emplace(i, 0);
  int c = 0;
  for (auto& [key, v] : pl) v = c++;
  c = 0;
  for (auto& [key, v] : il) v = c++;
  const auto n = x.rows(), k = x.cols();
  const auto P = static_cast<Eigen::Index>(pl.size()), I = static_cast<Eigen::Index>(il.size());
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(n, k + P + I - 1);
  full.leftCols(k) = x;
  for (Eigen::Index r = 0; r < n; ++r) {
    full(r, k + pl[participant[static_cast<std::size_t>(r)]]) = 1.0;
    const int ic = il[image[static_cast<std::size_t>(r)]];
    if (ic > 0) full(r, k + P + ic - 1) = 1.0;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(full, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.solve(y).head(k);
}

/// Sandwich assembled term by term: bread from an explicit inverse, meat as the
/// sum over clusters of outer products of per-cluster score sums.
inline Eigen::MatrixXd brute_sandwich(const Eigen::MatrixXd& x, const Eigen::VectorXd& e,
                                      const std::vector<std::string>& cluster, bool small_sample,
                                      std::size_t absorbed_dof = 0) {
  const auto n = x.rows(), k = x.cols();
  Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index b = 0; b < k; ++b) xtx(a, b) += x(r, a) * x(r, b);
  const Eigen::MatrixXd bread = xtx.fullPivLu().inverse();
  std::map<std::string, Eigen::VectorXd> score;
  for (Eigen::Index r = 0; r < n; ++r) {
    auto [it, fresh] = score.try_emplace(cluster[static_cast<std::size_t>(r)],
                                         Eigen::VectorXd::Zero(k));
    for (Eigen::Index a = 0; a < k; ++a) it->second(a) += x(r, a) * e(r);
  }
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (const auto& [g, s] : score)
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index b = 0; b < k; ++b) meat(a, b) += s(a) * s(b);
  Eigen::MatrixXd v = bread * meat * bread;
  if (small_sample) {
    const double G = static_cast<double>(score.size());
    const double dn = static_cast<double>(n), dk = static_cast<double>(k);
    v *= (G / (G - 1.0)) * ((dn - 1.0) / (dn - dk - static_cast<double>(absorbed_dof)));
  }
  return v;
}

inline econ::Factor factor_of(const std::string& name, const std::vector<std::string>& keys) {
  return econ::encode_factor(name, keys);
}

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

/// Observation row with every moderator missing.
inline ObservationRow make_row(std::string participant, std::string image, std::uint32_t position,
                               int accuracy) {
  ObservationRow r;
  r.participant_key = std::move(participant);
  r.image_key = std::move(image);
  r.position = position;
  r.accuracy = accuracy;
  for (auto m : kModerators) r.moderators[std::string(m)] = std::nullopt;
  return r;
}

}  // namespace dfx::oracle
