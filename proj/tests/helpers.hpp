#ifndef TIMECSL_TESTS_HELPERS_HPP
#define TIMECSL_TESTS_HELPERS_HPP

#include <Eigen/Dense>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "oracles.hpp"
#include "timecsl/core.hpp"

namespace timecsl::testing {

inline Eigen::MatrixXd mat(const oracle::Rows& rows) {
  Eigen::MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(rows.at(0).size()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  return m;
}

inline oracle::Rows rows(const Eigen::MatrixXd& m) {
  oracle::Rows out(static_cast<std::size_t>(m.rows()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(r)].push_back(m(r, c));
  return out;
}

inline TimeSeries series(const std::string& id, const std::vector<double>& v) {
  return {id, mat({v}), std::nullopt};
}

inline Eigen::MatrixXd random_matrix(Index r, Index c, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  Eigen::MatrixXd m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = g(rng);
  return m;
}

// Fresh scratch directory per call.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static int counter = 0;
  auto dir = std::filesystem::temp_directory_path() /
             ("timecsl_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace timecsl::testing

#endif  // TIMECSL_TESTS_HELPERS_HPP
