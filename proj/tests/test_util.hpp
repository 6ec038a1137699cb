#pragma once

#include "oracles.hpp"
#include "sfuda/core.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace testutil {

inline oracle::Rows to_rows(const sfuda::Matrix& m) {
  oracle::Rows out(static_cast<size_t>(m.rows()), std::vector<double>(static_cast<size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[size_t(i)][size_t(j)] = m(i, j);
  }
  return out;
}

inline sfuda::Matrix gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                              double sigma = 1.0) {
  std::normal_distribution<double> nd(0.0, sigma);
  sfuda::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = nd(rng);
  }
  return m;
}

/// Random labeled domain where every class has at least one sample.
inline sfuda::LabeledDomain random_domain(std::mt19937_64& rng, int n, int d, int c,
                                          double spread = 1.0) {
  sfuda::LabeledDomain dom{gaussian(rng, n, d, spread), std::vector<int>(size_t(n)), c};
  std::uniform_int_distribution<int> pick(0, c - 1);
  for (int i = 0; i < n; ++i) dom.labels[size_t(i)] = i < c ? i : pick(rng);
  std::shuffle(dom.labels.begin(), dom.labels.end(), rng);
  return dom;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("sfuda_" + tag + "_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
