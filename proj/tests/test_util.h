// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DANET_TESTS_TEST_UTIL_H_
#define DANET_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>

#include "danet/embed_net.h"
#include "danet/random.h"

namespace danet::testing {

using nn::Matrix;

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols,
                            double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, lo, hi);
  return m;
}

inline Eigen::RowVectorXd random_row(Rng& rng, Eigen::Index n, double lo = 0.0,
                                     double hi = 1.0) {
  Eigen::RowVectorXd r(n);
  for (Eigen::Index i = 0; i < n; ++i) r(i) = uniform(rng, lo, hi);
  return r;
}

// Columns of a random non-negative matrix normalized to sum to one.
inline Matrix random_soft_assignment(Rng& rng, Eigen::Index c, Eigen::Index n) {
  Matrix y = random_matrix(rng, c, n, 0.05, 1.0);
  for (Eigen::Index j = 0; j < n; ++j) y.col(j) /= y.col(j).sum();
  return y;
}

inline double relative_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

struct GradCheck {
  long total = 0;
  long passed = 0;
  double worst = 0.0;
  std::string worst_name;

  double pass_fraction() const {
    return total == 0 ? 1.0 : static_cast<double>(passed) / total;
  }
};

// Central differences of `loss` around `params` for every coordinate named
// in `analytic`.
inline GradCheck check_gradients(
    const nn::ParamStore& params, const nn::Gradients& analytic,
    const std::function<double(const nn::ParamStore&)>& loss, double h = 1e-4,
    double tol = 1e-3) {
  GradCheck out;
  nn::ParamStore p = params;
  for (const auto& [name, g] : analytic) {
    Matrix& m = p.at(name);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double orig = m.data()[i];
      m.data()[i] = orig + h;
      const double up = loss(p);
      m.data()[i] = orig - h;
      const double down = loss(p);
      m.data()[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double err = relative_error(g.data()[i], numeric);
      ++out.total;
      if (err < tol) ++out.passed;
      if (err > out.worst) {
        out.worst = err;
        out.worst_name = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("danet_test_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace danet::testing

#endif  // DANET_TESTS_TEST_UTIL_H_
