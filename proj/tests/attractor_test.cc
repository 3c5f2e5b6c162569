// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "danet/attractor.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "danet/adam.h"
#include "danet/masks.h"
#include "doctest.h"
#include "oracles.h"
#include "test_util.h"

namespace danet {
namespace {

using nn::Matrix;

TEST_CASE("threshold vector examples") {
  Eigen::RowVectorXd mags(10);
  mags << 4, 7, 1, 9, 2, 10, 3, 5, 8, 6;
  const attractor::ThresholdVector t = attractor::threshold_vector(mags, 0.9);
  CHECK(t.kept() == 9);
  CHECK(t.w(2) == 0.0);
  CHECK(attractor::threshold_vector(mags, 1.0).kept() == 10);
  CHECK(attractor::threshold_vector(Eigen::RowVectorXd::Constant(7, 0.3), 0.5)
            .kept() == 7);
  CHECK_THROWS(attractor::threshold_vector(mags, 0.0));
  CHECK_THROWS(attractor::threshold_vector(mags, 1.1));
}

TEST_CASE("threshold vector matches a sorted-list oracle") {
  Rng rng(51);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(uniform_index(rng, 300));
    const double q = uniform(rng, 0.05, 1.0);
    const Eigen::RowVectorXd m = testing::random_row(rng, n);
    std::vector<double> sorted(m.data(), m.data() + n);
    std::sort(sorted.begin(), sorted.end());
    const auto idx = std::min<std::size_t>(
        static_cast<std::size_t>(n) - 1,
        static_cast<std::size_t>(std::floor((1.0 - q) * static_cast<double>(n))));
    const double rho = sorted[idx];
    const attractor::ThresholdVector t = attractor::threshold_vector(m, q);
    for (Eigen::Index j = 0; j < n; ++j) CHECK(t.w(j) == (m(j) >= rho ? 1.0 : 0.0));
    CHECK(static_cast<double>(t.kept()) >= q * static_cast<double>(n) - 1.0);
  }
}

TEST_CASE("form attractors examples") {
  Matrix v(2, 4);
  v << 1, 1, 1, 1, 2, 2, 2, 2;
  Matrix y = Matrix::Zero(2, 4);
  y.row(0).setOnes();
  y(1, 2) = 1.0;
  const Matrix a =
      attractor::form_attractors(v, y, Eigen::RowVectorXd::Ones(4));
  CHECK(a.row(0) == (Eigen::RowVector2d(1, 2)));

  Matrix v2(1, 4);
  v2 << 1, 3, 5, 7;
  Matrix hard(2, 4);
  hard << 1, 1, 0, 0, 0, 0, 1, 1;
  const Matrix a2 =
      attractor::form_attractors(v2, hard, Eigen::RowVectorXd::Ones(4));
  CHECK(a2(0, 0) == 2.0);
  CHECK(a2(1, 0) == 6.0);

  Eigen::RowVectorXd w(4);
  w << 1, 1, 0, 0;
  CHECK_THROWS_WITH(attractor::form_attractors(v2, hard, w),
                    doctest::Contains("empty source under threshold"));
  CHECK_THROWS_AS(attractor::form_attractors(v2, hard, w),
                  attractor::EmptySourceError);
}

TEST_CASE("form attractors matches a loop oracle and is bin-order invariant") {
  Rng rng(52);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index k = 1 + uniform_index(rng, 8);
    const Eigen::Index c = 1 + uniform_index(rng, 3);
    const Eigen::Index n = 10 + uniform_index(rng, 191);
    const Matrix v = testing::random_matrix(rng, k, n);
    const Matrix y = testing::random_soft_assignment(rng, c, n);
    Eigen::RowVectorXd w = Eigen::RowVectorXd::Ones(n);
    for (Eigen::Index j = 0; j < n; ++j)
      if (uniform01(rng) < 0.3) w(j) = 0.0;
    w(0) = 1.0;
    const Matrix a = attractor::form_attractors(v, y, w);
    CHECK((a - oracle::form_attractors(v, y, w)).cwiseAbs().maxCoeff() < 1e-10);

    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    shuffle(perm, rng);
    Matrix vp(k, n), yp(c, n);
    Eigen::RowVectorXd wp(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      vp.col(j) = v.col(perm[j]);
      yp.col(j) = y.col(perm[j]);
      wp(j) = w(perm[j]);
    }
    CHECK((attractor::form_attractors(vp, yp, wp) - a).cwiseAbs().maxCoeff() <
          1e-12);
  }
}

TEST_CASE("one-hot attractor lies in the source's bounding box") {
  Rng rng(53);
  const Matrix v = testing::random_matrix(rng, 3, 40);
  Matrix y = Matrix::Zero(1, 40);
  for (int j = 0; j < 40; j += 3) y(0, j) = 1.0;
  const Matrix a = attractor::form_attractors(v, y, Eigen::RowVectorXd::Ones(40));
  for (Eigen::Index k = 0; k < 3; ++k) {
    double lo = 1e9, hi = -1e9;
    for (int j = 0; j < 40; j += 3) {
      lo = std::min(lo, v(k, j));
      hi = std::max(hi, v(k, j));
    }
    CHECK(a(0, k) >= lo);
    CHECK(a(0, k) <= hi);
  }
}

TEST_CASE("similarity scores") {
  Rng rng(54);
  const Matrix v = testing::random_matrix(rng, 5, 30);
  Matrix basis = Matrix::Zero(1, 5);
  basis(0, 3) = 1.0;
  CHECK(attractor::similarity_scores(basis, v) == v.row(3));
  CHECK(attractor::similarity_scores(Matrix::Zero(2, 5), v).isZero());
  const Matrix a = testing::random_matrix(rng, 3, 5);
  const Matrix d = attractor::similarity_scores(a, v);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 30; ++j) {
      double dot = 0.0;
      for (Eigen::Index k = 0; k < 5; ++k) dot += a(i, k) * v(k, j);
      CHECK(std::abs(d(i, j) - dot) < 1e-12);
    }
  CHECK_THROWS(attractor::similarity_scores(Matrix::Zero(2, 4), v));
}

TEST_CASE("mask nonlinearities") {
  Matrix d(2, 2);
  d << std::log(2.0), 1.0, 0.0, 1.0;
  const Matrix s = attractor::estimate_masks(d, attractor::MaskNonlinearity::kSoftmax);
  CHECK(s(0, 0) == doctest::Approx(2.0 / 3.0));
  CHECK(s(1, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(s(0, 1) == doctest::Approx(0.5));
  const Matrix g = attractor::estimate_masks(d, attractor::MaskNonlinearity::kSigmoid);
  CHECK(g(1, 0) == 0.5);
  CHECK(g(0, 1) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));

  Rng rng(55);
  const Matrix r = testing::random_matrix(rng, 3, 100, -30, 30);
  const Matrix rs = attractor::estimate_masks(r, attractor::MaskNonlinearity::kSoftmax);
  CHECK((rs.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);
  CHECK(attractor::parse_nonlinearity("sigmoid") ==
        attractor::MaskNonlinearity::kSigmoid);
  CHECK(attractor::to_string(attractor::MaskNonlinearity::kSoftmax) == "softmax");
  CHECK_THROWS(attractor::parse_nonlinearity("relu"));
}

TEST_CASE("reconstruction loss") {
  const Eigen::RowVectorXd x = Eigen::RowVectorXd::Ones(4);
  const Matrix t = Matrix::Zero(2, 4);
  CHECK(attractor::reconstruction_loss(x, t, t) == 0.0);
  CHECK(attractor::reconstruction_loss(x, t, Matrix::Constant(2, 4, 0.5)) ==
        doctest::Approx(1.0));
  CHECK_THROWS(attractor::reconstruction_loss(x, t, Matrix::Zero(2, 3)));

  // Gradient with respect to the estimate.
  Rng rng(56);
  const Eigen::RowVectorXd xr = testing::random_row(rng, 6);
  const Matrix tr = testing::random_matrix(rng, 2, 6, 0, 1);
  nn::ParamStore p;
  p.arrays["m"] = testing::random_matrix(rng, 2, 6, 0, 1);
  nn::Tape tape;
  nn::Var m = tape.parameter("m", p.at("m"));
  const nn::Gradients g = tape.backward(attractor::reconstruction_loss(xr, tr, m));
  const testing::GradCheck gc = testing::check_gradients(
      p, g,
      [&](const nn::ParamStore& q) {
        return attractor::reconstruction_loss(xr, tr, q.at("m"));
      },
      1e-5, 1e-6);
  CHECK(gc.passed == gc.total);
}

struct Fixture {
  nn::EmbedNetConfig cfg;
  attractor::TrainExample ex;
};

// Small random problem: F = 9 bins, T frames, C sources.
Fixture make_fixture(std::uint64_t seed, int c, int frames) {
  Fixture f;
  f.cfg.freq_bins = 9;
  f.cfg.context = 1;
  f.cfg.hidden_sizes = {8};
  f.cfg.embed_dim = 4;
  Rng rng(seed);
  const Eigen::Index ft = 9 * frames;
  const Matrix mags = testing::random_matrix(rng, c, ft, 0.0, 1.0);
  f.ex.mix_mag = mags.colwise().sum();
  f.ex.features = nn::standardize(
      f.ex.mix_mag.array().max(1e-8).log().matrix().reshaped(9, frames));
  f.ex.target = masks::wfm(mags);
  f.ex.assignment = masks::ibm(mags);
  return f;
}

TEST_CASE("full danet loss gradient matches finite differences") {
  for (auto nl : {attractor::MaskNonlinearity::kSoftmax,
                  attractor::MaskNonlinearity::kSigmoid}) {
    const Fixture f = make_fixture(57, 2, 6);
    nn::ParamStore p = nn::init_params(f.cfg, 58);
    Rng rng(59);
    for (auto& [name, m] : p.arrays)
      m = testing::random_matrix(rng, m.rows(), m.cols(), -0.5, 0.5);
    REQUIRE(p.num_values() <= 2000);
    attractor::DanetOptions opts;
    opts.nonlinearity = nl;
    const attractor::LossAndGrad lg =
        attractor::danet_loss_and_grad(p, f.ex, f.cfg, opts);
    const testing::GradCheck gc = testing::check_gradients(
        p, lg.grads,
        [&](const nn::ParamStore& q) {
          return attractor::danet_loss_and_grad(q, f.ex, f.cfg, opts).loss;
        });
    INFO("worst " << gc.worst << " at " << gc.worst_name);
    CHECK(gc.pass_fraction() >= 0.99);
  }
}

TEST_CASE("permuting assignment rows permutes the estimated masks") {
  const Fixture f = make_fixture(60, 3, 4);
  const nn::ParamStore p = nn::init_params(f.cfg, 61);
  const Matrix v = nn::embed(p, f.ex.features, f.cfg);
  const Eigen::RowVectorXd w = attractor::threshold_vector(f.ex.mix_mag, 0.9).w;
  auto masks_for = [&](const Matrix& y) {
    return attractor::estimate_masks(
        attractor::similarity_scores(attractor::form_attractors(v, y, w), v),
        attractor::MaskNonlinearity::kSoftmax);
  };
  const Matrix m = masks_for(f.ex.assignment);
  Matrix y2(3, f.ex.assignment.cols());
  y2 << f.ex.assignment.row(2), f.ex.assignment.row(0), f.ex.assignment.row(1);
  const Matrix m2 = masks_for(y2);
  CHECK((m2.row(0) - m.row(2)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((m2.row(1) - m.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((m2.row(2) - m.row(1)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("single source gives an all-ones softmax mask and zero loss") {
  Fixture f = make_fixture(62, 1, 4);
  f.ex.target = Matrix::Ones(1, f.ex.mix_mag.size());
  const nn::ParamStore p = nn::init_params(f.cfg, 63);
  const attractor::LossAndGrad lg =
      attractor::danet_loss_and_grad(p, f.ex, f.cfg, {});
  CHECK(lg.loss == 0.0);
}

// Mean of each window of 20 consecutive values.
std::vector<double> moving_average(const std::vector<double>& v, int n) {
  std::vector<double> out;
  for (std::size_t i = 0; i + n <= v.size(); i += n)
    out.push_back(std::accumulate(v.begin() + i, v.begin() + i + n, 0.0) / n);
  return out;
}

TEST_CASE("danet training reduces the loss over 200 steps") {
  const Fixture f = make_fixture(64, 2, 8);
  nn::ParamStore p = nn::init_params(f.cfg, 65);
  nn::AdamState adam;
  adam.lr = 1e-2;
  std::vector<double> losses;
  for (int i = 0; i < 200; ++i)
    losses.push_back(attractor::danet_train_step(p, adam, f.ex, f.cfg, {}));
  const std::vector<double> avg = moving_average(losses, 20);
  INFO("first " << avg.front() << " last " << avg.back());
  CHECK(avg.back() < 0.5 * avg.front());
  int rises = 0;
  for (std::size_t i = 1; i < avg.size(); ++i) rises += avg[i] > avg[i - 1];
  CHECK(rises <= 1);
}

}  // namespace
}  // namespace danet
