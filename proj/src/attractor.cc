// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "danet/attractor.h"

#include <algorithm>
#include <cmath>
#include <vector>

namespace danet::attractor {

Eigen::Index ThresholdVector::kept() const {
  return static_cast<Eigen::Index>(w.sum());
}

MaskNonlinearity parse_nonlinearity(const std::string& name) {
  if (name == "softmax") return MaskNonlinearity::kSoftmax;
  if (name == "sigmoid") return MaskNonlinearity::kSigmoid;
  throw std::invalid_argument("unknown nonlinearity '" + name +
                              "' (expected softmax or sigmoid)");
}

std::string to_string(MaskNonlinearity nl) {
  return nl == MaskNonlinearity::kSoftmax ? "softmax" : "sigmoid";
}

ThresholdVector threshold_vector(const Eigen::RowVectorXd& mix_mag,
                                 double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
    throw std::invalid_argument("keep fraction must be in (0, 1]");
  const Eigen::Index n = mix_mag.size();
  ThresholdVector out;
  out.keep_fraction = keep_fraction;
  out.w = Eigen::RowVectorXd::Zero(n);
  if (n == 0) return out;
  std::vector<double> sorted(mix_mag.data(), mix_mag.data() + n);
  // The small offset keeps products like 0.1 * 10 = 0.99999... on the
  // intended index.
  auto index = static_cast<Eigen::Index>(
      std::floor((1.0 - keep_fraction) * static_cast<double>(n) + 1e-9));
  index = std::clamp<Eigen::Index>(index, 0, n - 1);
  std::nth_element(sorted.begin(), sorted.begin() + index, sorted.end());
  const double rho = sorted[static_cast<std::size_t>(index)];
  for (Eigen::Index j = 0; j < n; ++j) out.w(j) = mix_mag(j) >= rho ? 1.0 : 0.0;
  return out;
}

AttractorSet form_attractors(const Matrix& embeddings,
                             const masks::SpeakerAssignment& assignment,
                             const Eigen::RowVectorXd& w) {
  if (assignment.cols() != embeddings.cols() || w.size() != embeddings.cols())
    throw std::invalid_argument("form_attractors: bin counts disagree");
  const Matrix weighted = assignment.array().rowwise() * w.array();
  const Eigen::VectorXd mass = weighted.rowwise().sum();
  for (Eigen::Index i = 0; i < mass.size(); ++i)
    if (!(mass(i) > 0.0)) throw EmptySourceError();
  Matrix a = weighted * embeddings.transpose();
  return (a.array().colwise() / mass.array()).matrix();
}

Var form_attractors(const Var& embeddings, const Var& assignment,
                    const Eigen::RowVectorXd& w) {
  if (assignment.cols() != embeddings.cols() || w.size() != embeddings.cols())
    throw std::invalid_argument("form_attractors: bin counts disagree");
  Var weighted = nn::scale_columns(assignment, w);
  Var mass = nn::row_sums(weighted);
  for (Eigen::Index i = 0; i < mass.rows(); ++i)
    if (!(mass.value()(i, 0) > 0.0)) throw EmptySourceError();
  return nn::div_rows(nn::matmul_bt(weighted, embeddings), mass);
}

Matrix similarity_scores(const AttractorSet& attractors,
                         const Matrix& embeddings) {
  if (attractors.cols() != embeddings.rows())
    throw std::invalid_argument("similarity_scores: embedding dims differ");
  return attractors * embeddings;
}

Var similarity_scores(const Var& attractors, const Var& embeddings) {
  return nn::matmul(attractors, embeddings);
}

masks::MaskSet estimate_masks(const Matrix& scores, MaskNonlinearity nl) {
  if (scores.rows() < 1) throw std::invalid_argument("need C >= 1");
  if (nl == MaskNonlinearity::kSigmoid)
    return (1.0 / (1.0 + (-scores.array()).exp())).matrix();
  return nn::column_softmax(scores);
}

Var estimate_masks(const Var& scores, MaskNonlinearity nl) {
  if (scores.rows() < 1) throw std::invalid_argument("need C >= 1");
  return nl == MaskNonlinearity::kSigmoid ? nn::sigmoid(scores)
                                          : nn::softmax_cols(scores);
}

namespace {

void check_loss_shapes(const Eigen::RowVectorXd& x, const Matrix& target,
                       Eigen::Index est_rows, Eigen::Index est_cols) {
  if (target.rows() != est_rows || target.cols() != est_cols ||
      x.size() != est_cols || target.rows() < 1)
    throw std::invalid_argument("reconstruction_loss: shape mismatch");
}

}  // namespace

double reconstruction_loss(const Eigen::RowVectorXd& mix_mag,
                           const masks::MaskSet& target,
                           const masks::MaskSet& estimate) {
  check_loss_shapes(mix_mag, target, estimate.rows(), estimate.cols());
  const Matrix diff =
      (target - estimate).array().rowwise() * mix_mag.array();
  return diff.squaredNorm() / static_cast<double>(target.rows());
}

Var reconstruction_loss(const Eigen::RowVectorXd& mix_mag,
                        const masks::MaskSet& target, const Var& estimate) {
  check_loss_shapes(mix_mag, target, estimate.rows(), estimate.cols());
  Var diff = nn::sub(estimate.tape().constant(target), estimate);
  return nn::scale(nn::sum_squares(nn::scale_columns(diff, mix_mag)),
                   1.0 / static_cast<double>(target.rows()));
}

LossAndGrad danet_loss_and_grad(const nn::ParamStore& params,
                                const TrainExample& example,
                                const nn::EmbedNetConfig& cfg,
                                const DanetOptions& opts) {
  nn::Tape tape;
  Var v = nn::forward_embeddings(tape, params, example.features, cfg);
  const ThresholdVector w =
      threshold_vector(example.mix_mag, opts.keep_fraction);
  Var y = tape.constant(example.assignment);
  Var a = form_attractors(v, y, w.w);
  Var m = estimate_masks(similarity_scores(a, v), opts.nonlinearity);
  Var loss = reconstruction_loss(example.mix_mag, example.target, m);
  LossAndGrad out;
  out.loss = loss.value()(0, 0);
  out.attractors = a.value();
  out.grads = tape.backward(loss);
  return out;
}

double danet_train_step(nn::ParamStore& params, nn::AdamState& adam,
                        const TrainExample& example,
                        const nn::EmbedNetConfig& cfg,
                        const DanetOptions& opts) {
  LossAndGrad lg = danet_loss_and_grad(params, example, cfg, opts);
  nn::adam_step(params, lg.grads, adam);
  return lg.loss;
}

}  // namespace danet::attractor
