// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "danet/adanet.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace danet::adanet {

std::vector<std::vector<int>> enumerate_subsets(int num_anchors,
                                                int num_sources) {
  if (num_sources < 1 || num_sources > num_anchors)
    throw std::invalid_argument("need 1 <= C <= N, got C=" +
                                std::to_string(num_sources) +
                                " N=" + std::to_string(num_anchors));
  std::vector<std::vector<int>> out;
  std::vector<int> idx(num_sources);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    out.push_back(idx);
    int i = num_sources - 1;
    while (i >= 0 && idx[i] == num_anchors - num_sources + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < num_sources; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

masks::SpeakerAssignment assignments_from_anchors(const Matrix& anchors,
                                                  const Matrix& embeddings) {
  if (anchors.cols() != embeddings.rows())
    throw std::invalid_argument("anchor and embedding dims differ");
  return attractor::estimate_masks(anchors * embeddings,
                                   attractor::MaskNonlinearity::kSoftmax);
}

Var assignments_from_anchors(const Var& anchors, const Var& embeddings) {
  return nn::softmax_cols(nn::matmul(anchors, embeddings));
}

namespace {

Matrix gather_rows(const Matrix& m, const std::vector<int>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k)
    out.row(static_cast<Eigen::Index>(k)) = m.row(rows[k]);
  return out;
}

double max_off_diagonal(const Matrix& s) {
  if (s.rows() < 2) return 0.0;
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    for (Eigen::Index j = 0; j < s.cols(); ++j)
      if (i != j) best = std::max(best, s(i, j));
  return best;
}

}  // namespace

SubsetSelection select_attractor_set(const Matrix& anchors,
                                     const Matrix& embeddings,
                                     const Eigen::RowVectorXd& w,
                                     int num_sources) {
  const auto subsets =
      enumerate_subsets(static_cast<int>(anchors.rows()), num_sources);
  SubsetSelection sel;
  sel.max_similarity.assign(subsets.size(),
                            std::numeric_limits<double>::infinity());
  if (anchors.cols() != embeddings.rows())
    throw std::invalid_argument("anchor and embedding dims differ");
  // Exponentials against the column max over all anchors are shared by
  // every subset; a subset only renormalizes its own rows.
  const Matrix shared = nn::column_softmax(anchors * embeddings);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < subsets.size(); ++p) {
    Matrix y = gather_rows(shared, subsets[p]);
    const Eigen::RowVectorXd den = y.colwise().sum();
    if (den.minCoeff() > 1e-200)
      y.array().rowwise() /= den.array();
    else
      y = assignments_from_anchors(gather_rows(anchors, subsets[p]),
                                   embeddings);
    attractor::AttractorSet a;
    try {
      a = attractor::form_attractors(embeddings, y, w);
    } catch (const attractor::EmptySourceError&) {
      continue;
    }
    const double s = max_off_diagonal(a * a.transpose());
    sel.max_similarity[p] = s;
    if (sel.subset_index < 0 || s < best) {
      best = s;
      sel.subset_index = static_cast<int>(p);
      sel.attractors = std::move(a);
    }
  }
  if (sel.subset_index < 0)
    throw attractor::EmptySourceError("every anchor subset has an empty source");
  sel.anchor_rows = subsets[static_cast<std::size_t>(sel.subset_index)];
  return sel;
}

PitResult pit_loss(const Eigen::RowVectorXd& mix_mag,
                   const masks::MaskSet& targets,
                   const masks::MaskSet& estimates) {
  if (targets.rows() != estimates.rows() || targets.cols() != estimates.cols() ||
      mix_mag.size() != targets.cols() || targets.rows() < 1)
    throw std::invalid_argument("pit_loss: shape mismatch");
  const Eigen::Index c = targets.rows();
  // cost(i, j): estimate i against target j.
  Matrix cost(c, c);
  for (Eigen::Index i = 0; i < c; ++i)
    for (Eigen::Index j = 0; j < c; ++j)
      cost(i, j) = ((targets.row(j) - estimates.row(i)).array() *
                    mix_mag.array())
                       .square()
                       .sum();
  std::vector<int> perm(static_cast<std::size_t>(c));
  std::iota(perm.begin(), perm.end(), 0);
  PitResult best;
  best.loss = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (Eigen::Index i = 0; i < c; ++i) total += cost(i, perm[i]);
    total /= static_cast<double>(c);
    if (total < best.loss) {
      best.loss = total;
      best.permutation = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

std::vector<int> detect_active_sources(std::span<const double> powers) {
  if (powers.empty()) throw std::invalid_argument("no outputs to inspect");
  const double p_max = *std::max_element(powers.begin(), powers.end());
  std::vector<int> active;
  for (std::size_t i = 0; i < powers.size(); ++i) {
    if (p_max <= 0.0) {
      active.push_back(static_cast<int>(i));
      continue;
    }
    const double drop_db = powers[i] > 0.0
                               ? 10.0 * std::log10(p_max / powers[i])
                               : std::numeric_limits<double>::infinity();
    if (!(drop_db > 20.0)) active.push_back(static_cast<int>(i));
  }
  return active;
}

std::vector<int> detect_active_sources(
    const std::vector<dsp::Waveform>& outputs) {
  std::vector<double> powers;
  powers.reserve(outputs.size());
  for (const auto& w : outputs) powers.push_back(dsp::power(w.samples));
  return detect_active_sources(powers);
}

masks::MaskSet pad_targets(const masks::MaskSet& targets, int slots) {
  if (targets.rows() > slots)
    throw std::invalid_argument("mixture has more sources (" +
                                std::to_string(targets.rows()) +
                                ") than output slots (" +
                                std::to_string(slots) + ")");
  masks::MaskSet out = masks::MaskSet::Zero(slots, targets.cols());
  out.topRows(targets.rows()) = targets;
  return out;
}

AdanetLossAndGrad adanet_loss_and_grad(const nn::ParamStore& params,
                                       const attractor::TrainExample& example,
                                       const nn::EmbedNetConfig& cfg,
                                       const attractor::DanetOptions& opts,
                                       int slots) {
  const Matrix& anchors = params.at(nn::kAnchorsParam);
  if (slots > anchors.rows())
    throw std::invalid_argument("more output slots than anchors");
  nn::Tape tape;
  Var v = nn::forward_embeddings(tape, params, example.features, cfg);
  const attractor::ThresholdVector w =
      attractor::threshold_vector(example.mix_mag, opts.keep_fraction);
  // The subset choice is discrete; only the winning subset is recorded.
  const SubsetSelection sel =
      select_attractor_set(anchors, v.value(), w.w, slots);

  Var b = tape.parameter(nn::kAnchorsParam, anchors);
  Var y = assignments_from_anchors(nn::select_rows(b, sel.anchor_rows), v);
  Var a = attractor::form_attractors(v, y, w.w);
  Var m = attractor::estimate_masks(attractor::similarity_scores(a, v),
                                    opts.nonlinearity);

  const masks::MaskSet targets = pad_targets(example.target, slots);
  const PitResult pit = pit_loss(example.mix_mag, targets, m.value());
  masks::MaskSet aligned(targets.rows(), targets.cols());
  for (int i = 0; i < slots; ++i) aligned.row(i) = targets.row(pit.permutation[i]);
  Var loss = attractor::reconstruction_loss(example.mix_mag, aligned, m);

  AdanetLossAndGrad out;
  out.loss = loss.value()(0, 0);
  out.attractors = a.value();
  out.subset_index = sel.subset_index;
  out.permutation = pit.permutation;
  out.grads = tape.backward(loss);
  return out;
}

double adanet_train_step(nn::ParamStore& params, nn::AdamState& adam,
                         const attractor::TrainExample& example,
                         const nn::EmbedNetConfig& cfg,
                         const attractor::DanetOptions& opts, int slots) {
  AdanetLossAndGrad lg =
      adanet_loss_and_grad(params, example, cfg, opts, slots);
  nn::adam_step(params, lg.grads, adam);
  return lg.loss;
}

}  // namespace danet::adanet
