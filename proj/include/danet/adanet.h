// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Anchored attractor estimation: trainable anchor points give soft speaker
// assignments for every C-subset of anchors, and the subset whose
// attractors are least similar to each other is used for the masks.

#ifndef DANET_ADANET_H_
#define DANET_ADANET_H_

#include <span>
#include <vector>

#include "danet/attractor.h"
#include "danet/dsp.h"

namespace danet::adanet {

using nn::Matrix;
using nn::Var;

// All C-element subsets of {0..N-1} in lexicographic order.
std::vector<std::vector<int>> enumerate_subsets(int num_anchors,
                                                int num_sources);

// Softmax over rows of L V (C x FT).
masks::SpeakerAssignment assignments_from_anchors(const Matrix& anchors,
                                                  const Matrix& embeddings);
Var assignments_from_anchors(const Var& anchors, const Var& embeddings);

struct SubsetSelection {
  int subset_index = -1;
  std::vector<int> anchor_rows;
  attractor::AttractorSet attractors;  // C x K
  // Largest off-diagonal entry of A_p A_p^T per subset; +inf for subsets
  // skipped because a source had no mass.
  std::vector<double> max_similarity;
};

// Evaluates every subset and returns the one with the smallest maximum
// in-set similarity (lowest index on ties). With C = 1 every subset scores
// 0 and the first is chosen.
SubsetSelection select_attractor_set(const Matrix& anchors,
                                     const Matrix& embeddings,
                                     const Eigen::RowVectorXd& w,
                                     int num_sources);

struct PitResult {
  double loss = 0.0;
  // Estimate i is scored against target permutation[i].
  std::vector<int> permutation;
};

// Minimum reconstruction loss over all target orderings; ties resolve to
// the lexicographically first permutation.
PitResult pit_loss(const Eigen::RowVectorXd& mix_mag,
                   const masks::MaskSet& targets,
                   const masks::MaskSet& estimates);

// Output i is dropped when 10 log10(P_max / P_i) > 20. At least one output
// is always kept.
std::vector<int> detect_active_sources(std::span<const double> powers);
std::vector<int> detect_active_sources(
    const std::vector<dsp::Waveform>& outputs);

// Targets padded with all-zero rows up to `slots`.
masks::MaskSet pad_targets(const masks::MaskSet& targets, int slots);

struct AdanetLossAndGrad : attractor::LossAndGrad {
  int subset_index = -1;
  std::vector<int> permutation;
};

// Embeddings -> anchor subset selection -> masks -> PIT loss, then
// backward through the selected subset. Gradients reach the network and
// the anchors.
AdanetLossAndGrad adanet_loss_and_grad(const nn::ParamStore& params,
                                       const attractor::TrainExample& example,
                                       const nn::EmbedNetConfig& cfg,
                                       const attractor::DanetOptions& opts,
                                       int slots);

double adanet_train_step(nn::ParamStore& params, nn::AdamState& adam,
                         const attractor::TrainExample& example,
                         const nn::EmbedNetConfig& cfg,
                         const attractor::DanetOptions& opts, int slots);

}  // namespace danet::adanet

#endif  // DANET_ADANET_H_
