// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Attractor formation, similarity scoring, mask estimation and the
// reconstruction objective. Each operation comes as a plain function on
// matrices and as a tape version that records gradients.

#ifndef DANET_ATTRACTOR_H_
#define DANET_ATTRACTOR_H_

#include <stdexcept>
#include <string>

#include "danet/adam.h"
#include "danet/embed_net.h"
#include "danet/masks.h"
#include "danet/tape.h"

namespace danet::attractor {

using nn::Matrix;
using nn::Var;

// C x K, one attractor per row.
using AttractorSet = Matrix;

struct ThresholdVector {
  Eigen::RowVectorXd w;  // 1 x FT of {0, 1}
  double keep_fraction = 0.9;

  Eigen::Index kept() const;
};

enum class MaskNonlinearity { kSoftmax, kSigmoid };

MaskNonlinearity parse_nonlinearity(const std::string& name);
std::string to_string(MaskNonlinearity nl);

// Raised when a source has no weight left after thresholding.
class EmptySourceError : public std::runtime_error {
 public:
  explicit EmptySourceError(
      const std::string& what = "empty source under threshold")
      : std::runtime_error(what) {}
};

// rho is the value at index floor((1 - q) * FT) of the ascending sort;
// bins with magnitude >= rho are kept.
ThresholdVector threshold_vector(const Eigen::RowVectorXd& mix_mag,
                                 double keep_fraction);

// a_i = (y_i (.) w) V^T / sum(y_i (.) w).
AttractorSet form_attractors(const Matrix& embeddings,
                             const masks::SpeakerAssignment& assignment,
                             const Eigen::RowVectorXd& w);
Var form_attractors(const Var& embeddings, const Var& assignment,
                    const Eigen::RowVectorXd& w);

// d_i = a_i V: C x FT dot products, larger means closer.
Matrix similarity_scores(const AttractorSet& attractors,
                         const Matrix& embeddings);
Var similarity_scores(const Var& attractors, const Var& embeddings);

// Softmax across sources per bin, or elementwise logistic sigmoid.
masks::MaskSet estimate_masks(const Matrix& scores, MaskNonlinearity nl);
Var estimate_masks(const Var& scores, MaskNonlinearity nl);

// (1/C) sum_i || x (.) (m_i - m^_i) ||^2.
double reconstruction_loss(const Eigen::RowVectorXd& mix_mag,
                           const masks::MaskSet& target,
                           const masks::MaskSet& estimate);
Var reconstruction_loss(const Eigen::RowVectorXd& mix_mag,
                        const masks::MaskSet& target, const Var& estimate);

// One training utterance or chunk.
struct TrainExample {
  Matrix features;              // F x T standardized log-magnitude
  Eigen::RowVectorXd mix_mag;   // 1 x FT
  masks::MaskSet target;        // C x FT, WFM by default
  masks::SpeakerAssignment assignment;  // C x FT, IBM by default
};

struct DanetOptions {
  double keep_fraction = 0.9;
  MaskNonlinearity nonlinearity = MaskNonlinearity::kSoftmax;
};

struct LossAndGrad {
  double loss = 0.0;
  nn::Gradients grads;
  AttractorSet attractors;
};

// Embeddings -> threshold -> oracle-assignment attractors -> masks ->
// reconstruction loss, then backward.
LossAndGrad danet_loss_and_grad(const nn::ParamStore& params,
                                const TrainExample& example,
                                const nn::EmbedNetConfig& cfg,
                                const DanetOptions& opts);

// danet_loss_and_grad followed by an Adam update. Returns the loss.
double danet_train_step(nn::ParamStore& params, nn::AdamState& adam,
                        const TrainExample& example,
                        const nn::EmbedNetConfig& cfg,
                        const DanetOptions& opts);

}  // namespace danet::attractor

#endif  // DANET_ATTRACTOR_H_
