// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Test-time attractor strategies and the end-to-end separation pipeline.

#ifndef DANET_INFERENCE_H_
#define DANET_INFERENCE_H_

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "danet/adanet.h"
#include "danet/attractor.h"
#include "danet/dsp.h"
#include "danet/embed_net.h"
#include "danet/masks.h"

namespace danet::inference {

using nn::Matrix;

enum class ModelType { kDanet, kAdanet };

ModelType parse_model_type(const std::string& name);
std::string to_string(ModelType type);

// Sigmoid for DANet, whose test-time attractors come from k-means; softmax
// for ADANet.
attractor::MaskNonlinearity default_nonlinearity(ModelType type);

// True for DANet, whose embeddings carry a large per-frequency offset;
// false for ADANet.
bool default_kmeans_centering(ModelType type);

struct ModelConfig {
  ModelType type = ModelType::kDanet;
  nn::EmbedNetConfig net;
  dsp::StftConfig stft;
  int num_anchors = 0;  // adanet only
  int slots = 2;        // adanet output count
  attractor::MaskNonlinearity nonlinearity =
      attractor::MaskNonlinearity::kSoftmax;
  double keep_fraction = 0.9;
  double log_floor = 1e-8;

  bool operator==(const ModelConfig&) const = default;
};

struct Model {
  ModelConfig config;
  nn::ParamStore params;
  std::optional<attractor::AttractorSet> fixed_attractors;
};

// Standardized log-magnitude network input for a spectrogram.
Matrix input_features(const dsp::MagnitudeSpectrogram& mag, double log_floor);

struct KMeansResult {
  Matrix centers;           // C x K
  std::vector<int> labels;  // one per bin, all bins
  double inertia = 0.0;     // over the fitted (retained) bins
  int iterations = 0;
  std::vector<double> inertia_history;
};

// Lloyd's algorithm with k-means++ seeding on the embedding columns where
// w = 1; the remaining bins are labelled with their nearest center.
KMeansResult kmeans(const Matrix& embeddings, int num_clusters,
                    const Eigen::RowVectorXd& w, std::uint64_t seed);

// Aligns each set to the running mean by the cheapest row permutation,
// then averages.
attractor::AttractorSet fixed_attractors(
    const std::vector<attractor::AttractorSet>& sets);

// Subtracts from every embedding the mean embedding of its frequency row,
// taken over all frames of the utterance. Columns are frequency-major.
Matrix center_frequencies(const Matrix& embeddings, int freq_bins);

struct KMeansStrategy {
  std::uint64_t seed = 0;
  // Cluster frequency-centered embeddings; the attractors are then the
  // threshold-weighted means of the raw embeddings in each cluster.
  bool center_frequencies = true;
};
struct FixedStrategy {
  attractor::AttractorSet attractors;
};
struct AnchoredStrategy {};

using Strategy = std::variant<KMeansStrategy, FixedStrategy, AnchoredStrategy>;

struct Separation {
  std::vector<dsp::Waveform> sources;
  masks::MaskSet masks;
  attractor::AttractorSet attractors;
  Matrix embeddings;
  attractor::ThresholdVector threshold;
  dsp::ComplexSpectrogram mixture_spec;
};

Separation separate_detailed(const Model& model, const dsp::Waveform& mixture,
                             int num_sources, const Strategy& strategy);

// Output waveforms are zero-padded to the mixture length.
std::vector<dsp::Waveform> separate(const Model& model,
                                    const dsp::Waveform& mixture,
                                    int num_sources, const Strategy& strategy);

// Ideal-mask separation from the reference sources; the performance
// ceiling for a mask-based system.
std::vector<dsp::Waveform> oracle_separate(
    masks::IdealMask kind, const dsp::Waveform& mixture,
    const std::vector<dsp::Waveform>& sources, const dsp::StftConfig& stft);

struct PcaResult {
  Matrix projection;            // dims x FT
  Matrix components;            // dims x K, orthonormal rows
  Eigen::VectorXd mean;         // K
  Eigen::VectorXd variances;    // eigenvalue per component
  double total_variance = 0.0;  // trace of the covariance

  // Projects K x M points with the same centering and components.
  Matrix project(const Matrix& points) const;
};

// Principal components of the embedding columns by power iteration with
// deflation.
PcaResult pca_project(const Matrix& embeddings, int dims);

}  // namespace danet::inference

#endif  // DANET_INFERENCE_H_
