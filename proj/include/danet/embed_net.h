// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Context-window feed-forward embedding network.
//
// Frame t of the (standardized) log-magnitude features is concatenated
// with `context` neighbours on each side, pushed through tanh hidden
// layers, and projected to K values per frequency bin. The per-frame
// output column is laid out bin-major (K values of bin 0, then bin 1, ...)
// so that reinterpreting the (K*F) x T output as K x (F*T) puts bin (f, t)
// in column t * F + f, matching the flattening used everywhere else.

#ifndef DANET_EMBED_NET_H_
#define DANET_EMBED_NET_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "danet/tape.h"

namespace danet::nn {

struct EmbedNetConfig {
  int freq_bins = 129;
  int context = 2;
  std::vector<int> hidden_sizes{128, 128};
  int embed_dim = 20;

  int input_size() const { return (2 * context + 1) * freq_bins; }
  void validate() const;
  bool operator==(const EmbedNetConfig&) const = default;
};

struct ParamStore {
  std::map<std::string, Matrix> arrays;
  std::uint64_t seed = 0;

  const Matrix& at(const std::string& name) const;
  Matrix& at(const std::string& name);
  bool contains(const std::string& name) const {
    return arrays.count(name) != 0;
  }
  std::size_t num_values() const;
};

inline constexpr const char* kAnchorsParam = "anchors";

std::string weight_name(std::size_t layer);
std::string bias_name(std::size_t layer);

// Expected parameter shapes for a network (plus an N x K anchor array when
// num_anchors > 0).
std::map<std::string, std::pair<Eigen::Index, Eigen::Index>> param_shapes(
    const EmbedNetConfig& cfg, int num_anchors = 0);

// Weights uniform(-0.05, 0.05), biases zero, anchors uniform(-1, 1); all
// drawn deterministically from seed.
ParamStore init_params(const EmbedNetConfig& cfg, std::uint64_t seed,
                       int num_anchors = 0);

// Zero mean, unit variance over the whole utterance.
Matrix standardize(const Matrix& features);

// ((2*context+1)*F) x T input matrix; edge frames are replicated.
Matrix stack_context(const Matrix& features, int context);

// K x FT embeddings of F x T features, recorded on the tape. Parameters
// are registered on the tape under their ParamStore names.
Var forward_embeddings(Tape& tape, const ParamStore& params,
                       const Matrix& features, const EmbedNetConfig& cfg);

// Same computation without gradient bookkeeping.
Matrix embed(const ParamStore& params, const Matrix& features,
             const EmbedNetConfig& cfg);

}  // namespace danet::nn

#endif  // DANET_EMBED_NET_H_
