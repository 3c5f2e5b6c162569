// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "danet/embed_net.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "danet/random.h"

namespace danet::nn {

void EmbedNetConfig::validate() const {
  if (freq_bins < 1) throw std::invalid_argument("freq_bins must be >= 1");
  if (context < 0) throw std::invalid_argument("context must be >= 0");
  if (embed_dim < 1) throw std::invalid_argument("embed_dim must be >= 1");
  for (int h : hidden_sizes)
    if (h < 1) throw std::invalid_argument("hidden sizes must be >= 1");
}

const Matrix& ParamStore::at(const std::string& name) const {
  auto it = arrays.find(name);
  if (it == arrays.end())
    throw std::out_of_range("no parameter named '" + name + "'");
  return it->second;
}

Matrix& ParamStore::at(const std::string& name) {
  auto it = arrays.find(name);
  if (it == arrays.end())
    throw std::out_of_range("no parameter named '" + name + "'");
  return it->second;
}

std::size_t ParamStore::num_values() const {
  std::size_t n = 0;
  for (const auto& [name, m] : arrays) n += static_cast<std::size_t>(m.size());
  return n;
}

std::string weight_name(std::size_t layer) {
  return "layer" + std::to_string(layer) + ".weight";
}

std::string bias_name(std::size_t layer) {
  return "layer" + std::to_string(layer) + ".bias";
}

std::map<std::string, std::pair<Eigen::Index, Eigen::Index>> param_shapes(
    const EmbedNetConfig& cfg, int num_anchors) {
  cfg.validate();
  std::map<std::string, std::pair<Eigen::Index, Eigen::Index>> shapes;
  Eigen::Index in = cfg.input_size();
  std::size_t layer = 0;
  for (int h : cfg.hidden_sizes) {
    shapes[weight_name(layer)] = {h, in};
    shapes[bias_name(layer)] = {h, 1};
    in = h;
    ++layer;
  }
  const Eigen::Index out =
      static_cast<Eigen::Index>(cfg.embed_dim) * cfg.freq_bins;
  shapes[weight_name(layer)] = {out, in};
  shapes[bias_name(layer)] = {out, 1};
  if (num_anchors > 0) shapes[kAnchorsParam] = {num_anchors, cfg.embed_dim};
  return shapes;
}

ParamStore init_params(const EmbedNetConfig& cfg, std::uint64_t seed,
                       int num_anchors) {
  ParamStore store;
  store.seed = seed;
  // Each array gets its own stream so adding anchors leaves the network
  // initialization unchanged.
  for (const auto& [name, shape] : param_shapes(cfg, num_anchors)) {
    Rng rng(derive_seed(seed, name));
    Matrix m(shape.first, shape.second);
    const bool is_bias = name.size() > 5 && name.ends_with(".bias");
    const double range = name == kAnchorsParam ? 1.0 : 0.05;
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        m(i, j) = is_bias ? 0.0 : uniform(rng, -range, range);
    store.arrays.emplace(name, std::move(m));
  }
  return store;
}

Matrix standardize(const Matrix& features) {
  if (features.size() == 0) return features;
  const double mean = features.mean();
  const double var =
      (features.array() - mean).square().sum() /
      static_cast<double>(features.size());
  const double sd = std::sqrt(var);
  if (sd < 1e-12) return Matrix::Zero(features.rows(), features.cols());
  return ((features.array() - mean) / sd).matrix();
}

Matrix stack_context(const Matrix& features, int context) {
  const Eigen::Index f = features.rows();
  const Eigen::Index t_len = features.cols();
  const Eigen::Index width = 2 * context + 1;
  Matrix out(width * f, t_len);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    for (Eigen::Index k = 0; k < width; ++k) {
      Eigen::Index src = t + k - context;
      src = std::clamp<Eigen::Index>(src, 0, t_len - 1);
      out.block(k * f, t, f, 1) = features.col(src);
    }
  }
  return out;
}

Var forward_embeddings(Tape& tape, const ParamStore& params,
                       const Matrix& features, const EmbedNetConfig& cfg) {
  cfg.validate();
  if (features.rows() != cfg.freq_bins)
    throw std::invalid_argument("features have " +
                                std::to_string(features.rows()) +
                                " bins, network expects " +
                                std::to_string(cfg.freq_bins));
  if (features.cols() < 1) throw std::invalid_argument("need T >= 1 frames");
  Var h = tape.constant(stack_context(features, cfg.context));
  const std::size_t layers = cfg.hidden_sizes.size();
  for (std::size_t l = 0; l <= layers; ++l) {
    Var w = tape.parameter(weight_name(l), params.at(weight_name(l)));
    Var b = tape.parameter(bias_name(l), params.at(bias_name(l)));
    h = add_bias(matmul(w, h), b);
    if (l < layers) h = tanh(h);
  }
  return reshape(h, cfg.embed_dim, h.value().size() / cfg.embed_dim);
}

Matrix embed(const ParamStore& params, const Matrix& features,
             const EmbedNetConfig& cfg) {
  Tape tape;
  return forward_embeddings(tape, params, features, cfg).value();
}

}  // namespace danet::nn
