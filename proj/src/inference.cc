// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "danet/inference.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "danet/random.h"

namespace danet::inference {

ModelType parse_model_type(const std::string& name) {
  if (name == "danet") return ModelType::kDanet;
  if (name == "adanet") return ModelType::kAdanet;
  throw std::invalid_argument("unknown model '" + name +
                              "' (expected danet or adanet)");
}

std::string to_string(ModelType type) {
  return type == ModelType::kDanet ? "danet" : "adanet";
}

attractor::MaskNonlinearity default_nonlinearity(ModelType type) {
  return type == ModelType::kDanet ? attractor::MaskNonlinearity::kSigmoid
                                   : attractor::MaskNonlinearity::kSoftmax;
}

bool default_kmeans_centering(ModelType type) {
  return type == ModelType::kDanet;
}

Matrix input_features(const dsp::MagnitudeSpectrogram& mag, double log_floor) {
  return nn::standardize(dsp::log_magnitude(mag, log_floor));
}

namespace {

double sq_dist(const Matrix& points, Eigen::Index j, const Matrix& centers,
               Eigen::Index c) {
  return (points.col(j) - centers.row(c).transpose()).squaredNorm();
}

int nearest(const Matrix& points, Eigen::Index j, const Matrix& centers,
            double* dist) {
  int best = 0;
  double best_d = sq_dist(points, j, centers, 0);
  for (Eigen::Index c = 1; c < centers.rows(); ++c) {
    const double d = sq_dist(points, j, centers, c);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (dist != nullptr) *dist = best_d;
  return best;
}

}  // namespace

KMeansResult kmeans(const Matrix& embeddings, int num_clusters,
                    const Eigen::RowVectorXd& w, std::uint64_t seed) {
  if (num_clusters < 1) throw std::invalid_argument("need C >= 1 clusters");
  if (w.size() != embeddings.cols())
    throw std::invalid_argument("threshold length does not match embeddings");
  std::vector<Eigen::Index> fit;
  for (Eigen::Index j = 0; j < w.size(); ++j)
    if (w(j) > 0.5) fit.push_back(j);
  if (fit.size() < static_cast<std::size_t>(num_clusters))
    throw std::invalid_argument("fewer retained bins than clusters");

  const Eigen::Index k = embeddings.rows();
  const std::size_t n = fit.size();
  Rng rng(seed);
  Matrix centers(num_clusters, k);

  // k-means++ seeding.
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t first = uniform_index(rng, n);
  centers.row(0) = embeddings.col(fit[first]).transpose();
  for (int c = 1; c < num_clusters; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(embeddings, fit[i], centers, c - 1));
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double r = uniform01(rng) * total;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        r -= d2[i];
        if (r < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = uniform_index(rng, n);
    }
    centers.row(c) = embeddings.col(fit[pick]).transpose();
  }

  KMeansResult res;
  std::vector<int> assign(n, 0);
  std::vector<double> dist(n, 0.0);
  auto assign_all = [&]() {
    for (std::size_t i = 0; i < n; ++i)
      assign[i] = nearest(embeddings, fit[i], centers, &dist[i]);
  };
  auto reseed_empty = [&]() {
    for (int pass = 0; pass < num_clusters; ++pass) {
      std::vector<int> counts(num_clusters, 0);
      for (int a : assign) ++counts[a];
      auto empty = std::find(counts.begin(), counts.end(), 0);
      if (empty == counts.end()) return;
      const std::size_t far = static_cast<std::size_t>(
          std::max_element(dist.begin(), dist.end()) - dist.begin());
      centers.row(empty - counts.begin()) =
          embeddings.col(fit[far]).transpose();
      assign_all();
    }
  };

  constexpr int kMaxIterations = 100;
  constexpr double kRelTol = 1e-6;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < kMaxIterations; ++it) {
    assign_all();
    reseed_empty();
    const double inertia = std::accumulate(dist.begin(), dist.end(), 0.0);
    res.inertia_history.push_back(inertia);
    res.iterations = it + 1;
    if (inertia == 0.0 ||
        (std::isfinite(prev) && prev - inertia <= kRelTol * prev))
      break;
    prev = inertia;
    Matrix sums = Matrix::Zero(num_clusters, k);
    std::vector<int> counts(num_clusters, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(assign[i]) += embeddings.col(fit[i]).transpose();
      ++counts[assign[i]];
    }
    for (int c = 0; c < num_clusters; ++c)
      if (counts[c] > 0) centers.row(c) = sums.row(c) / counts[c];
  }
  // Centers may have moved after the last recorded assignment.
  assign_all();
  res.inertia = std::accumulate(dist.begin(), dist.end(), 0.0);
  if (res.inertia < res.inertia_history.back())
    res.inertia_history.push_back(res.inertia);
  res.centers = centers;
  res.labels.resize(static_cast<std::size_t>(embeddings.cols()));
  for (Eigen::Index j = 0; j < embeddings.cols(); ++j)
    res.labels[static_cast<std::size_t>(j)] =
        nearest(embeddings, j, centers, nullptr);
  return res;
}

attractor::AttractorSet fixed_attractors(
    const std::vector<attractor::AttractorSet>& sets) {
  if (sets.empty()) throw std::invalid_argument("no attractor sets to average");
  const Eigen::Index c = sets.front().rows();
  const Eigen::Index k = sets.front().cols();
  for (const auto& s : sets)
    if (s.rows() != c || s.cols() != k)
      throw std::invalid_argument("attractor sets have inconsistent shapes");
  if (c > 8)
    throw std::invalid_argument("permutation alignment supports C <= 8");

  Matrix sum = sets.front();
  std::vector<int> perm(static_cast<std::size_t>(c));
  for (std::size_t n = 1; n < sets.size(); ++n) {
    const Matrix mean = sum / static_cast<double>(n);
    const Matrix& s = sets[n];
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best_perm = perm;
    double best = std::numeric_limits<double>::infinity();
    do {
      double d = 0.0;
      for (Eigen::Index i = 0; i < c; ++i)
        d += (mean.row(i) - s.row(perm[i])).squaredNorm();
      if (d < best) {
        best = d;
        best_perm = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    for (Eigen::Index i = 0; i < c; ++i) sum.row(i) += s.row(best_perm[i]);
  }
  return sum / static_cast<double>(sets.size());
}

Matrix center_frequencies(const Matrix& embeddings, int freq_bins) {
  if (freq_bins < 1 || embeddings.cols() % freq_bins != 0)
    throw std::invalid_argument("embedding columns are not a multiple of F");
  const Eigen::Index frames = embeddings.cols() / freq_bins;
  Matrix mean = Matrix::Zero(embeddings.rows(), freq_bins);
  for (Eigen::Index t = 0; t < frames; ++t)
    mean += embeddings.middleCols(t * freq_bins, freq_bins);
  mean /= static_cast<double>(frames);
  Matrix out = embeddings;
  for (Eigen::Index t = 0; t < frames; ++t)
    out.middleCols(t * freq_bins, freq_bins) -= mean;
  return out;
}

Separation separate_detailed(const Model& model, const dsp::Waveform& mixture,
                             int num_sources, const Strategy& strategy) {
  if (num_sources < 1) throw std::invalid_argument("need C >= 1");
  const ModelConfig& cfg = model.config;
  Separation out;
  out.mixture_spec = dsp::stft(mixture, cfg.stft);
  const dsp::MagnitudeSpectrogram mag = dsp::magnitude(out.mixture_spec);
  out.embeddings =
      nn::embed(model.params, input_features(mag, cfg.log_floor), cfg.net);
  out.threshold = attractor::threshold_vector(mag.flatten(), cfg.keep_fraction);

  if (const auto* km = std::get_if<KMeansStrategy>(&strategy)) {
    if (km->center_frequencies) {
      const KMeansResult res =
          kmeans(center_frequencies(out.embeddings, cfg.stft.num_bins()),
                 num_sources, out.threshold.w, km->seed);
      masks::SpeakerAssignment y =
          masks::SpeakerAssignment::Zero(num_sources, out.embeddings.cols());
      for (std::size_t j = 0; j < res.labels.size(); ++j)
        y(res.labels[j], static_cast<Eigen::Index>(j)) = 1.0;
      out.attractors =
          attractor::form_attractors(out.embeddings, y, out.threshold.w);
    } else {
      out.attractors =
          kmeans(out.embeddings, num_sources, out.threshold.w, km->seed)
              .centers;
    }
  } else if (const auto* fx = std::get_if<FixedStrategy>(&strategy)) {
    if (fx->attractors.rows() != num_sources)
      throw std::invalid_argument(
          "fixed attractor table has " +
          std::to_string(fx->attractors.rows()) + " rows, asked for " +
          std::to_string(num_sources) + " sources");
    if (fx->attractors.cols() != cfg.net.embed_dim)
      throw std::invalid_argument("fixed attractors have the wrong dimension");
    out.attractors = fx->attractors;
  } else {
    if (!model.params.contains(nn::kAnchorsParam))
      throw std::invalid_argument("anchored strategy needs a model with anchors");
    const Matrix& anchors = model.params.at(nn::kAnchorsParam);
    if (num_sources > anchors.rows())
      throw std::invalid_argument(
          "anchored strategy needs C <= N (C=" + std::to_string(num_sources) +
          ", N=" + std::to_string(anchors.rows()) + ")");
    out.attractors = adanet::select_attractor_set(anchors, out.embeddings,
                                                  out.threshold.w, num_sources)
                         .attractors;
  }

  out.masks = attractor::estimate_masks(
      attractor::similarity_scores(out.attractors, out.embeddings),
      cfg.nonlinearity);
  for (Eigen::Index i = 0; i < out.masks.rows(); ++i) {
    dsp::Waveform w =
        dsp::reconstruct(out.masks.row(i), out.mixture_spec);
    w.samples.resize(mixture.samples.size(), 0.0);
    out.sources.push_back(std::move(w));
  }
  return out;
}

std::vector<dsp::Waveform> separate(const Model& model,
                                    const dsp::Waveform& mixture,
                                    int num_sources, const Strategy& strategy) {
  return separate_detailed(model, mixture, num_sources, strategy).sources;
}

std::vector<dsp::Waveform> oracle_separate(
    masks::IdealMask kind, const dsp::Waveform& mixture,
    const std::vector<dsp::Waveform>& sources, const dsp::StftConfig& stft) {
  if (sources.empty()) throw std::invalid_argument("no reference sources");
  const dsp::ComplexSpectrogram spec = dsp::stft(mixture, stft);
  Matrix mags(static_cast<Eigen::Index>(sources.size()), spec.values.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (sources[i].size() != mixture.size())
      throw std::invalid_argument("reference length differs from mixture");
    mags.row(static_cast<Eigen::Index>(i)) =
        dsp::magnitude(dsp::stft(sources[i], stft)).flatten();
  }
  const masks::MaskSet m = masks::ideal(kind, mags);
  std::vector<dsp::Waveform> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    dsp::Waveform w = dsp::reconstruct(m.row(i), spec);
    w.samples.resize(mixture.samples.size(), 0.0);
    out.push_back(std::move(w));
  }
  return out;
}

Matrix PcaResult::project(const Matrix& points) const {
  return components * (points.colwise() - mean);
}

PcaResult pca_project(const Matrix& embeddings, int dims) {
  const Eigen::Index k = embeddings.rows();
  const Eigen::Index n = embeddings.cols();
  if (dims < 1 || dims > k)
    throw std::invalid_argument("PCA dims must be in [1, K]");
  if (n < dims) throw std::invalid_argument("PCA needs FT >= dims");

  PcaResult res;
  res.mean = embeddings.rowwise().mean();
  const Matrix centered = embeddings.colwise() - res.mean;
  Matrix cov = centered * centered.transpose() / static_cast<double>(n);
  res.total_variance = cov.trace();
  res.components.resize(dims, k);
  res.variances.resize(dims);

  constexpr double kTol = 1e-9;
  constexpr int kMaxIterations = 20000;
  const double scale = std::max(cov.cwiseAbs().maxCoeff(), 1e-300);
  Rng rng(0x5eed);
  for (int d = 0; d < dims; ++d) {
    auto orthogonalize = [&](Eigen::VectorXd& v) {
      for (int p = 0; p < d; ++p) {
        const Eigen::VectorXd c = res.components.row(p).transpose();
        v -= c.dot(v) * c;
      }
    };
    Eigen::VectorXd v(k);
    for (Eigen::Index i = 0; i < k; ++i) v(i) = uniform(rng, -1.0, 1.0);
    orthogonalize(v);
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < kMaxIterations; ++it) {
      Eigen::VectorXd next = cov * v;
      orthogonalize(next);
      lambda = v.dot(next);
      if ((next - lambda * v).norm() <= kTol * scale) break;
      const double norm = next.norm();
      if (norm <= kTol * scale) {
        lambda = 0.0;
        break;
      }
      v = next / norm;
    }
    orthogonalize(v);
    v.normalize();
    lambda = v.dot(cov * v);
    res.components.row(d) = v.transpose();
    res.variances(d) = lambda;
    cov -= lambda * v * v.transpose();
  }
  res.projection = res.components * centered;
  return res;
}

}  // namespace danet::inference
