// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "danet/masks.h"

#include <cmath>
#include <stdexcept>

namespace danet::masks {

namespace {

void check_sources(const Eigen::MatrixXd& mags) {
  if (mags.rows() < 1) throw std::invalid_argument("need at least one source");
}

MaskSet ratio_mask(const Eigen::MatrixXd& weights) {
  const Eigen::Index c = weights.rows();
  MaskSet m(c, weights.cols());
  for (Eigen::Index j = 0; j < weights.cols(); ++j) {
    const double total = weights.col(j).sum();
    if (total > 0.0)
      m.col(j) = weights.col(j) / total;
    else
      m.col(j).setConstant(1.0 / static_cast<double>(c));
  }
  return m;
}

}  // namespace

IdealMask parse_ideal_mask(const std::string& name) {
  if (name == "ibm") return IdealMask::kIbm;
  if (name == "irm") return IdealMask::kIrm;
  if (name == "wfm") return IdealMask::kWfm;
  throw std::invalid_argument("unknown ideal mask '" + name +
                              "' (expected ibm, irm or wfm)");
}

std::string to_string(IdealMask kind) {
  switch (kind) {
    case IdealMask::kIbm: return "ibm";
    case IdealMask::kIrm: return "irm";
    case IdealMask::kWfm: return "wfm";
  }
  return "?";
}

MaskSet ibm(const Eigen::MatrixXd& source_mags) {
  check_sources(source_mags);
  MaskSet m = MaskSet::Zero(source_mags.rows(), source_mags.cols());
  for (Eigen::Index j = 0; j < source_mags.cols(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < source_mags.rows(); ++i) {
      if (std::abs(source_mags(i, j)) > std::abs(source_mags(best, j)))
        best = i;
    }
    m(best, j) = 1.0;
  }
  return m;
}

MaskSet irm(const Eigen::MatrixXd& source_mags) {
  check_sources(source_mags);
  return ratio_mask(source_mags.cwiseAbs());
}

MaskSet wfm(const Eigen::MatrixXd& source_mags) {
  check_sources(source_mags);
  return ratio_mask(source_mags.cwiseAbs2());
}

MaskSet ideal(IdealMask kind, const Eigen::MatrixXd& source_mags) {
  switch (kind) {
    case IdealMask::kIbm: return ibm(source_mags);
    case IdealMask::kIrm: return irm(source_mags);
    case IdealMask::kWfm: return wfm(source_mags);
  }
  throw std::invalid_argument("bad mask kind");
}

Eigen::MatrixXd apply(const MaskSet& masks, const Eigen::RowVectorXd& mix_mag) {
  if (masks.cols() != mix_mag.size())
    throw std::invalid_argument("mask width does not match mixture length");
  return masks.array().rowwise() * mix_mag.array();
}

}  // namespace danet::masks
