// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Ideal time-frequency masks computed from oracle source magnitudes.
// Source magnitudes and masks are C x FT: one row per source, one column
// per flattened T-F bin.

#ifndef DANET_MASKS_H_
#define DANET_MASKS_H_

#include <string>

#include <Eigen/Dense>

namespace danet::masks {

// C x FT, entries in [0, 1].
using MaskSet = Eigen::MatrixXd;
// C x FT speaker assignment (hard or soft), entries in [0, 1].
using SpeakerAssignment = Eigen::MatrixXd;

enum class IdealMask { kIbm, kIrm, kWfm };

IdealMask parse_ideal_mask(const std::string& name);
std::string to_string(IdealMask kind);

// 1 where a source is strictly louder than every other source. Ties go to
// the lowest source index, so each column has exactly one 1.
MaskSet ibm(const Eigen::MatrixXd& source_mags);

// |s_i| / sum_j |s_j|; bins with zero total get 1/C.
MaskSet irm(const Eigen::MatrixXd& source_mags);

// |s_i|^2 / sum_j |s_j|^2; bins with zero total get 1/C.
MaskSet wfm(const Eigen::MatrixXd& source_mags);

MaskSet ideal(IdealMask kind, const Eigen::MatrixXd& source_mags);

// Per-source estimated magnitudes x (.) m_i.
Eigen::MatrixXd apply(const MaskSet& masks, const Eigen::RowVectorXd& mix_mag);

}  // namespace danet::masks

#endif  // DANET_MASKS_H_
