// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Command-line front end: gen | train | separate | evaluate | diagnose.
//
// Every subcommand accepts --config FILE with flat `key=value` lines whose
// keys are the long option names; flags given on the command line win.

#ifndef DANET_CLI_H_
#define DANET_CLI_H_

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "danet/data.h"
#include "danet/inference.h"
#include "danet/metrics.h"

namespace danet::cli {

using nn::Matrix;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

int run(int argc, const char* const* argv, std::ostream& out,
        std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

struct MixtureScore {
  std::string name;
  int num_sources = 0;
  metrics::ScoreReport report;
};

struct Evaluation {
  std::vector<MixtureScore> scores;
  std::vector<std::string> missing;  // files that could not be read

  std::vector<double> column(double (metrics::ScoreReport::*f)() const) const;
  double median_si_snri() const;
  double mean_si_snri() const;
};

// Raised by estimators when an expected input file does not exist.
class MissingFileError : public std::runtime_error {
 public:
  explicit MissingFileError(const std::filesystem::path& p)
      : std::runtime_error("missing file " + p.string()), path(p.string()) {}
  std::string path;
};

// Produces the estimated sources for one mixture.
using Estimator = std::function<std::vector<dsp::Waveform>(
    const data::Utterance& u)>;

Estimator est_dir_estimator(const std::filesystem::path& dir);

// Scores every row of the index. Unreadable mixtures, references or
// estimates are listed in `missing` and the row is skipped.
Evaluation evaluate_index(const std::filesystem::path& index_path,
                          const Estimator& estimator);

// Embedding diagnostics for one mixture with references, in the space of
// the first three principal components.
struct Diagnostics {
  Matrix bins;        // 3 x FT
  std::vector<int> labels;  // IBM source per bin
  Eigen::RowVectorXd kept;  // threshold flag per bin
  Matrix attractors;  // 3 x C, oracle IBM attractors
  Matrix anchors;     // 3 x N, empty for DANet
  double inter_attractor_distance = 0.0;  // mean over attractor pairs
  double intra_cluster_distance = 0.0;    // mean kept-bin distance to its
                                          // own attractor
};

Diagnostics diagnose(const inference::Model& model,
                     const dsp::Waveform& mixture,
                     const std::vector<dsp::Waveform>& references);

}  // namespace danet::cli

#endif  // DANET_CLI_H_
