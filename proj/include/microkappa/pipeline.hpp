#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "microkappa/homogenize.hpp"
#include "microkappa/microgen.hpp"
#include "microkappa/podrb.hpp"
#include "microkappa/surrogate.hpp"

// Multi-stage drivers shared by the command line tool and the experiments.

namespace microkappa {

/// Samples [first, first + count) of the ensemble.
std::vector<EnsembleSample> generate_ensemble(const EnsembleSpec& spec, std::uint64_t first,
                                              std::size_t count, unsigned threads = 0);

std::vector<MicrostructureImage> images_of(std::vector<EnsembleSample> samples);

std::vector<HomogenizationResult> label_images(const std::vector<MicrostructureImage>& images,
                                               const PhaseLaw& law, const SolverOptions& options = {},
                                               unsigned threads = 0);

/// Shifted two-point snapshots as columns.
Eigen::MatrixXd snapshot_matrix(const std::vector<MicrostructureImage>& images, unsigned threads = 0);

/// Features of every image against the first h modes, plus Voigt labels.
LabeledSet build_labeled_set(const ReducedBasis<double>& rb, const std::vector<MicrostructureImage>& images,
                             const std::vector<VoigtVector>& labels, Eigen::Index h, unsigned threads = 0);

struct RbTrainConfig {
  EnsembleSpec stream;
  EnrichParams enrich;
  Eigen::Index initial_count = 200;
  /// Initial basis from the correlation matrix instead of the SVD.
  bool initial_from_correlation = false;
  /// Stream length cap, not counting the initial snapshots.
  Eigen::Index max_snapshots = 20000;
  unsigned threads = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const RbTrainConfig& c);
void from_json(const nlohmann::json& j, RbTrainConfig& c);

struct EnrichmentEvent {
  std::uint64_t processed = 0;  ///< stream position after the update
  Eigen::Index modes = 0;       ///< basis size after the update
};

/// Table-1 style summary of one streaming run.
struct RbTrainReport {
  Method method = Method::C;
  Eigen::Index initial_modes = 0;
  Eigen::Index final_modes = 0;
  std::uint64_t processed = 0;  ///< streamed snapshots, initial ones excluded
  std::uint64_t accepted = 0;   ///< error <= eps when screened
  std::uint64_t buffered = 0;   ///< error > eps when screened
  std::uint64_t enrichments = 0;
  bool converged = false;
  std::vector<EnrichmentEvent> events;
};

void to_json(nlohmann::json& j, const RbTrainReport& r);
void from_json(const nlohmann::json& j, RbTrainReport& r);

struct RbTrainResult {
  ReducedBasis<double> basis;
  RbTrainReport report;
};

/// Initial batch basis from snapshots [0, initial_count) of the stream
/// ensemble, then the enrichment loop over the following ones until
/// convergence or the cap. A capped run absorbs its leftover buffer.
RbTrainResult train_reduced_basis(const RbTrainConfig& config);

/// N,<label1>,<label2>,... with P_delta(N); shorter curves leave blanks.
std::string accuracy_curve_csv(const std::vector<std::pair<std::string, Eigen::VectorXd>>& curves,
                               const std::string& hash);

std::string method_table_csv(const std::vector<RbTrainReport>& reports, double eps, const std::string& hash);

struct AnnEvaluation {
  std::string model;
  std::string test_set;
  ErrorReport report;
};

/// One row per (model, test set): mean / max relative errors of k11 and k22
/// in percent and the MAE of all three components.
std::string error_matrix_csv(const std::vector<AnnEvaluation>& rows, const std::string& hash);

/// epoch,train,validation
std::string loss_curve_csv(const TrainingInfo& info, const std::string& hash);

}  // namespace microkappa
