#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "simix/mixlin.hpp"
#include "simix/msim.hpp"
#include "simix/smoothing.hpp"

namespace simix {

enum class ModelKind { msim, mrsip, mixlin, linear };

std::string_view to_string(ModelKind kind) noexcept;
std::optional<ModelKind> parse_model_kind(std::string_view name);

// One candidate model for cross-validation. `linear` ignores k and fits a
// single ordinary regression; msim and mrsip need a bandwidth.
struct ModelSpec {
  ModelKind kind = ModelKind::msim;
  int k = 2;
  double bandwidth = 0.0;
  bool intercept = true;
  MsimMode msim_mode = MsimMode::fib;
  std::size_t grid_size = kDefaultGridSize;
  int init_starts = 10;
  std::string name;  // label in reports; the kind when empty

  std::string label() const;
};

/// Responsibilities and fitted values of a mixture of linear regressions.
/// With y the responsibilities use the response; without, they are the
/// mixing proportions.
Prediction predict_mixlin(const LinearMixtureParams& params, const Eigen::MatrixXd& X,
                          const std::optional<Eigen::VectorXd>& y = std::nullopt);

/// Fits `spec` on the training data and returns y-hat on the test rows.
/// When `test_y` is given, mixture responsibilities on the test rows use it.
Eigen::VectorXd fit_and_predict(const ModelSpec& spec, const Eigen::MatrixXd& X_train,
                                const Eigen::VectorXd& y_train, const Eigen::MatrixXd& X_test,
                                const std::optional<Eigen::VectorXd>& test_y, std::uint64_t seed);

struct SmoothingPolicy {
  double under = 0.0;
  double appropriate = 0.0;
  double over = 0.0;
};

/// (h n^(-2/15), h, 1.5 h).
SmoothingPolicy smoothing_policy(double h_hat, std::size_t n);

struct CandidateGridOptions {
  std::size_t count = 12;
  double low = 0.1;   // multiples of range(index) * n^(-1/5)
  double high = 2.0;
};

/// Geometric grid between low and high times range(index) * n^(-1/5).
std::vector<double> default_bandwidth_candidates(const Eigen::VectorXd& index_values,
                                                 const CandidateGridOptions& options = {});
/// Same, with the index taken from SIR on (X, y).
std::vector<double> default_bandwidth_candidates(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                                 const CandidateGridOptions& options = {});

struct CvOptions {
  int folds = 10;
  int repetitions = 30;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  double max_invalid_fraction = 0.2;
};

struct BandwidthReport {
  std::vector<double> candidates;
  Eigen::MatrixXd cv_scores;  // repetition x candidate, NaN where a fold fit failed
  std::vector<bool> dropped;  // candidate invalid in too many repetitions
  std::vector<double> per_repetition;  // argmin per repetition, NaN if none valid
  std::vector<std::string> failures;   // one line per failed fold fit
  double selected = 0.0;
  SmoothingPolicy policy;
};

/// Repeated L-fold CV of the squared prediction error, y-hat from test-set
/// responsibilities. `base` supplies the model kind, k and fit settings; its
/// bandwidth is overridden by each candidate.
BandwidthReport cv_bandwidth(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const ModelSpec& base, const std::vector<double>& candidates,
                             const CvOptions& options = {});

enum class SplitKind { dfold, mccv };

struct PredictionComparison {
  SplitKind kind = SplitKind::mccv;
  int test_size = 0;    // mccv
  int repetitions = 0;  // mccv
  int folds = 0;        // dfold
  std::vector<std::string> models;
  std::vector<std::vector<double>> mspe;  // model x split, NaN for a failed fit
  std::vector<int> failures;              // per model
  std::vector<std::string> failure_messages;

  std::size_t splits() const { return mspe.empty() ? 0 : mspe.front().size(); }
  double median(std::size_t model) const;
  double mean(std::size_t model) const;
};

struct CompareOptions {
  std::uint64_t seed = 0;
  unsigned workers = 1;
  bool use_test_response = true;
};

/// Monte-Carlo CV: repeatedly hold out a random test set of size d.
PredictionComparison mccv_compare(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  const std::vector<ModelSpec>& specs, int test_size,
                                  int repetitions, const CompareOptions& options = {});

/// Disjoint d-fold CV; each observation is tested exactly once.
PredictionComparison dfold_compare(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                   const std::vector<ModelSpec>& specs, int folds,
                                   const CompareOptions& options = {});

/// Fold label (0..folds-1) for every observation after a seeded shuffle.
std::vector<int> random_folds(std::size_t n, int folds, std::uint64_t seed);

}  // namespace simix
