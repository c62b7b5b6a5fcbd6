#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "simix/mixlin.hpp"
#include "simix/sir.hpp"
#include "simix/smoothing.hpp"

namespace simix {

struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

// Row vector of k values of a true curve family at index value z.
using TruthFunction = std::function<Eigen::RowVectorXd(double)>;

struct SyntheticTruth {
  int example = 0;
  std::uint64_t seed = 0;
  IndexVector index;
  std::vector<int> labels;  // 0-based component drawn for each observation
  TruthFunction proportions;
  TruthFunction means;      // example 1 only
  TruthFunction variances;  // example 1 only (squared standard deviations)
  LinearMixtureParams linear;  // example 2 only; coefficients include the intercept
};

/// (1, 1, 1)/sqrt(3).
IndexVector example_index();

// Example 1: a two-component mixture of single-index models.
Eigen::RowVectorXd example1_proportions(double z);
Eigen::RowVectorXd example1_means(double z);
Eigen::RowVectorXd example1_sds(double z);
Eigen::RowVectorXd example1_variances(double z);

// Example 2: two linear regressions with index-dependent proportions.
Eigen::RowVectorXd example2_proportions(double z);
LinearMixtureParams example2_linear();

struct Simulated {
  Dataset data;
  SyntheticTruth truth;
};

/// x ~ U(0,1)^3, z = a^T x, C ~ pi(z), y ~ N(m_C(z), sigma_C(z)^2).
Simulated gen_example1(std::size_t n, std::uint64_t seed);
/// x ~ U(0,1)^3, z = a^T x, C ~ pi(z), y ~ N((1, x)^T beta_C, sigma_C^2).
Simulated gen_example2(std::size_t n, std::uint64_t seed);

/// sqrt(N^-1 sum_j sum_t (est(u_t, j) - truth(u_t)_j)^2) over the grid rows
/// of `estimated` (N x k).
double rase(const Eigen::MatrixXd& estimated, const Grid& grid, const TruthFunction& truth);

enum class CurveFamily { proportions, means, variances };
double rase(const CurveSet& curves, const TruthFunction& truth, CurveFamily family);

/// Permutation `perm` with estimated component perm[l] playing true
/// component l. Exhaustive over all k! orderings, k <= 6.
std::vector<int> best_permutation(const std::function<double(const std::vector<int>&)>& cost,
                                  int k);

/// Matching for curve estimates: minimizes the summed RASE over the
/// families that both sides provide.
std::vector<int> match_components(const CurveSet& curves, const SyntheticTruth& truth);
/// Matching for linear components: minimizes the summed squared
/// coefficient difference.
std::vector<int> match_components(const LinearMixtureParams& estimated,
                                  const LinearMixtureParams& truth);

CurveSet permute_components(const CurveSet& curves, const std::vector<int>& perm);
LinearMixtureParams permute_components(const LinearMixtureParams& params,
                                       const std::vector<int>& perm);

enum class Estimator { sir, os, fib_sir, fib_true, mrsip_sir, mrsip_true, mixlin };
enum class Policy { none, under, appropriate, over };

std::string estimator_name(Estimator e);  // SIR, OS, FIB(S), ...
std::string estimator_key(Estimator e);   // sir, os, fib_sir, ...
std::optional<Estimator> parse_estimator(const std::string& key);
std::string policy_name(Policy p);

struct ReplicationConfig {
  int example = 1;
  std::vector<std::size_t> n_values{400};
  int replications = 100;
  std::vector<Estimator> estimators;  // defaults per example when empty
  std::vector<Policy> policies{Policy::appropriate};
  // CV-selected bandwidth per n. Missing entries are filled by a pilot CV
  // run on one simulated dataset of that size.
  std::map<std::size_t, double> h_hat;
  // One-step bandwidth per n; h_hat when missing.
  std::map<std::size_t, double> os_bandwidth;
  int pilot_repetitions = 5;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::size_t grid_size = kDefaultGridSize;
  double max_failure_fraction = 0.1;
};

struct ReplicationRecord {
  std::size_t n = 0;
  int replication = 0;
  Estimator estimator = Estimator::sir;
  Policy policy = Policy::none;
  double bandwidth = 0.0;
  std::uint64_t data_seed = 0;
  bool ok = false;
  std::string error;
  // Raw squared errors (alpha1.., beta10.., sigma2_1..) and RASEs.
  std::map<std::string, double> values;
  double seconds = 0.0;
  std::vector<std::string> notes;
};

struct TableCell {
  std::size_t n = 0;
  Estimator estimator = Estimator::sir;
  Policy policy = Policy::none;
  double bandwidth = 0.0;
  std::string quantity;
  double scale = 1.0;  // applied to mean and sd
  double mean = 0.0;
  std::optional<double> sd;  // absent with fewer than two values
  int count = 0;
  int failures = 0;
};

struct ReplicationTable {
  int example = 0;
  int replications = 0;
  std::map<std::size_t, double> h_hat;
  std::map<std::size_t, double> os_bandwidth;
  std::vector<TableCell> cells;
  std::vector<ReplicationRecord> records;

  const TableCell* find(std::size_t n, Estimator e, Policy p, const std::string& quantity) const;
  // Total fit time per estimator, summed over records.
  double seconds(Estimator e) const;
};

ReplicationTable run_replications(const ReplicationConfig& config);

/// cells.csv: one row per (n, estimator, policy, quantity).
void write_cells_csv(const ReplicationTable& table, std::ostream& out);
/// Example 1: alpha MSE x 100 (n, component) by estimator/bandwidth.
void write_alpha_table_csv(const ReplicationTable& table, std::ostream& out);
/// Example 1: RASE mean and sd by estimator/bandwidth.
void write_rase_table_csv(const ReplicationTable& table, std::ostream& out);
/// Example 2: coefficient and variance MSE x 100 per (n, estimator).
void write_parameter_table_csv(const ReplicationTable& table, std::ostream& out);
/// Example 2: alpha MSE x 100 and RASE_pi x 100 per (n, estimator).
void write_index_table_csv(const ReplicationTable& table, std::ostream& out);
void write_table_text(const ReplicationTable& table, std::ostream& out);
/// One JSON object per record; timings only when requested.
void write_records_ndjson(const ReplicationTable& table, std::ostream& out, bool with_timing = false);

}  // namespace simix
