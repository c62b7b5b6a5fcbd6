#include "simix/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "simix/error.hpp"
#include "simix/mrsip.hpp"
#include "simix/parallel.hpp"
#include "simix/rng.hpp"
#include "simix/sir.hpp"

namespace simix {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = X.row(rows[r]);
  return out;
}

Eigen::VectorXd take_rows(const Eigen::VectorXd& y, const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out[static_cast<Eigen::Index>(r)] = y[rows[r]];
  return out;
}

// Squared prediction error of `spec` trained on the complement of `test`.
double split_sse(const ModelSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                 const std::vector<bool>& is_test, bool use_test_response, std::uint64_t seed) {
  std::vector<Eigen::Index> train, test;
  for (std::size_t i = 0; i < is_test.size(); ++i) {
    (is_test[i] ? test : train).push_back(static_cast<Eigen::Index>(i));
  }
  const Eigen::VectorXd y_test = take_rows(y, test);
  const Eigen::VectorXd fitted =
      fit_and_predict(spec, take_rows(X, train), take_rows(y, train), take_rows(X, test),
                      use_test_response ? std::optional<Eigen::VectorXd>(y_test) : std::nullopt,
                      seed);
  return (y_test - fitted).squaredNorm();
}

void check_data(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) fail(ErrorKind::shape, "X and y have different numbers of rows");
  if (y.size() == 0) fail(ErrorKind::empty_data, "no observations");
}

void check_specs(const std::vector<ModelSpec>& specs) {
  if (specs.empty()) fail(ErrorKind::invalid_argument, "no models to compare");
  for (const auto& s : specs) {
    if ((s.kind == ModelKind::msim || s.kind == ModelKind::mrsip) &&
        !(s.bandwidth > 0.0 && std::isfinite(s.bandwidth))) {
      fail(ErrorKind::invalid_bandwidth, "model " + s.label() + " needs a positive bandwidth");
    }
  }
}

PredictionComparison run_splits(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                const std::vector<ModelSpec>& specs,
                                const std::vector<std::vector<bool>>& splits,
                                const CompareOptions& options, PredictionComparison out) {
  const std::size_t m = specs.size();
  const std::size_t s = splits.size();
  std::vector<double> values(m * s, kNaN);
  std::vector<std::string> messages(m * s);
  parallel_for(m * s, options.workers, [&](std::size_t cell) {
    const std::size_t split = cell / m;
    const std::size_t model = cell % m;
    std::size_t tested = 0;
    for (bool b : splits[split]) tested += b ? 1 : 0;
    try {
      const double sse = split_sse(specs[model], X, y, splits[split], options.use_test_response,
                                   substream_seed(options.seed, "compare-fit", {split}));
      values[cell] = sse / static_cast<double>(tested);
    } catch (const std::exception& e) {
      messages[cell] = specs[model].label() + " split " + std::to_string(split) + ": " + e.what();
    }
  });
  out.models.clear();
  for (const auto& spec : specs) out.models.push_back(spec.label());
  out.mspe.assign(m, std::vector<double>(s, kNaN));
  out.failures.assign(m, 0);
  for (std::size_t split = 0; split < s; ++split) {
    for (std::size_t model = 0; model < m; ++model) {
      const std::size_t cell = split * m + model;
      out.mspe[model][split] = values[cell];
      if (std::isnan(values[cell])) {
        ++out.failures[model];
        out.failure_messages.push_back(messages[cell]);
      }
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::msim: return "msim";
    case ModelKind::mrsip: return "mrsip";
    case ModelKind::mixlin: return "mixlin";
    case ModelKind::linear: return "linear";
  }
  return "unknown";
}

std::optional<ModelKind> parse_model_kind(std::string_view name) {
  for (ModelKind k : {ModelKind::msim, ModelKind::mrsip, ModelKind::mixlin, ModelKind::linear}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

std::string ModelSpec::label() const {
  return name.empty() ? std::string(to_string(kind)) : name;
}

Prediction predict_mixlin(const LinearMixtureParams& params, const Eigen::MatrixXd& X,
                          const std::optional<Eigen::VectorXd>& y) {
  const Eigen::MatrixXd design = design_matrix(X, params.intercept);
  if (design.cols() != params.coefficients.cols()) {
    fail(ErrorKind::shape, "new data do not match the fitted design");
  }
  const Eigen::MatrixXd means = design * params.coefficients.transpose();
  Prediction out;
  if (y) {
    if (y->size() != X.rows()) fail(ErrorKind::shape, "response length does not match X");
    Eigen::MatrixXd logw = component_log_densities(params, design, *y);
    for (Eigen::Index j = 0; j < params.components(); ++j) {
      logw.col(j).array() += std::log(params.proportions[j]);
    }
    normalize_log_weights(logw, out.posteriors);
  } else {
    out.posteriors = params.proportions.transpose().replicate(X.rows(), 1);
  }
  out.fitted = out.posteriors.cwiseProduct(means).rowwise().sum();
  out.labels = hard_labels(out.posteriors);
  return out;
}

Eigen::VectorXd fit_and_predict(const ModelSpec& spec, const Eigen::MatrixXd& X_train,
                                const Eigen::VectorXd& y_train, const Eigen::MatrixXd& X_test,
                                const std::optional<Eigen::VectorXd>& test_y, std::uint64_t seed) {
  switch (spec.kind) {
    case ModelKind::msim: {
      MsimOptions o;
      o.mode = spec.msim_mode;
      o.grid_size = spec.grid_size;
      o.seed = seed;
      o.init_starts = spec.init_starts;
      const MsimFit fit = fit_msim(X_train, y_train, spec.k, spec.bandwidth, o);
      return predict_msim(fit, X_test, test_y).fitted;
    }
    case ModelKind::mrsip: {
      MrsipOptions o;
      o.intercept = spec.intercept;
      o.grid_size = spec.grid_size;
      o.seed = seed;
      o.init_starts = spec.init_starts;
      const MrsipFit fit = fit_mrsip(X_train, y_train, spec.k, spec.bandwidth, o);
      return predict_mrsip(fit, X_test, test_y).fitted;
    }
    case ModelKind::mixlin:
    case ModelKind::linear: {
      MixLinOptions o;
      o.intercept = spec.intercept;
      o.seed = seed;
      o.starts = spec.init_starts;
      const int k = spec.kind == ModelKind::linear ? 1 : spec.k;
      const MixLinFit fit = fit_mixlinreg(X_train, y_train, k, o);
      return predict_mixlin(fit.params, X_test, test_y).fitted;
    }
  }
  fail(ErrorKind::invalid_argument, "unknown model kind");
}

SmoothingPolicy smoothing_policy(double h_hat, std::size_t n) {
  if (!(h_hat > 0.0) || !std::isfinite(h_hat)) {
    fail(ErrorKind::invalid_bandwidth, "bandwidth must be positive and finite");
  }
  if (n < 1) fail(ErrorKind::invalid_argument, "sample size must be at least 1");
  return {h_hat * std::pow(static_cast<double>(n), -2.0 / 15.0), h_hat, 1.5 * h_hat};
}

std::vector<double> default_bandwidth_candidates(const Eigen::VectorXd& index_values,
                                                 const CandidateGridOptions& options) {
  if (index_values.size() < 2) fail(ErrorKind::empty_data, "need at least two index values");
  if (options.count < 1 || !(options.low > 0.0) || !(options.high >= options.low)) {
    fail(ErrorKind::invalid_argument, "candidate grid needs count >= 1 and 0 < low <= high");
  }
  const double range = index_values.maxCoeff() - index_values.minCoeff();
  if (!(range > 0.0)) fail(ErrorKind::degenerate_span, "index values do not vary");
  const double scale = range * std::pow(static_cast<double>(index_values.size()), -0.2);
  std::vector<double> out(options.count);
  if (options.count == 1) {
    out[0] = options.low * scale;
    return out;
  }
  const double ratio = std::log(options.high / options.low) / static_cast<double>(options.count - 1);
  for (std::size_t c = 0; c < options.count; ++c) {
    out[c] = scale * options.low * std::exp(ratio * static_cast<double>(c));
  }
  return out;
}

std::vector<double> default_bandwidth_candidates(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                                 const CandidateGridOptions& options) {
  check_data(X, y);
  if (X.cols() == 1) return default_bandwidth_candidates(Eigen::VectorXd(X.col(0)), options);
  return default_bandwidth_candidates(sir_direction(X, y).project(X), options);
}

std::vector<int> random_folds(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2) fail(ErrorKind::invalid_argument, "need at least two folds");
  if (static_cast<std::size_t>(folds) > n) {
    fail(ErrorKind::invalid_argument, "more folds than observations");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> fold(n);
  for (std::size_t pos = 0; pos < n; ++pos) {
    fold[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(folds));
  }
  return fold;
}

BandwidthReport cv_bandwidth(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const ModelSpec& base, const std::vector<double>& candidates,
                             const CvOptions& options) {
  check_data(X, y);
  if (base.kind != ModelKind::msim && base.kind != ModelKind::mrsip) {
    fail(ErrorKind::invalid_argument, "bandwidth selection applies to msim and mrsip models");
  }
  if (candidates.empty()) fail(ErrorKind::invalid_argument, "no candidate bandwidths");
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (!(candidates[c] > 0.0) || !std::isfinite(candidates[c])) {
      fail(ErrorKind::invalid_bandwidth, "candidate bandwidths must be positive and finite");
    }
    if (c > 0 && !(candidates[c] > candidates[c - 1])) {
      fail(ErrorKind::invalid_argument, "candidate bandwidths must be strictly increasing");
    }
  }
  if (options.repetitions < 1) fail(ErrorKind::invalid_argument, "need at least one repetition");

  const auto n = static_cast<std::size_t>(y.size());
  const auto reps = static_cast<std::size_t>(options.repetitions);
  const auto folds = static_cast<std::size_t>(options.folds);
  const std::size_t cands = candidates.size();

  std::vector<std::vector<int>> assignment(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    assignment[r] = random_folds(n, options.folds, substream_seed(options.seed, "cv-folds", {r}));
  }

  const std::size_t cells = reps * cands * folds;
  std::vector<double> sse(cells, kNaN);
  std::vector<std::string> messages(cells);
  parallel_for(cells, options.workers, [&](std::size_t cell) {
    const std::size_t r = cell / (cands * folds);
    const std::size_t c = (cell / folds) % cands;
    const std::size_t l = cell % folds;
    std::vector<bool> is_test(n);
    for (std::size_t i = 0; i < n; ++i) is_test[i] = assignment[r][i] == static_cast<int>(l);
    ModelSpec spec = base;
    spec.bandwidth = candidates[c];
    try {
      sse[cell] = split_sse(spec, X, y, is_test, true,
                            substream_seed(options.seed, "cv-fit", {r, l}));
    } catch (const std::exception& e) {
      messages[cell] = "repetition " + std::to_string(r) + ", h=" + std::to_string(candidates[c]) +
                       ", fold " + std::to_string(l) + ": " + e.what();
    }
  });

  BandwidthReport report;
  report.candidates = candidates;
  report.cv_scores = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(reps),
                                               static_cast<Eigen::Index>(cands), kNaN);
  std::vector<std::size_t> invalid(cands, 0);
  for (std::size_t r = 0; r < reps; ++r) {
    for (std::size_t c = 0; c < cands; ++c) {
      double total = 0.0;
      for (std::size_t l = 0; l < folds; ++l) {
        const std::size_t cell = (r * cands + c) * folds + l;
        total += sse[cell];
        if (!messages[cell].empty()) report.failures.push_back(messages[cell]);
      }
      if (std::isnan(total)) ++invalid[c];
      report.cv_scores(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = total;
    }
  }
  report.dropped.resize(cands);
  for (std::size_t c = 0; c < cands; ++c) {
    report.dropped[c] =
        static_cast<double>(invalid[c]) > options.max_invalid_fraction * static_cast<double>(reps);
  }

  double sum = 0.0;
  int valid = 0;
  report.per_repetition.assign(reps, kNaN);
  for (std::size_t r = 0; r < reps; ++r) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cands; ++c) {
      const double score = report.cv_scores(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      if (report.dropped[c] || std::isnan(score)) continue;
      if (score < best) {
        best = score;
        report.per_repetition[r] = candidates[c];
      }
    }
    if (!std::isnan(report.per_repetition[r])) {
      sum += report.per_repetition[r];
      ++valid;
    }
  }
  if (valid == 0) {
    fail(ErrorKind::too_many_failures,
         "every candidate bandwidth failed" +
             (report.failures.empty() ? std::string() : " (first failure: " + report.failures.front() + ")"));
  }
  report.selected = sum / valid;
  report.policy = smoothing_policy(report.selected, n);
  return report;
}

double PredictionComparison::median(std::size_t model) const {
  std::vector<double> v;
  for (double x : mspe.at(model)) {
    if (!std::isnan(x)) v.push_back(x);
  }
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

double PredictionComparison::mean(std::size_t model) const {
  double sum = 0.0;
  int count = 0;
  for (double x : mspe.at(model)) {
    if (!std::isnan(x)) {
      sum += x;
      ++count;
    }
  }
  return count == 0 ? kNaN : sum / count;
}

PredictionComparison mccv_compare(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  const std::vector<ModelSpec>& specs, int test_size,
                                  int repetitions, const CompareOptions& options) {
  check_data(X, y);
  check_specs(specs);
  const auto n = static_cast<std::size_t>(y.size());
  if (test_size < 1 || static_cast<std::size_t>(test_size) >= n) {
    fail(ErrorKind::invalid_argument, "test size must be in [1, n)");
  }
  if (repetitions < 1) fail(ErrorKind::invalid_argument, "need at least one repetition");

  std::vector<std::vector<bool>> splits(static_cast<std::size_t>(repetitions));
  for (std::size_t r = 0; r < splits.size(); ++r) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_stream(options.seed, "mccv-split", {r});
    std::shuffle(order.begin(), order.end(), rng);
    splits[r].assign(n, false);
    for (int t = 0; t < test_size; ++t) splits[r][order[static_cast<std::size_t>(t)]] = true;
  }
  PredictionComparison out;
  out.kind = SplitKind::mccv;
  out.test_size = test_size;
  out.repetitions = repetitions;
  return run_splits(X, y, specs, splits, options, std::move(out));
}

PredictionComparison dfold_compare(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                   const std::vector<ModelSpec>& specs, int folds,
                                   const CompareOptions& options) {
  check_data(X, y);
  check_specs(specs);
  const auto n = static_cast<std::size_t>(y.size());
  const std::vector<int> fold = random_folds(n, folds, substream_seed(options.seed, "dfold-split"));
  std::vector<std::vector<bool>> splits(static_cast<std::size_t>(folds), std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) splits[static_cast<std::size_t>(fold[i])][i] = true;
  PredictionComparison out;
  out.kind = SplitKind::dfold;
  out.folds = folds;
  return run_splits(X, y, specs, splits, options, std::move(out));
}

}  // namespace simix
