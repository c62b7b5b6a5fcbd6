#include "commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "artifact.hpp"
#include "csv.hpp"
#include "simix/error.hpp"
#include "simix/mixlin.hpp"
#include "simix/mrsip.hpp"
#include "simix/msim.hpp"
#include "simix/rng.hpp"
#include "simix/selection.hpp"
#include "simix/simlab.hpp"
#include "simix/sir.hpp"

namespace simix::cli {

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// An estimation failure, tagged with the stage that raised it.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class F>
auto stage(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw EstimationError(name + " failed (" + std::string(to_string(e.kind())) + "): " + e.what());
  }
}

struct DataArgs {
  std::string path;
  std::string response = "y";
  std::vector<std::string> predictors;
  bool standardize = false;
};

struct ModelArgs {
  std::string model = "msim";
  int k = 2;
  double h = 0.0;
  bool cv_bandwidth = false;
  std::size_t grid_n = kDefaultGridSize;
  std::string mode = "fib";
  int starts = 10;
  int cv_folds = 10;
  int cv_reps = 30;
  int max_iter = 0;  // model default when 0
};

struct RunArgs {
  std::uint64_t seed = 1;
  unsigned workers = 1;
  bool strict = false;
  std::string out = ".";
};

struct LoadedData {
  std::vector<std::string> predictors;
  std::string response;
  Eigen::MatrixXd X;  // possibly standardized
  Eigen::VectorXd y;
  Scaling scaling;
};

int column_of(const std::vector<std::string>& names, const std::string& name,
              const std::string& source) {
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (names[c] == name) return static_cast<int>(c);
  }
  throw InputError(source + ": no column named '" + name + "'");
}

double sample_sd(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

LoadedData load_data(const DataArgs& a) {
  const NumericColumns table = to_numeric(read_csv_file(a.path), a.path);
  if (table.values.rows() == 0) throw InputError(a.path + ": no data rows");
  LoadedData d;
  d.response = a.response;
  const int yc = column_of(table.names, a.response, a.path);
  if (a.predictors.empty()) {
    for (std::size_t c = 0; c < table.names.size(); ++c) {
      if (static_cast<int>(c) != yc) d.predictors.push_back(table.names[c]);
    }
  } else {
    d.predictors = a.predictors;
  }
  if (d.predictors.empty()) throw InputError(a.path + ": no predictor columns");
  d.X.resize(table.values.rows(), static_cast<Eigen::Index>(d.predictors.size()));
  for (std::size_t c = 0; c < d.predictors.size(); ++c) {
    const int col = column_of(table.names, d.predictors[c], a.path);
    if (col == yc) throw InputError("the response cannot also be a predictor");
    d.X.col(static_cast<Eigen::Index>(c)) = table.values.col(col);
  }
  d.y = table.values.col(yc);
  d.scaling.enabled = a.standardize;
  d.scaling.predictor_sd = Eigen::VectorXd::Ones(d.X.cols());
  if (a.standardize) {
    for (Eigen::Index c = 0; c < d.X.cols(); ++c) {
      const double sd = sample_sd(d.X.col(c));
      if (!(sd > 0.0)) {
        throw InputError("cannot standardize '" + d.predictors[static_cast<std::size_t>(c)] +
                         "': zero standard deviation");
      }
      d.scaling.predictor_sd[c] = sd;
      d.X.col(c) /= sd;
    }
    d.scaling.response_sd = sample_sd(d.y);
    if (!(d.scaling.response_sd > 0.0)) throw InputError("cannot standardize a constant response");
    d.y /= d.scaling.response_sd;
  }
  return d;
}

ModelKind model_kind(const std::string& name) {
  const auto kind = parse_model_kind(name);
  if (!kind) throw InputError("unknown model '" + name + "' (msim, mrsip, mixlin, linear)");
  return *kind;
}

MsimMode msim_mode(const std::string& name) {
  if (name == "fib") return MsimMode::fib;
  if (name == "one-step" || name == "os") return MsimMode::one_step;
  throw InputError("unknown mode '" + name + "' (fib, one-step)");
}

bool smooths(ModelKind m) { return m == ModelKind::msim || m == ModelKind::mrsip; }

void validate(const ModelArgs& m, const RunArgs& r, bool need_bandwidth) {
  const ModelKind kind = model_kind(m.model);
  msim_mode(m.mode);
  if (m.k < 1) throw InputError("--k must be at least 1");
  if (m.grid_n < 2) throw InputError("--grid-n must be at least 2");
  if (r.workers < 1) throw InputError("--workers must be at least 1");
  if (m.starts < 1) throw InputError("--starts must be at least 1");
  if (m.cv_folds < 2) throw InputError("--cv-folds must be at least 2");
  if (m.cv_reps < 1) throw InputError("--cv-reps must be at least 1");
  if (m.max_iter < 0) throw InputError("--max-iter must be nonnegative");
  if (!std::isfinite(m.h) || m.h < 0.0) throw InputError("--h must be a positive number");
  if (need_bandwidth && smooths(kind) && !m.cv_bandwidth && !(m.h > 0.0)) {
    throw InputError("model " + m.model + " needs --h or --cv-bandwidth");
  }
}

ModelSpec spec_of(const ModelArgs& m, double h) {
  ModelSpec s;
  s.kind = model_kind(m.model);
  s.k = s.kind == ModelKind::linear ? 1 : m.k;
  s.bandwidth = h;
  s.msim_mode = msim_mode(m.mode);
  s.grid_size = m.grid_n;
  s.init_starts = m.starts;
  return s;
}

BandwidthReport select_bandwidth(const LoadedData& d, const ModelSpec& spec, const ModelArgs& m,
                                 const RunArgs& r, const std::vector<double>& given) {
  const std::vector<double> candidates =
      given.empty() ? stage("bandwidth candidates", [&] { return default_bandwidth_candidates(d.X, d.y); })
                    : given;
  CvOptions cv;
  cv.folds = m.cv_folds;
  cv.repetitions = m.cv_reps;
  cv.seed = substream_seed(r.seed, "cli-cv");
  cv.workers = r.workers;
  return stage("bandwidth selection", [&] { return cv_bandwidth(d.X, d.y, spec, candidates, cv); });
}

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_json(const fs::path& path, const Json& j) { open_out(path) << j.dump(2) << '\n'; }

void write_posteriors(const fs::path& dir, const PosteriorMatrix& p) {
  auto out = open_out(dir / "posteriors.csv");
  out << "row";
  for (Eigen::Index j = 0; j < p.cols(); ++j) out << ",p" << j + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    out << i + 1;
    for (Eigen::Index j = 0; j < p.cols(); ++j) out << ',' << format_double(p(i, j));
    out << '\n';
  }
  auto labels = open_out(dir / "labels.csv");
  labels << "row,label\n";
  const std::vector<int> hard = hard_labels(p);
  for (std::size_t i = 0; i < hard.size(); ++i) labels << i + 1 << ',' << hard[i] + 1 << '\n';
}

void write_curves(const fs::path& dir, const CurveSet& c) {
  auto out = open_out(dir / "curves.csv");
  out << "grid_point,component,pi,m,sigma2\n";
  for (std::size_t t = 0; t < c.grid.size(); ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    for (Eigen::Index j = 0; j < c.components(); ++j) {
      out << format_double(c.grid[t]) << ',' << j + 1 << ',' << format_double(c.proportions(r, j))
          << ',' << (c.has_means() ? format_double(c.means(r, j)) : "") << ','
          << (c.has_means() ? format_double(c.variances(r, j)) : "") << '\n';
    }
  }
}

Eigen::VectorXd original_scale_index(const Eigen::VectorXd& alpha, const Scaling& s) {
  if (!s.enabled) return alpha;
  return normalize_index(alpha.cwiseQuotient(s.predictor_sd)).coefficients();
}

void write_index(const fs::path& dir, const LoadedData& d, const Eigen::VectorXd& alpha) {
  auto out = open_out(dir / "index.csv");
  const Eigen::VectorXd original = original_scale_index(alpha, d.scaling);
  out << "predictor,alpha" << (d.scaling.enabled ? ",alpha_original" : "") << '\n';
  for (Eigen::Index c = 0; c < alpha.size(); ++c) {
    out << csv_field(d.predictors[static_cast<std::size_t>(c)]) << ',' << format_double(alpha[c]);
    if (d.scaling.enabled) out << ',' << format_double(original[c]);
    out << '\n';
  }
}

void write_linear(const fs::path& dir, const LoadedData& d, const LinearMixtureParams& p,
                  bool with_proportions) {
  auto out = open_out(dir / "linear_params.csv");
  out << "component";
  if (p.intercept) out << ",intercept";
  for (const auto& name : d.predictors) out << ',' << csv_field(name);
  out << ",sigma2" << (with_proportions ? ",pi" : "") << '\n';
  for (Eigen::Index j = 0; j < p.components(); ++j) {
    out << j + 1;
    for (Eigen::Index c = 0; c < p.coefficients.cols(); ++c) out << ',' << format_double(p.coefficients(j, c));
    out << ',' << format_double(p.variances[j]);
    if (with_proportions) out << ',' << format_double(p.proportions[j]);
    out << '\n';
  }
}

Json linear_json(const LinearMixtureParams& p) {
  Json j;
  Json coef = Json::array();
  for (Eigen::Index r = 0; r < p.coefficients.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < p.coefficients.cols(); ++c) row.push_back(p.coefficients(r, c));
    coef.push_back(row);
  }
  j["coefficients"] = coef;
  j["variances"] = std::vector<double>(p.variances.data(), p.variances.data() + p.variances.size());
  if (p.proportions.size() > 0) {
    j["proportions"] = std::vector<double>(p.proportions.data(), p.proportions.data() + p.proportions.size());
  }
  return j;
}

Json report_json(const BandwidthReport& r) {
  Json j;
  j["candidates"] = r.candidates;
  j["selected"] = r.selected;
  j["under"] = r.policy.under;
  j["appropriate"] = r.policy.appropriate;
  j["over"] = r.policy.over;
  j["failed_fold_fits"] = r.failures.size();
  return j;
}

void write_bandwidth_report(const fs::path& dir, const BandwidthReport& r) {
  auto triple = open_out(dir / "bandwidth.csv");
  triple << "selected,under,appropriate,over\n"
         << format_double(r.selected) << ',' << format_double(r.policy.under) << ','
         << format_double(r.policy.appropriate) << ',' << format_double(r.policy.over) << '\n';
  auto scores = open_out(dir / "cv_scores.csv");
  scores << "repetition,h,cv,dropped\n";
  for (Eigen::Index rep = 0; rep < r.cv_scores.rows(); ++rep) {
    for (Eigen::Index c = 0; c < r.cv_scores.cols(); ++c) {
      scores << rep + 1 << ',' << format_double(r.candidates[static_cast<std::size_t>(c)]) << ','
             << format_double(r.cv_scores(rep, c)) << ','
             << (r.dropped[static_cast<std::size_t>(c)] ? 1 : 0) << '\n';
    }
  }
}

std::vector<double> parse_number_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InputError(what + ": '" + item + "' is not a number");
    }
  }
  return out;
}

// ---- fit ------------------------------------------------------------------

struct FitArgs {
  DataArgs data;
  ModelArgs model;
  RunArgs run;
};

int cmd_fit(const FitArgs& a, const std::string& resolved_config) {
  validate(a.model, a.run, true);
  const LoadedData d = load_data(a.data);
  const ModelKind kind = model_kind(a.model.model);
  const fs::path dir = prepare_out(a.run.out);

  double h = a.model.h;
  std::optional<BandwidthReport> report;
  if (smooths(kind) && a.model.cv_bandwidth) {
    report = select_bandwidth(d, spec_of(a.model, 0.0), a.model, a.run, {});
    h = report->selected;
  }

  FitArtifact art;
  art.model = kind;
  art.k = kind == ModelKind::linear ? 1 : a.model.k;
  art.bandwidth = smooths(kind) ? h : 0.0;
  art.predictors = d.predictors;
  art.response = d.response;
  art.scaling = d.scaling;

  Json summary;
  summary["schema_version"] = kSchemaVersion;
  summary["command"] = "fit";
  summary["model"] = a.model.model;
  summary["k"] = art.k;
  summary["n"] = d.y.size();
  summary["predictors"] = d.predictors;
  summary["response"] = d.response;
  summary["standardized"] = d.scaling.enabled;
  if (smooths(kind)) {
    summary["bandwidth"] = h;
    summary["bandwidth_source"] = report ? "cv" : "given";
    if (report) summary["bandwidth_report"] = report_json(*report);
  }

  PosteriorMatrix posteriors;
  bool converged = true;
  const std::uint64_t fit_seed = substream_seed(a.run.seed, "cli-fit");
  switch (kind) {
    case ModelKind::msim: {
      MsimOptions o;
      o.mode = msim_mode(a.model.mode);
      o.grid_size = a.model.grid_n;
      o.seed = fit_seed;
      o.init_starts = a.model.starts;
      if (a.model.max_iter > 0) o.em.max_iter = a.model.max_iter;
      const MsimFit fit = stage("msim fit", [&] { return fit_msim(d.X, d.y, art.k, h, o); });
      art.index = fit.index.coefficients();
      art.curves = fit.curves;
      posteriors = fit.posteriors;
      converged = fit.converged;
      summary["mode"] = a.model.mode;
      summary["loglik"] = fit.loglik;
      summary["em_iterations"] = fit.em_iterations;
      summary["rounds"] = fit.rounds;
      summary["initial_index"] = std::vector<double>(fit.initial_index.coefficients().data(),
                                                     fit.initial_index.coefficients().data() + fit.initial_index.size());
      summary["notes"] = fit.notes;
      break;
    }
    case ModelKind::mrsip: {
      MrsipOptions o;
      o.grid_size = a.model.grid_n;
      o.seed = fit_seed;
      o.init_starts = a.model.starts;
      if (a.model.max_iter > 0) {
        o.curve_max_iter = a.model.max_iter;
        o.inner_em_max_iter = a.model.max_iter;
      }
      const MrsipFit fit = stage("mrsip fit", [&] { return fit_mrsip(d.X, d.y, art.k, h, o); });
      art.index = fit.index.coefficients();
      art.curves = fit.curves;
      art.linear = fit.linear;
      posteriors = fit.posteriors;
      converged = fit.converged;
      summary["loglik"] = fit.loglik;
      summary["rounds"] = fit.rounds;
      summary["alternations"] = fit.alternations;
      summary["linear"] = linear_json(fit.linear);
      summary["notes"] = fit.notes;
      break;
    }
    case ModelKind::mixlin:
    case ModelKind::linear: {
      MixLinOptions o;
      o.seed = fit_seed;
      o.starts = a.model.starts;
      if (a.model.max_iter > 0) o.max_iter = a.model.max_iter;
      const MixLinFit fit = stage("mixture-of-regressions fit", [&] { return fit_mixlinreg(d.X, d.y, art.k, o); });
      art.linear = fit.params;
      posteriors = fit.posteriors;
      converged = fit.converged;
      summary["loglik"] = fit.loglik;
      summary["iterations"] = fit.iterations;
      summary["failed_starts"] = fit.failed_starts;
      summary["linear"] = linear_json(fit.params);
      break;
    }
  }
  summary["converged"] = converged;

  std::vector<std::string> outputs{"summary.json", "fit.json", "posteriors.csv", "labels.csv", "config.toml"};
  if (smooths(kind)) {
    write_curves(dir, art.curves);
    write_index(dir, d, art.index);
    summary["index"] = std::vector<double>(art.index.data(), art.index.data() + art.index.size());
    if (d.scaling.enabled) {
      const Eigen::VectorXd o = original_scale_index(art.index, d.scaling);
      summary["index_original_scale"] = std::vector<double>(o.data(), o.data() + o.size());
    }
    outputs.push_back("curves.csv");
    outputs.push_back("index.csv");
  }
  if (kind != ModelKind::msim) {
    write_linear(dir, d, art.linear, kind != ModelKind::mrsip);
    outputs.push_back("linear_params.csv");
  }
  if (report) {
    write_bandwidth_report(dir, *report);
    outputs.push_back("bandwidth.csv");
    outputs.push_back("cv_scores.csv");
  }
  write_posteriors(dir, posteriors);
  save_artifact(art, (dir / "fit.json").string());
  summary["outputs"] = outputs;
  write_json(dir / "summary.json", summary);
  open_out(dir / "config.toml") << resolved_config;

  if (!converged) {
    std::cerr << "warning: the fit did not converge\n";
    if (a.run.strict) return kExitNotConverged;
  }
  return kExitOk;
}

// ---- predict --------------------------------------------------------------

struct PredictArgs {
  std::string fit;
  std::string data;
  bool with_response = false;
  std::string out = ".";
};

int cmd_predict(const PredictArgs& a, const std::string& resolved_config) {
  const FitArtifact art = load_artifact(a.fit);
  const NumericColumns table = to_numeric(read_csv_file(a.data), a.data);
  Eigen::MatrixXd X(table.values.rows(), static_cast<Eigen::Index>(art.predictors.size()));
  for (std::size_t c = 0; c < art.predictors.size(); ++c) {
    X.col(static_cast<Eigen::Index>(c)) = table.values.col(column_of(table.names, art.predictors[c], a.data));
  }
  std::optional<Eigen::VectorXd> y;
  if (a.with_response) y = table.values.col(column_of(table.names, art.response, a.data));
  const Prediction p = stage("prediction", [&] { return predict_artifact(art, X, y); });

  const fs::path dir = prepare_out(a.out);
  auto out = open_out(dir / "predictions.csv");
  out << "row,yhat";
  for (Eigen::Index j = 0; j < p.posteriors.cols(); ++j) out << ",p" << j + 1;
  out << ",label\n";
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out << i + 1 << ',' << format_double(p.fitted[i]);
    for (Eigen::Index j = 0; j < p.posteriors.cols(); ++j) out << ',' << format_double(p.posteriors(i, j));
    out << ',' << p.labels[static_cast<std::size_t>(i)] + 1 << '\n';
  }
  Json summary;
  summary["schema_version"] = kSchemaVersion;
  summary["command"] = "predict";
  summary["model"] = std::string(to_string(art.model));
  summary["rows"] = X.rows();
  summary["used_response"] = a.with_response;
  summary["outputs"] = {"predictions.csv", "summary.json", "config.toml"};
  write_json(dir / "summary.json", summary);
  open_out(dir / "config.toml") << resolved_config;
  return kExitOk;
}

// ---- cv -------------------------------------------------------------------

struct CvArgs {
  DataArgs data;
  ModelArgs model;
  RunArgs run;
  std::string candidates = "auto";
};

int cmd_cv(const CvArgs& a, const std::string& resolved_config) {
  validate(a.model, a.run, false);
  const ModelKind kind = model_kind(a.model.model);
  if (!smooths(kind)) throw InputError("cv selects bandwidths for msim and mrsip models only");
  std::vector<double> candidates;
  if (a.candidates != "auto") candidates = parse_number_list(a.candidates, "--candidates");
  const LoadedData d = load_data(a.data);
  const BandwidthReport r = select_bandwidth(d, spec_of(a.model, 0.0), a.model, a.run, candidates);
  const fs::path dir = prepare_out(a.run.out);
  write_bandwidth_report(dir, r);
  Json summary;
  summary["schema_version"] = kSchemaVersion;
  summary["command"] = "cv";
  summary["model"] = a.model.model;
  summary["k"] = a.model.k;
  summary["n"] = d.y.size();
  summary["folds"] = a.model.cv_folds;
  summary["repetitions"] = a.model.cv_reps;
  summary["bandwidth_report"] = report_json(r);
  summary["per_repetition"] = r.per_repetition;
  summary["failures"] = r.failures;
  summary["outputs"] = {"bandwidth.csv", "cv_scores.csv", "summary.json", "config.toml"};
  write_json(dir / "summary.json", summary);
  open_out(dir / "config.toml") << resolved_config;
  return kExitOk;
}

// ---- compare --------------------------------------------------------------

struct CompareArgs {
  DataArgs data;
  ModelArgs model;
  RunArgs run;
  std::vector<std::string> models{"msim", "mrsip", "mixlin", "linear"};
  bool mccv = false;
  bool dfold = false;
  int d = 10;
  int reps = 500;
  int folds = 10;
};

int cmd_compare(const CompareArgs& a, const std::string& resolved_config) {
  validate(a.model, a.run, false);
  if (a.mccv == a.dfold) throw InputError("choose exactly one of --mccv and --dfold");
  if (a.models.empty()) throw InputError("--models is empty");
  std::vector<ModelKind> kinds;
  for (const auto& m : a.models) kinds.push_back(model_kind(m));
  const bool any_smooth = std::any_of(kinds.begin(), kinds.end(), smooths);
  if (any_smooth && !a.model.cv_bandwidth && !(a.model.h > 0.0)) {
    throw InputError("msim and mrsip need --h or --cv-bandwidth");
  }
  if (a.mccv && a.reps < 1) throw InputError("--reps must be at least 1");
  const LoadedData d = load_data(a.data);

  Json bandwidths = Json::object();
  std::vector<ModelSpec> specs;
  for (std::size_t m = 0; m < kinds.size(); ++m) {
    ModelArgs ma = a.model;
    ma.model = a.models[m];
    double h = a.model.h;
    if (smooths(kinds[m]) && a.model.cv_bandwidth) {
      h = select_bandwidth(d, spec_of(ma, 0.0), ma, a.run, {}).selected;
    }
    if (smooths(kinds[m])) bandwidths[a.models[m]] = h;
    specs.push_back(spec_of(ma, h));
  }
  CompareOptions o;
  o.seed = substream_seed(a.run.seed, "cli-compare");
  o.workers = a.run.workers;
  const PredictionComparison cmp =
      a.mccv ? stage("mccv comparison", [&] { return mccv_compare(d.X, d.y, specs, a.d, a.reps, o); })
             : stage("d-fold comparison", [&] { return dfold_compare(d.X, d.y, specs, a.folds, o); });

  const fs::path dir = prepare_out(a.run.out);
  auto out = open_out(dir / "mspe.csv");
  out << "split";
  for (const auto& m : cmp.models) out << ',' << csv_field(m);
  out << '\n';
  for (std::size_t s = 0; s < cmp.splits(); ++s) {
    out << s + 1;
    for (std::size_t m = 0; m < cmp.models.size(); ++m) out << ',' << format_double(cmp.mspe[m][s]);
    out << '\n';
  }
  Json summary;
  summary["schema_version"] = kSchemaVersion;
  summary["command"] = "compare";
  summary["split"] = a.mccv ? Json{{"kind", "mccv"}, {"test_size", a.d}, {"repetitions", a.reps}}
                            : Json{{"kind", "dfold"}, {"folds", a.folds}};
  summary["bandwidths"] = bandwidths;
  Json models = Json::array();
  for (std::size_t m = 0; m < cmp.models.size(); ++m) {
    models.push_back({{"model", cmp.models[m]},
                      {"median_mspe", cmp.median(m)},
                      {"mean_mspe", cmp.mean(m)},
                      {"failures", cmp.failures[m]}});
  }
  summary["models"] = models;
  summary["failure_messages"] = cmp.failure_messages;
  summary["outputs"] = {"mspe.csv", "summary.json", "config.toml"};
  write_json(dir / "summary.json", summary);
  open_out(dir / "config.toml") << resolved_config;
  return kExitOk;
}

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
  int example = 1;
  std::vector<std::size_t> n{400};
  int reps = 100;
  std::vector<std::string> estimators;
  std::vector<std::string> policies{"appropriate"};
  std::vector<std::string> h_hat;  // n:h
  std::vector<std::string> os_h;   // n:h
  int pilot_reps = 5;
  std::size_t grid_n = kDefaultGridSize;
  bool records = false;
  bool timing = false;
  RunArgs run;
};

std::map<std::size_t, double> parse_bandwidth_map(const std::vector<std::string>& items,
                                                  const std::string& flag) {
  std::map<std::size_t, double> out;
  for (const auto& item : items) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw InputError(flag + " expects n:h, got '" + item + "'");
    try {
      std::size_t used_n = 0, used_h = 0;
      const std::string ns = item.substr(0, colon), hs = item.substr(colon + 1);
      const unsigned long n = std::stoul(ns, &used_n);
      const double h = std::stod(hs, &used_h);
      if (used_n != ns.size() || used_h != hs.size() || !(h > 0.0)) throw std::invalid_argument(item);
      out[n] = h;
    } catch (const std::exception&) {
      throw InputError(flag + " expects n:h with h > 0, got '" + item + "'");
    }
  }
  return out;
}

Policy parse_policy(const std::string& name) {
  if (name == "under") return Policy::under;
  if (name == "appropriate") return Policy::appropriate;
  if (name == "over") return Policy::over;
  throw InputError("unknown bandwidth policy '" + name + "' (under, appropriate, over)");
}

int cmd_simulate(const SimulateArgs& a, const std::string& resolved_config) {
  if (a.example != 1 && a.example != 2) throw InputError("--example must be 1 or 2");
  if (a.reps < 1) throw InputError("--reps must be at least 1");
  if (a.run.workers < 1) throw InputError("--workers must be at least 1");
  if (a.grid_n < 2) throw InputError("--grid-n must be at least 2");
  ReplicationConfig c;
  c.example = a.example;
  c.n_values = a.n;
  c.replications = a.reps;
  for (const auto& e : a.estimators) {
    const auto est = parse_estimator(e);
    if (!est) throw InputError("unknown estimator '" + e + "'");
    c.estimators.push_back(*est);
  }
  c.policies.clear();
  for (const auto& p : a.policies) c.policies.push_back(parse_policy(p));
  c.h_hat = parse_bandwidth_map(a.h_hat, "--h-hat");
  c.os_bandwidth = parse_bandwidth_map(a.os_h, "--os-h");
  c.pilot_repetitions = a.pilot_reps;
  c.seed = a.run.seed;
  c.workers = a.run.workers;
  c.grid_size = a.grid_n;

  ReplicationTable table;
  try {
    table = run_replications(c);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::invalid_argument) throw InputError(e.what());
    throw EstimationError(std::string("simulation failed: ") + e.what());
  }

  const fs::path dir = prepare_out(a.run.out);
  fs::create_directories(dir / "tables");
  std::vector<std::string> outputs;
  const auto emit = [&](const std::string& name, auto&& writer) {
    auto out = open_out(dir / name);
    writer(table, out);
    outputs.push_back(name);
  };
  emit("tables/cells.csv", [](const auto& t, auto& o) { write_cells_csv(t, o); });
  if (a.example == 1) {
    emit("tables/alpha_mse.csv", [](const auto& t, auto& o) { write_alpha_table_csv(t, o); });
    emit("tables/rase.csv", [](const auto& t, auto& o) { write_rase_table_csv(t, o); });
  } else {
    emit("tables/parameter_mse.csv", [](const auto& t, auto& o) { write_parameter_table_csv(t, o); });
    emit("tables/index_rase.csv", [](const auto& t, auto& o) { write_index_table_csv(t, o); });
  }
  emit("tables/tables.txt", [](const auto& t, auto& o) { write_table_text(t, o); });
  if (a.records) {
    emit("records.ndjson", [&](const auto& t, auto& o) { write_records_ndjson(t, o, a.timing); });
  }

  Json summary;
  summary["schema_version"] = kSchemaVersion;
  summary["command"] = "simulate";
  summary["example"] = a.example;
  summary["replications"] = a.reps;
  Json h = Json::object();
  for (const auto& [n, v] : table.h_hat) {
    const SmoothingPolicy p = smoothing_policy(v, n);
    h[std::to_string(n)] = {{"h_hat", v}, {"under", p.under}, {"appropriate", p.appropriate},
                            {"over", p.over}, {"one_step", table.os_bandwidth.at(n)}};
  }
  summary["bandwidths"] = h;
  int failed = 0;
  Json failures = Json::array();
  for (const auto& r : table.records) {
    if (r.ok) continue;
    ++failed;
    failures.push_back({{"n", r.n}, {"replication", r.replication},
                        {"estimator", estimator_key(r.estimator)}, {"policy", policy_name(r.policy)},
                        {"data_seed", r.data_seed}, {"error", r.error}});
  }
  summary["failed_fits"] = failed;
  summary["failures"] = failures;
  outputs.insert(outputs.end(), {"summary.json", "config.toml"});
  summary["outputs"] = outputs;
  write_json(dir / "summary.json", summary);
  open_out(dir / "config.toml") << resolved_config;
  write_table_text(table, std::cout);
  return kExitOk;
}

// ---- wiring ---------------------------------------------------------------

void add_data(CLI::App* app, DataArgs& d) {
  app->add_option("data", d.path, "input CSV with a header row")->required();
  app->add_option("--response", d.response, "response column name")->capture_default_str();
  app->add_option("--predictors", d.predictors, "predictor columns (default: all others)")->delimiter(',');
  app->add_flag("--standardize", d.standardize, "divide every column by its standard deviation");
}

void add_model(CLI::App* app, ModelArgs& m) {
  app->add_option("--model", m.model, "msim, mrsip, mixlin or linear")->capture_default_str();
  app->add_option("--k", m.k, "number of components")->capture_default_str();
  app->add_option("--h", m.h, "bandwidth")->capture_default_str();
  app->add_flag("--cv-bandwidth", m.cv_bandwidth, "select the bandwidth by repeated cross-validation");
  app->add_option("--grid-n", m.grid_n, "number of grid points")->capture_default_str();
  app->add_option("--mode", m.mode, "msim estimator: fib or one-step")->capture_default_str();
  app->add_option("--starts", m.starts, "random starts of the linear-mixture initializer")->capture_default_str();
  app->add_option("--cv-folds", m.cv_folds, "folds per CV repetition")->capture_default_str();
  app->add_option("--cv-reps", m.cv_reps, "CV repetitions")->capture_default_str();
  app->add_option("--max-iter", m.max_iter, "cap on EM iterations (0 keeps the model default)")
      ->capture_default_str();
}

void add_run(CLI::App* app, RunArgs& r) {
  app->add_option("--seed", r.seed, "master seed")->capture_default_str();
  app->add_option("--workers", r.workers, "worker threads")->capture_default_str();
  app->add_flag("--strict", r.strict, "exit with status 4 when a fit does not converge");
  app->add_option("--out", r.out, "output directory")->capture_default_str();
}

// The chosen subcommand's options as a TOML section that --config reads back.
// Unset list options are left out so that they keep their defaults.
std::string resolved_config(const CLI::App& sub) {
  std::istringstream in(sub.config_to_str(true, false));
  std::string text = "[" + sub.get_name() + "]\n";
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line.ends_with("=\"\"")) continue;
    text += line + '\n';
  }
  return text;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Mixtures of single-index models and of regressions with single-index proportions"};
  app.name("simix");
  app.set_help_flag("--help", "print this help message and exit");
  app.set_config("--config", "", "read options from a TOML or INI file; flags override it");
  app.require_subcommand(1, 1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "fit a model to CSV data");
  add_data(fit_cmd, fit.data);
  add_model(fit_cmd, fit.model);
  add_run(fit_cmd, fit.run);

  PredictArgs predict;
  auto* predict_cmd = app.add_subcommand("predict", "predict from a saved fit");
  predict_cmd->add_option("--fit", predict.fit, "fit.json written by the fit command")->required();
  predict_cmd->add_option("data", predict.data, "new data CSV")->required();
  predict_cmd->add_flag("--with-response", predict.with_response,
                        "use the response column for the responsibilities");
  predict_cmd->add_option("--out", predict.out, "output directory")->capture_default_str();

  CvArgs cv;
  auto* cv_cmd = app.add_subcommand("cv", "select a bandwidth by repeated cross-validation");
  add_data(cv_cmd, cv.data);
  add_model(cv_cmd, cv.model);
  add_run(cv_cmd, cv.run);
  cv_cmd->add_option("--candidates", cv.candidates, "'auto' or a comma-separated list")->capture_default_str();

  CompareArgs cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "compare models by prediction error");
  add_data(cmp_cmd, cmp.data);
  add_model(cmp_cmd, cmp.model);
  add_run(cmp_cmd, cmp.run);
  cmp_cmd->add_option("--models", cmp.models, "models to compare")->delimiter(',')->capture_default_str();
  cmp_cmd->add_flag("--mccv", cmp.mccv, "Monte-Carlo cross-validation");
  cmp_cmd->add_flag("--dfold", cmp.dfold, "d-fold cross-validation");
  cmp_cmd->add_option("--d", cmp.d, "MCCV test-set size")->capture_default_str();
  cmp_cmd->add_option("--reps", cmp.reps, "MCCV repetitions")->capture_default_str();
  cmp_cmd->add_option("--folds", cmp.folds, "number of folds for --dfold")->capture_default_str();

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "run the simulation study");
  sim_cmd->add_option("--example", sim.example, "1 (MSIM design) or 2 (MRSIP design)")->capture_default_str();
  sim_cmd->add_option("--n", sim.n, "sample sizes")->delimiter(',')->capture_default_str();
  sim_cmd->add_option("--reps", sim.reps, "replications per sample size")->capture_default_str();
  sim_cmd->add_option("--estimators", sim.estimators,
                      "sir, os, fib_sir (fib), fib_true, mrsip_sir (mrsip), mrsip_true, mixlin")
      ->delimiter(',');
  sim_cmd->add_option("--policies", sim.policies, "under, appropriate, over")->delimiter(',')->capture_default_str();
  sim_cmd->add_option("--h-hat", sim.h_hat, "CV bandwidth per sample size as n:h")->delimiter(',');
  sim_cmd->add_option("--os-h", sim.os_h, "one-step bandwidth per sample size as n:h")->delimiter(',');
  sim_cmd->add_option("--pilot-reps", sim.pilot_reps, "CV repetitions when --h-hat is missing")->capture_default_str();
  sim_cmd->add_option("--grid-n", sim.grid_n, "number of grid points")->capture_default_str();
  sim_cmd->add_flag("--records", sim.records, "write per-replication records as NDJSON");
  sim_cmd->add_flag("--timing", sim.timing, "include fit times in the records");
  add_run(sim_cmd, sim.run);

  std::vector<const char*> argv{"simix"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadInput;
  }

  CLI::App* used = app.get_subcommands().front();
  const std::string resolved = resolved_config(*used);
  try {
    if (fit_cmd->parsed()) return cmd_fit(fit, resolved);
    if (predict_cmd->parsed()) return cmd_predict(predict, resolved);
    if (cv_cmd->parsed()) return cmd_cv(cv, resolved);
    if (cmp_cmd->parsed()) return cmd_compare(cmp, resolved);
    if (sim_cmd->parsed()) return cmd_simulate(sim, resolved);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const EstimationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitEstimation;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return kExitEstimation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitBadInput;
}

}  // namespace simix::cli
