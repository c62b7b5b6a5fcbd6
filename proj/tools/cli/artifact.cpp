#include "artifact.hpp"

#include <fstream>

#include "csv.hpp"
#include "simix/error.hpp"
#include "simix/mrsip.hpp"
#include "simix/sir.hpp"

namespace simix::cli {

namespace {

using Json = nlohmann::ordered_json;

Json vec(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json rows(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec(m.row(r).transpose()));
  return a;
}

Eigen::VectorXd read_vec(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) throw InputError(std::string("fit artifact: '") + what + "' must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

Eigen::MatrixXd read_rows(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.empty()) {
    throw InputError(std::string("fit artifact: '") + what + "' must be a non-empty array");
  }
  const std::size_t cols = j[0].size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      throw InputError(std::string("fit artifact: '") + what + "' rows differ in length");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

bool has_index(ModelKind m) { return m == ModelKind::msim || m == ModelKind::mrsip; }
bool has_linear(ModelKind m) { return m != ModelKind::msim; }

}  // namespace

nlohmann::ordered_json to_json(const FitArtifact& a) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["model"] = std::string(to_string(a.model));
  j["k"] = a.k;
  j["bandwidth"] = a.bandwidth;
  j["kernel"] = "gaussian";
  j["predictors"] = a.predictors;
  j["response"] = a.response;
  j["standardize"] = {{"enabled", a.scaling.enabled},
                      {"predictor_sd", vec(a.scaling.predictor_sd)},
                      {"response_sd", a.scaling.response_sd}};
  if (has_index(a.model)) {
    j["index"] = vec(a.index);
    j["grid"] = a.curves.grid.points();
    j["proportions"] = rows(a.curves.proportions);
    if (a.model == ModelKind::msim) {
      j["means"] = rows(a.curves.means);
      j["variances"] = rows(a.curves.variances);
    }
  }
  if (has_linear(a.model)) {
    j["linear"] = {{"intercept", a.linear.intercept},
                   {"coefficients", rows(a.linear.coefficients)},
                   {"variances", vec(a.linear.variances)},
                   {"proportions", vec(a.linear.proportions)}};
  }
  return j;
}

FitArtifact artifact_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema_version").get<int>() != kSchemaVersion) {
      throw InputError("fit artifact: unsupported schema_version " + j.at("schema_version").dump());
    }
    FitArtifact a;
    const auto model = parse_model_kind(j.at("model").get<std::string>());
    if (!model) throw InputError("fit artifact: unknown model " + j.at("model").dump());
    a.model = *model;
    a.k = j.at("k").get<int>();
    a.bandwidth = j.at("bandwidth").get<double>();
    a.predictors = j.at("predictors").get<std::vector<std::string>>();
    a.response = j.at("response").get<std::string>();
    const auto& s = j.at("standardize");
    a.scaling.enabled = s.at("enabled").get<bool>();
    a.scaling.predictor_sd = read_vec(s.at("predictor_sd"), "predictor_sd");
    a.scaling.response_sd = s.at("response_sd").get<double>();
    if (a.scaling.predictor_sd.size() != static_cast<Eigen::Index>(a.predictors.size())) {
      throw InputError("fit artifact: predictor_sd does not match the predictors");
    }
    if (has_index(a.model)) {
      a.index = read_vec(j.at("index"), "index");
      a.curves.grid = Grid(j.at("grid").get<std::vector<double>>());
      a.curves.proportions = read_rows(j.at("proportions"), "proportions");
      if (a.model == ModelKind::msim) {
        a.curves.means = read_rows(j.at("means"), "means");
        a.curves.variances = read_rows(j.at("variances"), "variances");
      }
      if (static_cast<std::size_t>(a.curves.proportions.rows()) != a.curves.grid.size() ||
          a.curves.proportions.cols() != a.k) {
        throw InputError("fit artifact: curve tables do not match the grid and k");
      }
    }
    if (has_linear(a.model)) {
      const auto& l = j.at("linear");
      a.linear.intercept = l.at("intercept").get<bool>();
      a.linear.coefficients = read_rows(l.at("coefficients"), "coefficients");
      a.linear.variances = read_vec(l.at("variances"), "variances");
      a.linear.proportions = read_vec(l.at("proportions"), "proportions");
    }
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("fit artifact: ") + e.what());
  } catch (const Error& e) {
    throw InputError(std::string("fit artifact: ") + e.what());
  }
}

void save_artifact(const FitArtifact& artifact, const std::string& path) {
  std::ofstream out(path);
  out << to_json(artifact).dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path);
}

FitArtifact load_artifact(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  return artifact_from_json(j);
}

Prediction predict_artifact(const FitArtifact& a, const Eigen::MatrixXd& X,
                            const std::optional<Eigen::VectorXd>& y) {
  Eigen::MatrixXd Xs = X;
  std::optional<Eigen::VectorXd> ys = y;
  if (a.scaling.enabled) {
    for (Eigen::Index c = 0; c < Xs.cols(); ++c) Xs.col(c) /= a.scaling.predictor_sd[c];
    if (ys) *ys /= a.scaling.response_sd;
  }
  Prediction p;
  switch (a.model) {
    case ModelKind::msim: {
      MsimFit fit;
      fit.index = normalize_index(a.index);
      fit.curves = a.curves;
      fit.bandwidth = a.bandwidth;
      p = predict_msim(fit, Xs, ys);
      break;
    }
    case ModelKind::mrsip: {
      MrsipFit fit;
      fit.index = normalize_index(a.index);
      fit.curves = a.curves;
      fit.linear = a.linear;
      fit.bandwidth = a.bandwidth;
      p = predict_mrsip(fit, Xs, ys);
      break;
    }
    case ModelKind::mixlin:
    case ModelKind::linear:
      p = predict_mixlin(a.linear, Xs, ys);
      break;
  }
  p.fitted *= a.scaling.response_sd;
  return p;
}

}  // namespace simix::cli
