#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "simix/mixlin.hpp"
#include "simix/msim.hpp"
#include "simix/selection.hpp"
#include "simix/smoothing.hpp"

namespace simix::cli {

inline constexpr int kSchemaVersion = 1;

// Column scales applied before fitting; ones when not standardized.
struct Scaling {
  bool enabled = false;
  Eigen::VectorXd predictor_sd;
  double response_sd = 1.0;
};

// Everything predict needs, serialized to fit.json.
struct FitArtifact {
  ModelKind model = ModelKind::msim;
  int k = 1;
  double bandwidth = 0.0;
  std::vector<std::string> predictors;
  std::string response;
  Scaling scaling;
  Eigen::VectorXd index;   // msim, mrsip
  CurveSet curves;         // msim (all families), mrsip (proportions)
  LinearMixtureParams linear;  // mrsip, mixlin, linear
};

nlohmann::ordered_json to_json(const FitArtifact& artifact);
FitArtifact artifact_from_json(const nlohmann::json& j);
void save_artifact(const FitArtifact& artifact, const std::string& path);
FitArtifact load_artifact(const std::string& path);

/// Predictions on the original scale of the data.
Prediction predict_artifact(const FitArtifact& artifact, const Eigen::MatrixXd& X,
                            const std::optional<Eigen::VectorXd>& y);

}  // namespace simix::cli
