#pragma once

#include <filesystem>

#include <json.hpp>

#include "lqrfit/bench.hpp"
#include "lqrfit/fitting.hpp"
#include "lqrfit/kalman_fit.hpp"
#include "lqrfit/riccati.hpp"

namespace lqrfit {

using Json = nlohmann::ordered_json;

/// Row-major nested arrays. Parsing throws ValidationError on ragged or
/// non-numeric input.
Json matrix_to_json(const Matrix& M);
Matrix matrix_from_json(const Json& j, const std::string& name);

/// {"A": ..., "B": ..., "W": ...}; W may be omitted (zero).
Json dynamics_to_json(const LinearDynamics& dyn);
LinearDynamics dynamics_from_json(const Json& j);

/// Dynamics plus optional "Q", "R" (default I) and "Sigma" (default I).
SystemSetup setup_from_json(const Json& j);
Json setup_to_json(const SystemSetup& sys);

/// {"states": [x^1, ...], "inputs": [u^1, ...]}, one vector per demo.
Json demos_to_json(const DemoSet& demos);
DemoSet demos_from_json(const Json& j);

/// Either a bare matrix or an object with a "K" field.
Gain gain_from_json(const Json& j);

Json certificate_to_json(const KalmanCertificate& cert);
KalmanCertificate certificate_from_json(const Json& j);

Json to_json(const LqrSolution& sol);
Json to_json(const FitReport& report);
Json to_json(const KalmanFitReport& report);
Json to_json(const FeasibilityReport& report);

/// Keys mirror ExperimentConfig; unknown keys are rejected.
ExperimentConfig config_from_json(const Json& j);
Json config_to_json(const ExperimentConfig& config);

/// {"experiment": ..., "per_N": [{"N", "mean_cost", "fraction_finite"}]}.
/// A mean over zero finite costs is null.
Json summary_to_json(const ExperimentResult& result);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace lqrfit
