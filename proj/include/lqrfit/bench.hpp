#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lqrfit/conic_ls.hpp"
#include "lqrfit/kalman_fit.hpp"
#include "lqrfit/linsys.hpp"

namespace lqrfit {

/// A test system: dynamics, the true stage cost and the expert's input noise.
struct SystemSetup {
  LinearDynamics dyn;
  CostMatrices cost;
  Matrix input_noise;
};

/// n = 4, m = 2, standard normal A and B with A rescaled to spectral radius
/// one; Q = R = I, W = 0.25 I, Sigma = 4 I. Nilpotent draws are resampled.
SystemSetup build_small_random(std::uint64_t seed);

/// Longitudinal 747 model at 40000 ft, 774 ft/s, sampled at 0.01 s.
/// Q = R = I, Sigma = 25 I. W is the nearest PSD matrix to
/// aircraft_printed_disturbance().
SystemSetup build_aircraft();

/// Wind covariance as published; it has one slightly negative eigenvalue.
Matrix aircraft_printed_disturbance();

enum class ExperimentKind { kSmallRandom, kAircraft, kOutliers, kCustom };
enum class Method { kPolicyFit, kKalman, kExpert, kOptimal };

std::string_view to_string(ExperimentKind kind);
std::string_view to_string(Method method);
ExperimentKind parse_experiment_kind(std::string_view name);

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::kSmallRandom;
  std::vector<int> N_values{1, 2, 3, 4, 5, 7, 10, 15, 20};
  std::vector<std::int64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  /// Mixed with (seed, N) to derive every per-cell random stream.
  std::uint64_t master_seed = 0;
  /// Overrides the system's Sigma when set.
  std::optional<Matrix> input_noise;
  /// Defaults to 0.1 for the outliers experiment and 0 otherwise.
  std::optional<double> outlier_prob;
  /// Defaults to Huber with M = 0.5 for the outliers experiment and
  /// quadratic otherwise.
  std::optional<LossSpec> loss;
  RegularizerSpec reg{0.01};
  AdmmConfig admm;
  /// JSON file with A, B, W and optionally Q, R, Sigma (custom only).
  std::string dynamics_path;
  /// Evaluate the Riccati re-solved gain for the kalman rows instead of the
  /// last ADMM iterate.
  bool certify = true;
  StateSampling sampling = StateSampling::kStationary;

  double effective_outlier_prob() const;
  LossSpec effective_loss() const;
  void validate() const;
};

struct ResultRow {
  std::string experiment;
  int N = 0;
  std::int64_t seed = 0;
  Method method = Method::kOptimal;
  double cost = kInfiniteCost;
  bool finite = false;
  double spectral_radius = kInfiniteCost;
  std::optional<double> kalman_residual;

  // Kept in memory only; not written to the CSV.
  Gain gain;
  std::optional<double> fit_objective;
  std::string error;
};

struct MethodStats {
  /// Mean over finite costs; empty when no cost was finite.
  std::optional<double> mean_cost;
  double fraction_finite = 0.0;
};

struct SummaryRow {
  int N = 0;
  MethodStats pf, kalman, expert, optimal;

  const MethodStats& operator[](Method method) const;
};

struct ExperimentResult {
  std::string experiment;
  std::vector<ResultRow> rows;
  std::vector<SummaryRow> summary;
};

/// Fits both methods on every (seed, N) cell and evaluates four policies:
/// plain fit, Kalman fit, the noisy expert and the optimal gain. Solver
/// failures inside a cell are recorded in the row.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Writes `results.csv` and `summary.json` into `output_dir`.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::filesystem::path& output_dir);

inline constexpr std::string_view kCsvHeader =
    "experiment,N,seed,method,cost,finite,spectral_radius,kalman_residual";

void write_csv(const ExperimentResult& result, std::ostream& out);

/// Shortest round-trip decimal form; "inf" for the infinite cost.
std::string format_number(double value);

/// Seed for the random stream of one experiment cell.
std::uint64_t cell_seed(std::uint64_t master, std::int64_t seed, int N,
                        std::uint32_t stream);

}  // namespace lqrfit
