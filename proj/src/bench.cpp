#include "lqrfit/bench.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>

#include "lqrfit/errors.hpp"
#include "lqrfit/fitting.hpp"
#include "lqrfit/json_io.hpp"
#include "lqrfit/riccati.hpp"

namespace lqrfit {

namespace {

Matrix standard_normal(std::mt19937_64& rng, Eigen::Index rows,
                       Eigen::Index cols) {
  std::normal_distribution<double> normal;
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] = normal(rng);
  return M;
}

}  // namespace

SystemSetup build_small_random(std::uint64_t seed) {
  constexpr Eigen::Index n = 4;
  constexpr Eigen::Index m = 2;
  std::mt19937_64 rng(seed);
  Matrix A;
  Matrix B;
  double radius = 0.0;
  do {
    A = standard_normal(rng, n, n);
    B = standard_normal(rng, n, m);
    radius = spectral_radius(A);
  } while (radius < 1e-12);
  A /= radius;
  return {LinearDynamics(std::move(A), std::move(B),
                         0.25 * Matrix::Identity(n, n)),
          CostMatrices(Matrix::Identity(n, n), Matrix::Identity(m, m)),
          4.0 * Matrix::Identity(m, m)};
}

Matrix aircraft_printed_disturbance() {
  Matrix W(4, 4);
  W << 0.100, -0.003, 0.002, 0.0,
      -0.003, 0.1, -0.010, 0.0,
       0.002, -0.010, 0.001, 0.0,
       0.0, 0.0, 0.0, 0.0;
  return W;
}

SystemSetup build_aircraft() {
  // States (u, v, q, theta); inputs (elevator, thrust).
  Matrix A(4, 4);
  A << 1.0, 0.039, 0.0, -0.322,
      -0.065, 0.997, 7.74, 0.0,
       0.02, -0.101, 0.996, 0.0,
       0.0, 0.0, 1.0, 1.0;
  Matrix B(4, 2);
  B << 0.0001, 0.0,
      -0.0018, -0.0004,
      -0.0116, 0.00598,
       0.0, 0.0;
  return {LinearDynamics(std::move(A), std::move(B),
                         project_psd(aircraft_printed_disturbance(), 0.0)),
          CostMatrices(Matrix::Identity(4, 4), Matrix::Identity(2, 2)),
          25.0 * Matrix::Identity(2, 2)};
}

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kSmallRandom: return "small_random";
    case ExperimentKind::kAircraft: return "aircraft";
    case ExperimentKind::kOutliers: return "outliers";
    case ExperimentKind::kCustom: return "custom";
  }
  return "unknown";
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::kPolicyFit: return "pf";
    case Method::kKalman: return "kalman";
    case Method::kExpert: return "expert";
    case Method::kOptimal: return "optimal";
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(std::string_view name) {
  for (ExperimentKind kind :
       {ExperimentKind::kSmallRandom, ExperimentKind::kAircraft,
        ExperimentKind::kOutliers, ExperimentKind::kCustom}) {
    if (name == to_string(kind)) return kind;
  }
  throw ValidationError("unknown experiment '" + std::string(name) + "'");
}

double ExperimentConfig::effective_outlier_prob() const {
  if (outlier_prob) return *outlier_prob;
  return experiment == ExperimentKind::kOutliers ? 0.1 : 0.0;
}

LossSpec ExperimentConfig::effective_loss() const {
  if (loss) return *loss;
  return experiment == ExperimentKind::kOutliers ? LossSpec::huber(0.5)
                                                 : LossSpec::quadratic();
}

void ExperimentConfig::validate() const {
  if (N_values.empty()) throw ValidationError("N_values must be nonempty");
  if (seeds.empty()) throw ValidationError("seeds must be nonempty");
  for (int N : N_values) {
    if (N < 1) throw ValidationError("every N must be positive");
  }
  const double p = effective_outlier_prob();
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ValidationError("outlier_prob must lie in [0, 1]");
  }
  effective_loss().validate();
  reg.validate();
  admm.validate();
  if (experiment == ExperimentKind::kCustom && dynamics_path.empty()) {
    throw ValidationError("custom experiment needs dynamics_path");
  }
}

const MethodStats& SummaryRow::operator[](Method method) const {
  switch (method) {
    case Method::kPolicyFit: return pf;
    case Method::kKalman: return kalman;
    case Method::kExpert: return expert;
    case Method::kOptimal: break;
  }
  return optimal;
}

std::uint64_t cell_seed(std::uint64_t master, std::int64_t seed, int N,
                        std::uint32_t stream) {
  const auto s = static_cast<std::uint64_t>(seed);
  std::seed_seq seq{static_cast<std::uint32_t>(master),
                    static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(s),
                    static_cast<std::uint32_t>(s >> 32),
                    static_cast<std::uint32_t>(N), stream};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (std::uint64_t(words[0]) << 32) | words[1];
}

namespace {

SystemSetup build_system(const ExperimentConfig& config, std::int64_t seed) {
  switch (config.experiment) {
    case ExperimentKind::kSmallRandom:
    case ExperimentKind::kOutliers:
      return build_small_random(static_cast<std::uint64_t>(seed));
    case ExperimentKind::kAircraft:
      return build_aircraft();
    case ExperimentKind::kCustom:
      return setup_from_json(read_json_file(config.dynamics_path));
  }
  throw ValidationError("unknown experiment");
}

ResultRow make_row(const ExperimentConfig& config, int N, std::int64_t seed,
                   Method method) {
  ResultRow row;
  row.experiment = std::string(to_string(config.experiment));
  row.N = N;
  row.seed = seed;
  row.method = method;
  return row;
}

void evaluate(ResultRow& row, const SystemSetup& sys, const Gain& K,
              const Matrix* input_noise = nullptr) {
  row.gain = K;
  row.spectral_radius = spectral_radius(sys.dyn.closed_loop(K));
  row.cost = input_noise
                 ? noisy_policy_cost(sys.dyn, sys.cost, K, *input_noise)
                 : closed_loop_cost(sys.dyn, sys.cost, K);
  row.finite = std::isfinite(row.cost);
}

std::vector<ResultRow> run_cell(const ExperimentConfig& config,
                                const SystemSetup& sys, const Gain& expert,
                                std::int64_t seed, int N) {
  const Matrix sigma = config.input_noise.value_or(sys.input_noise);
  const LossSpec loss = config.effective_loss();

  ResultRow pf = make_row(config, N, seed, Method::kPolicyFit);
  ResultRow kalman = make_row(config, N, seed, Method::kKalman);
  ResultRow noisy = make_row(config, N, seed, Method::kExpert);
  ResultRow optimal = make_row(config, N, seed, Method::kOptimal);

  evaluate(optimal, sys, expert);
  evaluate(noisy, sys, expert, &sigma);

  std::optional<DemoSet> demos;
  try {
    demos = generate_demos(sys.dyn, expert, sigma, N,
                           config.effective_outlier_prob(),
                           cell_seed(config.master_seed, seed, N, 0),
                           config.sampling);
  } catch (const Error& e) {
    pf.error = kalman.error = std::string("demo generation: ") + e.what();
  }

  if (demos) {
    try {
      const FitReport fit = policy_fit(*demos, loss, config.reg);
      pf.fit_objective = fit.objective;
      evaluate(pf, sys, fit.K);
    } catch (const Error& e) {
      pf.error = e.what();
    }
    try {
      AdmmConfig admm = config.admm;
      admm.seed = cell_seed(config.master_seed, seed, N, 1);
      const KalmanFitReport fit =
          fit_kalman(*demos, loss, config.reg, sys.dyn, admm);
      kalman.fit_objective = fit.objective;
      if (config.certify) {
        kalman.kalman_residual = fit.certified_certificate.residual;
        evaluate(kalman, sys, fit.K_certified);
      } else {
        kalman.kalman_residual = fit.certificate.residual;
        evaluate(kalman, sys, fit.K);
      }
    } catch (const Error& e) {
      kalman.error = e.what();
    }
  }
  return {std::move(pf), std::move(kalman), std::move(noisy),
          std::move(optimal)};
}

MethodStats stats_for(const std::vector<ResultRow>& rows, int N,
                      Method method) {
  MethodStats stats;
  double total = 0.0;
  int finite = 0;
  int count = 0;
  for (const ResultRow& row : rows) {
    if (row.N != N || row.method != method) continue;
    ++count;
    if (row.finite) {
      total += row.cost;
      ++finite;
    }
  }
  if (finite > 0) stats.mean_cost = total / finite;
  stats.fraction_finite = count > 0 ? double(finite) / count : 0.0;
  return stats;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult result;
  result.experiment = std::string(to_string(config.experiment));
  for (std::int64_t seed : config.seeds) {
    const SystemSetup sys = build_system(config, seed);
    const LqrSolution lqr = solve_lqr(sys.dyn, sys.cost);
    for (int N : config.N_values) {
      for (ResultRow& row : run_cell(config, sys, lqr.K, seed, N)) {
        result.rows.push_back(std::move(row));
      }
    }
  }
  for (int N : config.N_values) {
    SummaryRow summary;
    summary.N = N;
    summary.pf = stats_for(result.rows, N, Method::kPolicyFit);
    summary.kalman = stats_for(result.rows, N, Method::kKalman);
    summary.expert = stats_for(result.rows, N, Method::kExpert);
    summary.optimal = stats_for(result.rows, N, Method::kOptimal);
    result.summary.push_back(summary);
  }
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::filesystem::path& output_dir) {
  ExperimentResult result = run_experiment(config);
  std::filesystem::create_directories(output_dir);
  std::ofstream csv(output_dir / "results.csv", std::ios::binary);
  if (!csv) throw Error("cannot write " + (output_dir / "results.csv").string());
  write_csv(result, csv);
  write_json_file(output_dir / "summary.json", summary_to_json(result));
  return result;
}

std::string format_number(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (std::isnan(value)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void write_csv(const ExperimentResult& result, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const ResultRow& row : result.rows) {
    out << row.experiment << ',' << row.N << ',' << row.seed << ','
        << to_string(row.method) << ',' << format_number(row.cost) << ','
        << (row.finite ? "true" : "false") << ','
        << format_number(row.spectral_radius) << ',';
    if (row.kalman_residual) out << format_number(*row.kalman_residual);
    out << '\n';
  }
}

}  // namespace lqrfit
