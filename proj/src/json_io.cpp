#include "lqrfit/json_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "lqrfit/errors.hpp"

namespace lqrfit {

namespace {

const Json& field(const Json& j, const char* key) {
  if (!j.is_object()) throw ValidationError("expected a JSON object");
  auto it = j.find(key);
  if (it == j.end()) {
    throw ValidationError(std::string("missing field '") + key + "'");
  }
  return *it;
}

void reject_unknown(const Json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw ValidationError("unknown key '" + item.key() + "' in " + where);
    }
  }
}

double number(const Json& j, const std::string& name) {
  if (!j.is_number()) throw ValidationError(name + " must be a number");
  return j.get<double>();
}

template <typename T>
T integer(const Json& j, const std::string& name) {
  if (!j.is_number_integer()) {
    throw ValidationError(name + " must be an integer");
  }
  if constexpr (std::is_unsigned_v<T>) {
    if (j.is_number_unsigned()) return j.get<T>();
    if (j.get<std::int64_t>() < 0) {
      throw ValidationError(name + " must be nonnegative");
    }
  }
  return j.get<T>();
}

bool boolean(const Json& j, const std::string& name) {
  if (!j.is_boolean()) throw ValidationError(name + " must be true or false");
  return j.get<bool>();
}

Matrix vectors_to_columns(const Json& j, const std::string& name) {
  if (!j.is_array()) throw ValidationError(name + " must be an array");
  // Rows of the nested array are the vectors, i.e. the columns of the result.
  if (j.empty()) return Matrix();
  return matrix_from_json(j, name).transpose();
}

Json columns_to_vectors(const Matrix& M) {
  Json out = Json::array();
  for (Eigen::Index c = 0; c < M.cols(); ++c) {
    Json v = Json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) v.push_back(M(r, c));
    out.push_back(std::move(v));
  }
  return out;
}

Json loss_to_json(const LossSpec& loss) {
  if (loss.kind == LossKind::kHuber) {
    return Json{{"kind", "huber"}, {"M", loss.huber_M}};
  }
  return Json{{"kind", "quadratic"}};
}

LossSpec loss_from_json(const Json& j) {
  const Json obj = j.is_string() ? Json{{"kind", j}} : j;
  if (!obj.is_object()) throw ValidationError("loss must be an object");
  reject_unknown(obj, {"kind", "M"}, "loss");
  const Json& kind = field(obj, "kind");
  if (!kind.is_string()) throw ValidationError("loss.kind must be a string");
  LossSpec loss;
  if (kind == "quadratic") {
    loss = LossSpec::quadratic();
  } else if (kind == "huber") {
    loss = LossSpec::huber(obj.contains("M") ? number(obj["M"], "loss.M")
                                             : 0.5);
  } else {
    throw ValidationError("unknown loss kind '" + kind.get<std::string>() +
                          "'");
  }
  loss.validate();
  return loss;
}

RegularizerSpec reg_from_json(const Json& j) {
  if (j.is_number()) return RegularizerSpec::ridge(number(j, "reg"));
  if (!j.is_object()) throw ValidationError("reg must be an object");
  reject_unknown(j, {"kind", "lambda"}, "reg");
  if (j.contains("kind") && j["kind"] != "ridge") {
    throw ValidationError("reg.kind must be \"ridge\"");
  }
  RegularizerSpec reg = RegularizerSpec::ridge(
      j.contains("lambda") ? number(j["lambda"], "reg.lambda") : 0.01);
  reg.validate();
  return reg;
}

AdmmConfig admm_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("admm must be an object");
  reject_unknown(j,
                 {"rho", "n_iter", "eps", "n_random_inits", "seed", "pqr_tol",
                  "pqr_max_iter"},
                 "admm");
  AdmmConfig c;
  if (j.contains("rho")) c.rho = number(j["rho"], "admm.rho");
  if (j.contains("n_iter")) c.n_iter = integer<int>(j["n_iter"], "admm.n_iter");
  if (j.contains("eps")) c.eps = number(j["eps"], "admm.eps");
  if (j.contains("n_random_inits")) {
    c.n_random_inits = integer<int>(j["n_random_inits"], "admm.n_random_inits");
  }
  if (j.contains("seed")) c.seed = integer<std::uint64_t>(j["seed"], "admm.seed");
  if (j.contains("pqr_tol")) c.pqr.tol = number(j["pqr_tol"], "admm.pqr_tol");
  if (j.contains("pqr_max_iter")) {
    c.pqr.max_iter = integer<int>(j["pqr_max_iter"], "admm.pqr_max_iter");
  }
  c.validate();
  return c;
}

Json admm_to_json(const AdmmConfig& c) {
  return Json{{"rho", c.rho},
              {"n_iter", c.n_iter},
              {"eps", c.eps},
              {"n_random_inits", c.n_random_inits},
              {"seed", c.seed},
              {"pqr_tol", c.pqr.tol},
              {"pqr_max_iter", c.pqr.max_iter}};
}

Json stats_to_json(const SummaryRow& row, bool mean) {
  Json out = Json::object();
  for (Method m : {Method::kPolicyFit, Method::kKalman, Method::kExpert,
                   Method::kOptimal}) {
    const MethodStats& s = row[m];
    const std::string key(to_string(m));
    if (!mean) {
      out[key] = s.fraction_finite;
    } else if (s.mean_cost) {
      out[key] = *s.mean_cost;
    } else {
      out[key] = nullptr;
    }
  }
  return out;
}

}  // namespace

Json matrix_to_json(const Matrix& M) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Matrix matrix_from_json(const Json& j, const std::string& name) {
  if (!j.is_array() || j.empty()) {
    throw ValidationError(name + " must be a nonempty array of rows");
  }
  const std::size_t rows = j.size();
  if (!j[0].is_array()) throw ValidationError(name + " rows must be arrays");
  const std::size_t cols = j[0].size();
  Matrix M(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const Json& row = j[r];
    if (!row.is_array() || row.size() != cols) {
      throw ValidationError(name + " is ragged at row " + std::to_string(r));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!row[c].is_number()) {
        throw ValidationError(name + " has a non-numeric entry");
      }
      M(r, c) = row[c].get<double>();
    }
  }
  return M;
}

Json dynamics_to_json(const LinearDynamics& dyn) {
  return Json{{"A", matrix_to_json(dyn.A())},
              {"B", matrix_to_json(dyn.B())},
              {"W", matrix_to_json(dyn.W())}};
}

LinearDynamics dynamics_from_json(const Json& j) {
  Matrix A = matrix_from_json(field(j, "A"), "A");
  Matrix B = matrix_from_json(field(j, "B"), "B");
  if (j.contains("W")) {
    return LinearDynamics(std::move(A), std::move(B),
                          matrix_from_json(j["W"], "W"));
  }
  return LinearDynamics(std::move(A), std::move(B));
}

SystemSetup setup_from_json(const Json& j) {
  reject_unknown(j, {"A", "B", "W", "Q", "R", "Sigma"}, "system");
  LinearDynamics dyn = dynamics_from_json(j);
  const Eigen::Index n = dyn.states();
  const Eigen::Index m = dyn.inputs();
  Matrix Q = j.contains("Q") ? matrix_from_json(j["Q"], "Q")
                             : Matrix::Identity(n, n);
  Matrix R = j.contains("R") ? matrix_from_json(j["R"], "R")
                             : Matrix::Identity(m, m);
  Matrix sigma = j.contains("Sigma") ? matrix_from_json(j["Sigma"], "Sigma")
                                     : Matrix::Identity(m, m);
  require_shape(sigma, m, m, "Sigma");
  return {std::move(dyn), CostMatrices(std::move(Q), std::move(R)),
          std::move(sigma)};
}

Json setup_to_json(const SystemSetup& sys) {
  Json out = dynamics_to_json(sys.dyn);
  out["Q"] = matrix_to_json(sys.cost.Q());
  out["R"] = matrix_to_json(sys.cost.R());
  out["Sigma"] = matrix_to_json(sys.input_noise);
  return out;
}

Json demos_to_json(const DemoSet& demos) {
  return Json{{"states", columns_to_vectors(demos.states())},
              {"inputs", columns_to_vectors(demos.inputs())}};
}

DemoSet demos_from_json(const Json& j) {
  reject_unknown(j, {"states", "inputs"}, "demonstrations");
  return DemoSet(vectors_to_columns(field(j, "states"), "states"),
                 vectors_to_columns(field(j, "inputs"), "inputs"));
}

Gain gain_from_json(const Json& j) {
  if (j.is_object()) return matrix_from_json(field(j, "K"), "K");
  return matrix_from_json(j, "K");
}

Json certificate_to_json(const KalmanCertificate& cert) {
  return Json{{"P", matrix_to_json(cert.P)},
              {"Q", matrix_to_json(cert.Q)},
              {"R", matrix_to_json(cert.R)},
              {"residual", cert.residual}};
}

KalmanCertificate certificate_from_json(const Json& j) {
  KalmanCertificate cert;
  cert.P = matrix_from_json(field(j, "P"), "P");
  cert.Q = matrix_from_json(field(j, "Q"), "Q");
  cert.R = matrix_from_json(field(j, "R"), "R");
  cert.residual = j.contains("residual") ? number(j["residual"], "residual")
                                         : 0.0;
  return cert;
}

Json to_json(const LqrSolution& sol) {
  return Json{{"K", matrix_to_json(sol.K)},
              {"P", matrix_to_json(sol.P)},
              {"iterations", sol.iterations},
              {"residual", sol.residual}};
}

Json to_json(const FitReport& report) {
  Json out{{"K", matrix_to_json(report.K)},
           {"objective", report.objective},
           {"loss", loss_to_json(report.loss)},
           {"reg", Json{{"kind", "ridge"}, {"lambda", report.reg.lambda}}}};
  return out;
}

Json to_json(const KalmanFitReport& report) {
  Json runs = Json::array();
  for (const AdmmRun& run : report.runs) {
    Json r{{"init_index", run.init_index},
           {"iterations", run.iterations},
           {"converged", run.converged}};
    if (run.failure.empty()) {
      r["objective"] = run.objective;
      r["residual"] = run.residual;
    } else {
      r["failure"] = run.failure;
    }
    runs.push_back(std::move(r));
  }
  return Json{{"K", matrix_to_json(report.K)},
              {"K_certified", matrix_to_json(report.K_certified)},
              {"P", matrix_to_json(report.certificate.P)},
              {"Q", matrix_to_json(report.certificate.Q)},
              {"R", matrix_to_json(report.certificate.R)},
              {"residual", report.certificate.residual},
              {"objective", report.objective},
              {"iterations", report.iterations},
              {"converged", report.converged},
              {"init_index", report.init_index},
              {"certified_certificate",
               certificate_to_json(report.certified_certificate)},
              {"q_shift", report.q_shift},
              {"runs", std::move(runs)}};
}

Json to_json(const FeasibilityReport& report) {
  Json out = certificate_to_json(report.certificate);
  out["feasible"] = report.feasible;
  out["tolerance"] = report.tolerance;
  out["iterations"] = report.iterations;
  return out;
}

ExperimentConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  reject_unknown(j,
                 {"experiment", "N_values", "seeds", "master_seed", "Sigma",
                  "outlier_prob", "loss", "reg", "admm", "dynamics_path",
                  "certify", "sampling"},
                 "config");
  ExperimentConfig c;
  if (j.contains("experiment")) {
    if (!j["experiment"].is_string()) {
      throw ValidationError("experiment must be a string");
    }
    c.experiment = parse_experiment_kind(j["experiment"].get<std::string>());
  }
  if (j.contains("N_values")) {
    if (!j["N_values"].is_array()) throw ValidationError("N_values must be an array");
    c.N_values.clear();
    for (const Json& v : j["N_values"]) c.N_values.push_back(integer<int>(v, "N_values"));
  }
  if (j.contains("seeds")) {
    if (!j["seeds"].is_array()) throw ValidationError("seeds must be an array");
    c.seeds.clear();
    for (const Json& v : j["seeds"]) {
      c.seeds.push_back(integer<std::int64_t>(v, "seeds"));
    }
  }
  if (j.contains("master_seed")) {
    c.master_seed = integer<std::uint64_t>(j["master_seed"], "master_seed");
  }
  if (j.contains("Sigma")) c.input_noise = matrix_from_json(j["Sigma"], "Sigma");
  if (j.contains("outlier_prob")) {
    c.outlier_prob = number(j["outlier_prob"], "outlier_prob");
  }
  if (j.contains("loss")) c.loss = loss_from_json(j["loss"]);
  if (j.contains("reg")) c.reg = reg_from_json(j["reg"]);
  if (j.contains("admm")) c.admm = admm_from_json(j["admm"]);
  if (j.contains("dynamics_path")) {
    if (!j["dynamics_path"].is_string()) {
      throw ValidationError("dynamics_path must be a string");
    }
    c.dynamics_path = j["dynamics_path"].get<std::string>();
  }
  if (j.contains("certify")) c.certify = boolean(j["certify"], "certify");
  if (j.contains("sampling")) {
    const Json& s = j["sampling"];
    if (s == "stationary") {
      c.sampling = StateSampling::kStationary;
    } else if (s == "standard_normal") {
      c.sampling = StateSampling::kStandardNormal;
    } else {
      throw ValidationError(
          "sampling must be \"stationary\" or \"standard_normal\"");
    }
  }
  c.validate();
  return c;
}

Json config_to_json(const ExperimentConfig& c) {
  Json out{{"experiment", std::string(to_string(c.experiment))},
           {"N_values", c.N_values},
           {"seeds", c.seeds},
           {"master_seed", c.master_seed}};
  if (c.input_noise) out["Sigma"] = matrix_to_json(*c.input_noise);
  out["outlier_prob"] = c.effective_outlier_prob();
  out["loss"] = loss_to_json(c.effective_loss());
  out["reg"] = Json{{"kind", "ridge"}, {"lambda", c.reg.lambda}};
  out["admm"] = admm_to_json(c.admm);
  if (!c.dynamics_path.empty()) out["dynamics_path"] = c.dynamics_path;
  out["certify"] = c.certify;
  out["sampling"] = c.sampling == StateSampling::kStationary
                        ? "stationary"
                        : "standard_normal";
  return out;
}

Json summary_to_json(const ExperimentResult& result) {
  Json per_n = Json::array();
  for (const SummaryRow& row : result.summary) {
    per_n.push_back(Json{{"N", row.N},
                         {"mean_cost", stats_to_json(row, true)},
                         {"fraction_finite", stats_to_json(row, false)}});
  }
  return Json{{"experiment", result.experiment}, {"per_N", std::move(per_n)}};
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace lqrfit
