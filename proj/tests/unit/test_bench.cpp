#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "lqrfit/bench.hpp"
#include "lqrfit/errors.hpp"
#include "lqrfit/json_io.hpp"
#include "lqrfit/riccati.hpp"

using namespace lqrfit;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.N_values = {2, 5};
  c.seeds = {0, 1};
  c.admm.n_iter = 40;
  c.admm.n_random_inits = 1;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("lqrfit_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_SUITE("bench") {

TEST_CASE("small random system") {
  for (std::uint64_t seed : {0u, 1u, 17u}) {
    SystemSetup s = build_small_random(seed);
    CHECK(s.dyn.A().rows() == 4);
    CHECK(s.dyn.B().rows() == 4);
    CHECK(s.dyn.B().cols() == 2);
    CHECK(std::abs(spectral_radius(s.dyn.A()) - 1.0) <= 1e-10);
    CHECK(s.dyn.W() == 0.25 * Matrix::Identity(4, 4));
    CHECK(s.input_noise == 4.0 * Matrix::Identity(2, 2));
    CHECK(s.cost.Q() == Matrix::Identity(4, 4));
    CHECK(s.cost.R() == Matrix::Identity(2, 2));
    SystemSetup t = build_small_random(seed);
    CHECK(s.dyn.A() == t.dyn.A());
    CHECK(s.dyn.B() == t.dyn.B());
  }
  CHECK(build_small_random(0).dyn.A() != build_small_random(1).dyn.A());
}

TEST_CASE("aircraft system") {
  SystemSetup s = build_aircraft();
  CHECK(s.dyn.A()(1, 2) == 7.74);
  CHECK(s.dyn.A()(0, 1) == 0.039);
  CHECK(s.dyn.A()(0, 3) == -0.322);
  CHECK(s.dyn.B()(0, 0) == 0.0001);
  CHECK(s.dyn.B()(2, 0) == -0.0116);
  CHECK(s.dyn.B()(2, 1) == 0.00598);
  CHECK(s.dyn.W()(3, 3) == 0.0);
  CHECK(s.input_noise == 25.0 * Matrix::Identity(2, 2));
  Matrix printed = aircraft_printed_disturbance();
  CHECK(printed(0, 0) == 0.100);
  CHECK(printed(0, 1) == -0.003);
  CHECK(printed(1, 2) == -0.010);
  CHECK(printed(2, 2) == 0.001);
  // The printed matrix is slightly indefinite; the model uses its nearest
  // PSD neighbour.
  CHECK(min_eigenvalue(printed) < 0.0);
  CHECK(min_eigenvalue(s.dyn.W()) >= -1e-14);
  CHECK((s.dyn.W() - printed).norm() <= 1e-4);
  CHECK(s.dyn.controllable());
  CHECK(spectral_radius(s.dyn.A()) > 1.0);
}

TEST_CASE("names and number formatting") {
  for (ExperimentKind k : {ExperimentKind::kSmallRandom, ExperimentKind::kAircraft,
                           ExperimentKind::kOutliers, ExperimentKind::kCustom}) {
    CHECK(parse_experiment_kind(to_string(k)) == k);
  }
  CHECK_THROWS_AS(parse_experiment_kind("nope"), ValidationError);
  CHECK(format_number(kInfiniteCost) == "inf");
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(2.0) == "2");
  CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("cell seeds are distinct") {
  std::set<std::uint64_t> seen;
  for (std::int64_t s = 0; s < 10; ++s)
    for (int N : {1, 2, 3})
      for (std::uint32_t stream : {0u, 1u}) seen.insert(cell_seed(0, s, N, stream));
  CHECK(seen.size() == 60);
  CHECK(cell_seed(1, 0, 1, 0) != cell_seed(0, 0, 1, 0));
}

TEST_CASE("config validation") {
  ExperimentConfig c;
  c.N_values.clear();
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = ExperimentConfig();
  c.seeds.clear();
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = ExperimentConfig();
  c.N_values = {0};
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = ExperimentConfig();
  c.outlier_prob = 1.5;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = ExperimentConfig();
  c.experiment = ExperimentKind::kCustom;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = ExperimentConfig();
  c.experiment = ExperimentKind::kOutliers;
  CHECK(c.effective_outlier_prob() == 0.1);
  CHECK(c.effective_loss().kind == LossKind::kHuber);
  CHECK(c.effective_loss().huber_M == 0.5);
  CHECK(ExperimentConfig().effective_loss().kind == LossKind::kQuadratic);
  CHECK(ExperimentConfig().reg.lambda == 0.01);
}

TEST_CASE("experiment tables") {
  const ExperimentConfig config = small_config();
  const auto dir = scratch_dir("tables");
  ExperimentResult r = run_experiment(config, dir);

  CHECK(r.rows.size() == 2 * 2 * 4);
  std::string csv = slurp(dir / "results.csv");
  CHECK(csv.rfind(std::string(kCsvHeader) + "\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 17);

  SystemSetup sys0 = build_small_random(0);
  for (const ResultRow& row : r.rows) {
    CHECK(row.error.empty());
    CHECK(row.finite == std::isfinite(row.cost));
    if (row.finite) {
      CHECK(row.spectral_radius < 1.0);
    } else {
      CHECK(row.spectral_radius >= 1.0 - 1e-9);
    }
    SystemSetup sys = row.seed == 0 ? sys0 : build_small_random(row.seed);
    if (row.method != Method::kExpert) {
      double again = closed_loop_cost(sys.dyn, sys.cost, row.gain);
      CHECK((again == row.cost || (std::isinf(again) && std::isinf(row.cost))));
    }
    CHECK(row.kalman_residual.has_value() == (row.method == Method::kKalman));
  }
  for (const SummaryRow& s : r.summary) {
    CHECK(s.kalman.fraction_finite == 1.0);
    CHECK(s.optimal.fraction_finite == 1.0);
    CHECK(*s.optimal.mean_cost < *s.expert.mean_cost);
  }

  Json summary = read_json_file(dir / "summary.json");
  CHECK(summary["experiment"] == "small_random");
  CHECK(summary["per_N"].size() == 2);
  CHECK(summary["per_N"][0]["N"] == 2);
  CHECK(summary["per_N"][1]["fraction_finite"]["kalman"] == 1.0);
  CHECK(summary["per_N"][0]["mean_cost"].contains("optimal"));

  const auto dir2 = scratch_dir("tables_again");
  run_experiment(config, dir2);
  CHECK(slurp(dir2 / "results.csv") == csv);
  CHECK(slurp(dir2 / "summary.json") == slurp(dir / "summary.json"));
}

TEST_CASE("custom and aircraft experiments") {
  const auto dir = scratch_dir("custom");
  std::filesystem::create_directories(dir);
  SystemSetup sys = build_small_random(3);
  write_json_file(dir / "system.json", setup_to_json(sys));
  ExperimentConfig c = small_config();
  c.experiment = ExperimentKind::kCustom;
  c.dynamics_path = (dir / "system.json").string();
  c.seeds = {0};
  c.N_values = {3};
  ExperimentResult r = run_experiment(c);
  REQUIRE(r.rows.size() == 4);
  CHECK(r.rows[3].cost == doctest::Approx(closed_loop_cost(sys.dyn, sys.cost,
                                                           solve_lqr(sys.dyn, sys.cost).K)));

  ExperimentConfig a = small_config();
  a.experiment = ExperimentKind::kAircraft;
  a.seeds = {0};
  a.N_values = {4};
  ExperimentResult ra = run_experiment(a);
  REQUIRE(ra.rows.size() == 4);
  CHECK(ra.rows[0].experiment == "aircraft");
  CHECK(ra.rows[3].finite);
}

TEST_CASE("outliers experiment uses Huber and flips") {
  ExperimentConfig c = small_config();
  c.experiment = ExperimentKind::kOutliers;
  c.seeds = {0};
  c.N_values = {20};
  ExperimentResult r = run_experiment(c);
  REQUIRE(r.rows.size() == 4);
  CHECK(r.rows[0].experiment == "outliers");
  CHECK(r.rows[1].finite);
}

}  // TEST_SUITE

TEST_SUITE("bench_scale") {

TEST_CASE("kalman cost approaches the optimum at large N") {
  ExperimentConfig c;
  c.N_values = {1000};
  c.seeds.clear();
  for (int s = 0; s < 20; ++s) c.seeds.push_back(s);
  ExperimentResult r = run_experiment(c);
  const SummaryRow& s = r.summary.at(0);
  REQUIRE(s.kalman.mean_cost.has_value());
  MESSAGE("N=1000 mean kalman ", *s.kalman.mean_cost, " optimal ", *s.optimal.mean_cost);
  CHECK(s.kalman.fraction_finite == 1.0);
  CHECK(*s.kalman.mean_cost <= 1.25 * *s.optimal.mean_cost);
}

}  // TEST_SUITE
