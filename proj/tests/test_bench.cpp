#include <doctest.h>

#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "hdlm/bench.hpp"

using namespace hdlm;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.id = "small";
  cfg.n = 40;
  cfg.p = 20;
  cfg.coef = CoefficientSpec();
  cfg.coef.beta_I = (Eigen::VectorXd(2) << 2.0, -1.5).finished();
  cfg.coef.I = {0, 5};
  cfg.rho_corr = 0.1;
  cfg.sigma_eps = 0.3;
  cfg.reps = 4;
  cfg.seed = 31415;
  cfg.holdout_n = 60;
  return cfg;
}

}  // namespace

TEST_CASE("mse_against_truth is plain coordinate error") {
  Eigen::VectorXd beta(6);
  beta << 1, 2, 3, 4, 5, 6;
  Eigen::VectorXd est(3);
  est << 2, 4, 6;
  CHECK(mse_against_truth(est, beta, {1, 3, 5}) == doctest::Approx(0.0));

  est[1] = 4.1;  // one coordinate off by 0.1
  Eigen::VectorXd est4(4);
  est4 << 1, 2.1, 3, 4;
  CHECK(mse_against_truth(est4, beta, {0, 1, 2, 3}) == doctest::Approx(0.0025));

  // Order of the selection does not matter when the estimate follows it.
  Eigen::VectorXd swapped(4);
  swapped << 2.1, 1, 3, 4;
  CHECK(mse_against_truth(swapped, beta, {1, 0, 2, 3}) == doctest::Approx(0.0025));

  CHECK_THROWS_AS(mse_against_truth(Eigen::VectorXd(), beta, {}), std::invalid_argument);
  CHECK_THROWS_AS(mse_against_truth(est, beta, {1, 2}), std::invalid_argument);
}

TEST_CASE("experiment config validation") {
  ExperimentConfig cfg = small_config();
  CHECK_NOTHROW(cfg.validate());

  cfg.target_r2 = 0.9;  // both set
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.sigma_eps.reset();
  CHECK_NOTHROW(cfg.validate());
  cfg.target_r2.reset();  // neither set
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = small_config();
  cfg.reps = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("run_experiment aggregates are recomputable and deterministic") {
  const ExperimentConfig cfg = small_config();
  const ExperimentReport rep = run_experiment(cfg, 1);
  REQUIRE(rep.n_ok == 4);
  CHECK(rep.n_failed == 0);

  // Recompute the aggregates from the per-rep records.
  double mean = 0;
  for (const RepRecord& r : rep.reps) mean += r.mse_hat;
  mean /= rep.n_ok;
  double ss = 0;
  for (const RepRecord& r : rep.reps) ss += (r.mse_hat - mean) * (r.mse_hat - mean);
  CHECK(rep.agg.mse_hat_mean == doctest::Approx(mean).epsilon(1e-15));
  CHECK(rep.agg.mse_hat_sd == doctest::Approx(std::sqrt(ss / (rep.n_ok - 1))).epsilon(1e-15));

  int tau = 0;
  for (const RepRecord& r : rep.reps)
    if (r.ok && r.pe_sub < r.pe_ols) ++tau;
  CHECK(rep.agg.tau == tau);

  // Same seed, same report; thread count does not matter.
  const ExperimentReport rep2 = run_experiment(cfg, 1);
  const ExperimentReport rep4 = run_experiment(cfg, 4);
  CHECK(emit_table(rep, TableFormat::Csv) == emit_table(rep2, TableFormat::Csv));
  CHECK(emit_table(rep, TableFormat::Csv) == emit_table(rep4, TableFormat::Csv));
  CHECK(emit_per_rep_csv(rep) == emit_per_rep_csv(rep4));

  // A different seed genuinely changes the numbers.
  ExperimentConfig other = small_config();
  other.seed = 999;
  CHECK(emit_per_rep_csv(run_experiment(other, 1)) != emit_per_rep_csv(rep));
}

TEST_CASE("run_experiment aborts when most repetitions fail") {
  ExperimentConfig cfg = small_config();
  cfg.varsigma = 1e6;  // nothing survives the threshold -> empty selection
  CHECK_THROWS_WITH_AS(run_experiment(cfg, 1), doctest::Contains("repetitions failed"),
                       std::runtime_error);
}

TEST_CASE("emit_table formats") {
  const ExperimentReport rep = run_experiment(small_config(), 2);

  const std::string csv = emit_table(rep, TableFormat::Csv);
  std::istringstream in(csv);
  std::string header, row;
  std::getline(in, header);
  CHECK(header == "config,mse_hat,mse_S,pe_full,pe_sub,pe_ols,tau");
  REQUIRE(std::getline(in, row));

  // Round-trip: the printed aggregates match to the printed precision.
  std::istringstream cells(row);
  std::string cell;
  std::getline(cells, cell, ',');
  CHECK(cell == "small");
  std::getline(cells, cell, ',');
  const double mse_hat = std::stod(cell);  // "m(sd)" parses the mean part
  CHECK(std::abs(mse_hat - rep.agg.mse_hat_mean) <= 5e-5);
  const auto open = cell.find('(');
  REQUIRE(open != std::string::npos);
  const double sd = std::stod(cell.substr(open + 1));
  CHECK(std::abs(sd - rep.agg.mse_hat_sd) <= 5e-5);

  // Markdown renders one row per report plus two header lines.
  const std::string md = emit_table({rep, rep}, TableFormat::Markdown);
  int lines = 0;
  std::istringstream mdin(md);
  while (std::getline(mdin, row)) ++lines;
  CHECK(lines == 4);

  // Header-only when there is nothing aggregated.
  ExperimentReport empty;
  empty.config = small_config();
  CHECK(emit_table(empty, TableFormat::Csv) == "config,mse_hat,mse_S,pe_full,pe_sub,pe_ols,tau\n");
}

TEST_CASE("noiseless exactly sparse recovery is machine precision") {
  ExperimentConfig cfg;
  cfg.id = "noiseless";
  cfg.n = 50;
  cfg.p = 80;
  cfg.coef.beta_I = (Eigen::VectorXd(3) << 2.0, -1.5, 1.0).finished();
  cfg.coef.I = {0, 3, 9};
  cfg.coef.tail_low = -0.5;
  cfg.coef.tail_high = -0.1;  // every tail draw is negative, hence zero
  cfg.rho_corr = 0.1;
  cfg.sigma_eps = 0.0;
  cfg.reps = 1;
  cfg.seed = 4242;
  cfg.holdout_n = 50;

  const ExperimentReport rep = run_experiment(cfg, 1);
  REQUIRE(rep.n_ok == 1);
  CHECK(rep.reps[0].mse_hat <= 1e-6);
  CHECK(rep.reps[0].pe_full <= 1e-6);
  CHECK(rep.reps[0].pe_sub <= 1e-6);
  CHECK(rep.reps[0].pe_ols <= 1e-6);
}

TEST_CASE("experiment_from_config binds every field") {
  const std::string text = R"(
    id = demo
    n = 40
    p = 30
    beta_I = 1.5, -2
    I = 1, 7
    tail_low = -0.4
    tail_high = 0.1
    rho_corr = 0.2
    target_r2 = 0.9
    reps = 3
    lambda_mode = fixed:2.5
    varsigma = 0.3
    use_sis = true
    d_keep = 25
    d_instr = 1
    seed = 77
    holdout_n = 111
    mu_other = 1.5
  )";
  const ExperimentConfig cfg = experiment_from_config(KeyValueConfig::parse_string(text));
  CHECK(cfg.id == "demo");
  CHECK(cfg.n == 40);
  CHECK(cfg.p == 30);
  CHECK(cfg.coef.I == std::vector<int>({0, 6}));  // 1-based file, 0-based memory
  CHECK(cfg.coef.beta_I[1] == doctest::Approx(-2.0));
  CHECK(cfg.coef.tail_high == doctest::Approx(0.1));
  CHECK(cfg.rho_corr == doctest::Approx(0.2));
  REQUIRE(cfg.target_r2.has_value());
  CHECK(*cfg.target_r2 == doctest::Approx(0.9));
  CHECK(cfg.reps == 3);
  CHECK(cfg.lambda.kind == LambdaMode::Kind::Fixed);
  CHECK(cfg.lambda.value == doctest::Approx(2.5));
  CHECK(cfg.varsigma == doctest::Approx(0.3));
  CHECK(cfg.use_sis);
  CHECK(cfg.d_keep == 25);
  CHECK(cfg.seed == 77);
  CHECK(cfg.holdout_n == 111);
  CHECK(cfg.mu_other == doctest::Approx(1.5));

  CHECK_THROWS(experiment_from_config(
      KeyValueConfig::parse_string("n=40\np=30\nbeta_type=I\ntarget_r2=0.9\nS=3")));
  CHECK_THROWS(experiment_from_config(KeyValueConfig::parse_string("n=40\np=100\nbeta_type=I")));
  CHECK_THROWS(
      experiment_from_config(KeyValueConfig::parse_string("n=40\np=100\nbeta_type=I\ntarget_r2=0.9\nlambda_mode=weird")));
}

TEST_CASE("simulation_from_config builds the model") {
  const std::string text = R"(
    n = 25
    p = 10
    beta_I = 1, 0.5
    I = 1, 2
    sigma_eps = 0.2
    rho_corr = 0.3
    seed = 5
  )";
  const SimulationSpec spec = simulation_from_config(KeyValueConfig::parse_string(text));
  CHECK(spec.n == 25);
  CHECK(spec.model.p() == 10);
  CHECK(spec.model.beta[0] == doctest::Approx(1.0));
  CHECK(spec.model.mu[0] == 0.0);
  CHECK(spec.model.mu[5] == 2.0);
  CHECK(spec.model.sigma_eps == doctest::Approx(0.2));

  const Dataset d = simulate_dataset(spec.model, spec.n, spec.seed);
  CHECK(d.n() == 25);
  CHECK(d.p() == 10);
}
