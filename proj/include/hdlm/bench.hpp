#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hdlm/config.hpp"
#include "hdlm/datamodel.hpp"

namespace hdlm {

struct LambdaMode {
  enum class Kind { GaussianSup, Fixed };
  Kind kind = Kind::GaussianSup;
  int m = 10;          // realizations for the Gaussian supremum rule
  double value = 0.0;  // fixed lambda_p

  static LambdaMode gaussian_sup(int m = 10);
  static LambdaMode fixed(double value);
  static LambdaMode parse(const std::string& text);
  std::string str() const;
};

struct ExperimentConfig {
  std::string id = "experiment";
  int n = 50;
  int p = 100;
  CoefficientSpec coef = CoefficientSpec::preset(BetaType::I);
  double rho_corr = 0.1;
  std::optional<double> target_r2;   // exactly one of target_r2 / sigma_eps
  std::optional<double> sigma_eps;
  int reps = 200;
  LambdaMode lambda;
  double varsigma = 0.5;
  bool use_sis = false;
  int d_keep = 0;                    // 0 selects the default n - 1
  int d_instr = 1;
  std::uint64_t seed = 0;
  int holdout_n = 200;
  double mu_other = 2.0;             // mean of the off-I covariates
  double bandwidth_scale = 0.0;      // 0 = rule of thumb

  int S() const { return coef.S(); }
  void validate() const;
};

struct RepRecord {
  bool ok = false;
  std::string fail_reason;
  double mse_hat = 0.0;
  double mse_S = 0.0;
  double pe_full = 0.0;
  double pe_sub = 0.0;
  double pe_ols = 0.0;
  std::vector<int> selected;  // 0-based
};

struct Aggregates {
  double mse_hat_mean = 0, mse_hat_sd = 0;
  double mse_S_mean = 0, mse_S_sd = 0;
  double pe_full_mean = 0, pe_full_sd = 0;
  double pe_sub_mean = 0, pe_sub_sd = 0;
  double pe_ols_mean = 0, pe_ols_sd = 0;
  int tau = 0;  // reps with pe_sub strictly below pe_ols
};

struct ExperimentReport {
  ExperimentConfig config;
  Eigen::VectorXd beta_true;
  std::uint64_t beta_seed = 0;
  double sigma_eps_used = 0.0;
  double r2_theoretical = 0.0;
  std::vector<RepRecord> reps;
  int n_ok = 0;
  int n_failed = 0;
  Aggregates agg;  // meaningful when n_ok > 0
};

// Runs the full pipeline reps times: simulate train/holdout, optionally
// screen, select lambda, Dantzig select and refit, build instruments, fit
// the corrected estimator, score MSE and the three prediction errors.
// Failed repetitions are recorded and excluded from the aggregates; more
// than 20% failures raises an error. Repetitions run on `parallel`
// threads; results do not depend on the thread count.
ExperimentReport run_experiment(const ExperimentConfig& config, int parallel = 1);

// Mean squared coordinate error over the selected set against the true
// coefficients restricted there.
double mse_against_truth(const Eigen::VectorXd& theta_est, const Eigen::VectorXd& beta_true,
                         const std::vector<int>& selected);

enum class TableFormat { Csv, Markdown };

// One table row per report: id, MSE(std) pairs, PE(std) triple, tau/reps,
// four decimals throughout.
std::string emit_table(const ExperimentReport& report, TableFormat format);
std::string emit_table(const std::vector<ExperimentReport>& reports, TableFormat format);

// Per-repetition records; the audit trail behind the aggregates.
std::string emit_per_rep_csv(const ExperimentReport& report);

// Config-file bindings.
ExperimentConfig experiment_from_config(const KeyValueConfig& cfg);

struct SimulationSpec {
  TrueModel model;
  int n = 0;
  std::uint64_t seed = 0;
};
SimulationSpec simulation_from_config(const KeyValueConfig& cfg);

}  // namespace hdlm
