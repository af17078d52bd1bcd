#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace hdlm {

// Index convention: 0-based everywhere in memory. CSV files, config files,
// reports and CLI output use 1-based column indices; the conversion happens
// at the I/O boundary and nowhere else.

struct Dataset {
  Eigen::VectorXd Y;
  Eigen::MatrixXd X;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }

  // Throws std::invalid_argument on shape mismatch or non-finite entries.
  void validate() const;
};

enum class BetaType { I, II, III, Custom };

BetaType beta_type_from_string(const std::string& s);
std::string to_string(BetaType t);

// Significant coefficients plus the rule for the insignificant tail:
// beta_I goes to the positions in I, every other coordinate is drawn from
// U(tail_low, tail_high) with negative draws set to zero.
struct CoefficientSpec {
  Eigen::VectorXd beta_I;
  std::vector<int> I;  // 0-based positions, distinct
  BetaType beta_type = BetaType::Custom;
  double tail_low = -0.5;
  double tail_high = 0.15;
  std::uint64_t seed = 0;

  int S() const { return static_cast<int>(I.size()); }
  void validate(int p) const;

  // The three stock configurations (S = 7).
  static CoefficientSpec preset(BetaType type, std::uint64_t seed = 0);
};

// Gaussian design: rows of X are N(mu, Sigma) with Sigma the Toeplitz
// matrix (-rho_corr)^|i-j|, errors N(0, sigma_eps^2).
struct TrueModel {
  Eigen::VectorXd beta;
  double rho_corr = 0.0;
  Eigen::VectorXd mu;
  double sigma_eps = 0.0;

  Eigen::Index p() const { return beta.size(); }
  Eigen::MatrixXd sigma_x() const;
  double r2() const;
};

// Partition of the p columns into the working set and its complement.
struct SubmodelSplit {
  std::vector<int> idx_Z;  // selected, sorted ascending, non-empty
  std::vector<int> idx_U;  // complement, sorted ascending

  int q() const { return static_cast<int>(idx_Z.size()); }
  int l() const { return static_cast<int>(idx_U.size()); }
  void validate(int p) const;
  static SubmodelSplit from_selected(const std::vector<int>& selected, int p);
};

Eigen::MatrixXd make_toeplitz_cov(double rho_corr, int p);

Eigen::VectorXd make_beta(const CoefficientSpec& spec, int p);

Dataset simulate_dataset(const TrueModel& model, int n, std::uint64_t seed);

double theoretical_r2(const Eigen::VectorXd& beta, const Eigen::MatrixXd& sigma_x,
                      double sigma_eps);

// Inverts the R-square formula: sigma_eps = sqrt(beta' Sigma beta * (1 - r2) / r2).
double sigma_for_r2(const Eigen::VectorXd& beta, const Eigen::MatrixXd& sigma_x,
                    double target_r2);

// Mean-vector rule used by the simulation designs: 0 on the positions in I,
// mu_other everywhere else.
Eigen::VectorXd mu_zero_on_I(const std::vector<int>& I, int p, double mu_other = 2.0);

// Column extraction helpers for submodel work.
Eigen::MatrixXd select_columns(const Eigen::MatrixXd& X, const std::vector<int>& cols);
Eigen::VectorXd select_entries(const Eigen::VectorXd& v, const std::vector<int>& idx);

// CSV: header "y,x1,...,xp", first column Y, one row per observation.
Dataset read_dataset_csv(const std::string& path);
void write_dataset_csv(const std::string& path, const Dataset& data);

}  // namespace hdlm
