#include "hdlm/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "hdlm/rng.hpp"

namespace hdlm {

void Dataset::validate() const {
  if (Y.size() != X.rows())
    throw std::invalid_argument("Dataset: Y length must equal the row count of X");
  if (X.rows() < 2) throw std::invalid_argument("Dataset: need n >= 2");
  if (X.cols() < 1) throw std::invalid_argument("Dataset: need p >= 1");
  if (!Y.allFinite() || !X.allFinite())
    throw std::invalid_argument("Dataset: non-finite entries");
}

BetaType beta_type_from_string(const std::string& s) {
  if (s == "I" || s == "i") return BetaType::I;
  if (s == "II" || s == "ii") return BetaType::II;
  if (s == "III" || s == "iii") return BetaType::III;
  if (s == "custom") return BetaType::Custom;
  throw std::invalid_argument("unknown beta_type: " + s);
}

std::string to_string(BetaType t) {
  switch (t) {
    case BetaType::I: return "I";
    case BetaType::II: return "II";
    case BetaType::III: return "III";
    default: return "custom";
  }
}

void CoefficientSpec::validate(int p) const {
  if (beta_I.size() != static_cast<Eigen::Index>(I.size()))
    throw std::invalid_argument("CoefficientSpec: |beta_I| must equal |I|");
  if (I.empty()) throw std::invalid_argument("CoefficientSpec: I must be non-empty");
  std::set<int> seen;
  for (int idx : I) {
    if (idx < 0 || idx >= p)
      throw std::invalid_argument("CoefficientSpec: index out of range 1..p");
    if (!seen.insert(idx).second)
      throw std::invalid_argument("CoefficientSpec: duplicate index in I");
  }
  if (!(tail_low < tail_high))
    throw std::invalid_argument("CoefficientSpec: tail_low must be < tail_high");
}

CoefficientSpec CoefficientSpec::preset(BetaType type, std::uint64_t seed) {
  CoefficientSpec spec;
  spec.beta_type = type;
  spec.seed = seed;
  switch (type) {
    case BetaType::I:
      spec.beta_I = (Eigen::VectorXd(7) << 1, 0.4, 0.3, 0.5, 0.3, 0.3, 0.3).finished();
      spec.I = {0, 1, 2, 3, 4, 5, 6};
      break;
    case BetaType::II:
      spec.beta_I = (Eigen::VectorXd(7) << 1, 0.4, 0.3, 0.5, 0.3, 0.3, 0.3).finished();
      spec.I = {0, 16, 32, 48, 64, 80, 96};
      break;
    case BetaType::III:
      spec.beta_I = (Eigen::VectorXd(7) << 1, 0.4, -0.3, -0.5, 0.3, 0.3, -0.3).finished();
      spec.I = {0, 1, 2, 3, 4, 5, 6};
      break;
    default:
      throw std::invalid_argument("preset: only types I, II, III have presets");
  }
  return spec;
}

Eigen::MatrixXd TrueModel::sigma_x() const {
  return make_toeplitz_cov(rho_corr, static_cast<int>(p()));
}

double TrueModel::r2() const { return theoretical_r2(beta, sigma_x(), sigma_eps); }

void SubmodelSplit::validate(int p) const {
  if (idx_Z.empty()) throw std::invalid_argument("SubmodelSplit: idx_Z must be non-empty");
  if (static_cast<int>(idx_Z.size() + idx_U.size()) != p)
    throw std::invalid_argument("SubmodelSplit: idx_Z and idx_U must partition 1..p");
  if (!std::is_sorted(idx_Z.begin(), idx_Z.end()) ||
      !std::is_sorted(idx_U.begin(), idx_U.end()))
    throw std::invalid_argument("SubmodelSplit: index sets must be sorted ascending");
  std::vector<char> hit(p, 0);
  for (int j : idx_Z) {
    if (j < 0 || j >= p || hit[j]) throw std::invalid_argument("SubmodelSplit: bad idx_Z");
    hit[j] = 1;
  }
  for (int j : idx_U) {
    if (j < 0 || j >= p || hit[j]) throw std::invalid_argument("SubmodelSplit: bad idx_U");
    hit[j] = 1;
  }
}

SubmodelSplit SubmodelSplit::from_selected(const std::vector<int>& selected, int p) {
  SubmodelSplit split;
  split.idx_Z = selected;
  std::sort(split.idx_Z.begin(), split.idx_Z.end());
  std::vector<char> in_z(p, 0);
  for (int j : split.idx_Z) {
    if (j < 0 || j >= p) throw std::invalid_argument("from_selected: index out of range");
    in_z[j] = 1;
  }
  for (int j = 0; j < p; ++j)
    if (!in_z[j]) split.idx_U.push_back(j);
  split.validate(p);
  return split;
}

Eigen::MatrixXd make_toeplitz_cov(double rho_corr, int p) {
  if (!(std::abs(rho_corr) < 1.0))
    throw std::invalid_argument("make_toeplitz_cov: need |rho_corr| < 1");
  if (p < 1) throw std::invalid_argument("make_toeplitz_cov: need p >= 1");
  Eigen::MatrixXd sigma(p, p);
  const double base = -rho_corr;
  for (int i = 0; i < p; ++i) {
    sigma(i, i) = 1.0;
    for (int j = i + 1; j < p; ++j) {
      const double v = std::pow(base, j - i);
      sigma(i, j) = v;
      sigma(j, i) = v;
    }
  }
  return sigma;
}

Eigen::VectorXd make_beta(const CoefficientSpec& spec, int p) {
  spec.validate(p);
  Eigen::VectorXd beta(p);
  CounterRng rng(spec.seed);
  std::vector<char> is_sig(p, 0);
  for (int j : spec.I) is_sig[j] = 1;
  // Tail draws are made in column order so the result only depends on the
  // seed, not on I's layout.
  for (int j = 0; j < p; ++j) {
    if (is_sig[j]) continue;
    const double u = spec.tail_low + (spec.tail_high - spec.tail_low) * rng.next_uniform();
    beta[j] = u < 0.0 ? 0.0 : u;
  }
  for (int k = 0; k < spec.S(); ++k) beta[spec.I[k]] = spec.beta_I[k];
  return beta;
}

Dataset simulate_dataset(const TrueModel& model, int n, std::uint64_t seed) {
  const int p = static_cast<int>(model.p());
  if (n < 2) throw std::invalid_argument("simulate_dataset: need n >= 2");
  if (model.mu.size() != p)
    throw std::invalid_argument("simulate_dataset: mu length must equal p");
  if (model.sigma_eps < 0)
    throw std::invalid_argument("simulate_dataset: sigma_eps must be >= 0");

  const Eigen::MatrixXd sigma = model.sigma_x();
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("simulate_dataset: covariance is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();

  CounterRng rng(seed);
  Dataset data;
  data.X = gaussian_matrix(rng, n, p) * L.transpose();
  data.X.rowwise() += model.mu.transpose();
  const Eigen::VectorXd eps = gaussian_vector(rng, n);
  data.Y = data.X * model.beta + model.sigma_eps * eps;
  return data;
}

double theoretical_r2(const Eigen::VectorXd& beta, const Eigen::MatrixXd& sigma_x,
                      double sigma_eps) {
  if (sigma_eps < 0) throw std::invalid_argument("theoretical_r2: sigma_eps must be >= 0");
  const double signal = beta.dot(sigma_x * beta);
  if (signal <= 0.0 && sigma_eps == 0.0)
    throw std::invalid_argument("theoretical_r2: undefined for beta = 0 and sigma_eps = 0");
  return signal / (signal + sigma_eps * sigma_eps);
}

double sigma_for_r2(const Eigen::VectorXd& beta, const Eigen::MatrixXd& sigma_x,
                    double target_r2) {
  if (!(target_r2 > 0.0 && target_r2 < 1.0))
    throw std::invalid_argument("sigma_for_r2: target_r2 must lie in (0, 1)");
  const double signal = beta.dot(sigma_x * beta);
  if (signal <= 0.0)
    throw std::invalid_argument("sigma_for_r2: beta' Sigma beta must be positive");
  return std::sqrt(signal * (1.0 - target_r2) / target_r2);
}

Eigen::VectorXd mu_zero_on_I(const std::vector<int>& I, int p, double mu_other) {
  Eigen::VectorXd mu = Eigen::VectorXd::Constant(p, mu_other);
  for (int j : I) {
    if (j < 0 || j >= p) throw std::invalid_argument("mu_zero_on_I: index out of range");
    mu[j] = 0.0;
  }
  return mu;
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& X, const std::vector<int>& cols) {
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    if (cols[k] < 0 || cols[k] >= X.cols())
      throw std::invalid_argument("select_columns: index out of range");
    out.col(static_cast<Eigen::Index>(k)) = X.col(cols[k]);
  }
  return out;
}

Eigen::VectorXd select_entries(const Eigen::VectorXd& v, const std::vector<int>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= v.size())
      throw std::invalid_argument("select_entries: index out of range");
    out[static_cast<Eigen::Index>(k)] = v[idx[k]];
  }
  return out;
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  int p = -1;
  {
    std::stringstream header(line);
    std::string tok;
    int cols = 0;
    while (std::getline(header, tok, ',')) ++cols;
    if (cols < 2) throw std::runtime_error(path + ": need header y,x1,...,xp");
    p = cols - 1;
  }
  std::vector<double> y;
  std::vector<double> x;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string tok;
    int col = 0;
    while (std::getline(row, tok, ',')) {
      double v = 0;
      try {
        v = std::stod(tok);
      } catch (const std::exception&) {
        throw std::runtime_error(path + ": bad numeric field '" + tok + "'");
      }
      if (col == 0)
        y.push_back(v);
      else
        x.push_back(v);
      ++col;
    }
    if (col != p + 1)
      throw std::runtime_error(path + ": row with wrong field count");
  }
  const int n = static_cast<int>(y.size());
  Dataset data;
  data.Y = Eigen::Map<Eigen::VectorXd>(y.data(), n);
  data.X = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      x.data(), n, p);
  data.validate();
  return data;
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
  data.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "y";
  for (Eigen::Index j = 0; j < data.p(); ++j) out << ",x" << (j + 1);
  out << "\n";
  char buf[32];
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", data.Y[i]);
    out << buf;
    for (Eigen::Index j = 0; j < data.p(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", data.X(i, j));
      out << "," << buf;
    }
    out << "\n";
  }
}

}  // namespace hdlm
