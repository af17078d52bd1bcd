#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <Eigen/Dense>

#include "hdlm/bench.hpp"
#include "hdlm/config.hpp"
#include "hdlm/dantzig.hpp"
#include "hdlm/datamodel.hpp"
#include "hdlm/instruments.hpp"
#include "hdlm/plm.hpp"
#include "hdlm/rng.hpp"
#include "hdlm/screening.hpp"

namespace {

using hdlm::Dataset;
using hdlm::DantzigFit;

constexpr int kExitBadConfig = 2;
constexpr int kExitNumerical = 3;

struct BadConfig : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
}

std::string join_1based(const std::vector<int>& idx) {
  std::string s;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (k) s += ",";
    s += std::to_string(idx[k] + 1);
  }
  return s;
}

std::string vec_str(const Eigen::VectorXd& v) {
  std::string s;
  char buf[64];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    std::snprintf(buf, sizeof(buf), "%.10g", v[i]);
    s += buf;
  }
  return s;
}

// Selection stage shared by fit-dantzig and fit-post-dantzig: the tuning
// rule and the LP run on the centered unit-norm design, coefficients come
// back in raw scale, threshold and refit are raw.
struct SelectionResult {
  DantzigFit fit;
  double lambda_p;
};

SelectionResult run_selection(const Dataset& data, double sigma,
                              std::optional<double> lambda_fixed, int lambda_m,
                              double varsigma, std::uint64_t seed) {
  const Eigen::MatrixXd Xc = data.X.rowwise() - data.X.colwise().mean();
  const Eigen::VectorXd Yc = data.Y.array() - data.Y.mean();
  Eigen::VectorXd norms(data.p());
  Eigen::MatrixXd Xu = Xc;
  for (Eigen::Index j = 0; j < Xu.cols(); ++j) {
    norms[j] = Xu.col(j).norm();
    if (norms[j] > 0)
      Xu.col(j) /= norms[j];
    else
      norms[j] = 1.0;
  }
  SelectionResult out;
  out.lambda_p = lambda_fixed ? *lambda_fixed
                              : hdlm::select_lambda_gaussian(Xu, lambda_m, seed);
  const Eigen::VectorXd beta_raw =
      hdlm::dantzig_select(Xu, Yc, out.lambda_p, sigma).cwiseQuotient(norms);
  out.fit.beta_tilde = beta_raw;
  out.fit.lambda_p = out.lambda_p;
  out.fit.sigma = sigma;
  out.fit.varsigma = varsigma;
  std::tie(out.fit.active, out.fit.theta_tilde_S) =
      hdlm::gaussian_dantzig(data.X, data.Y, beta_raw, varsigma, sigma);
  return out;
}

std::string dantzig_report(const hdlm::DantzigFit& fit, const Dataset& data) {
  std::ostringstream out;
  out << "# dantzig fit report\n";
  out << "n = " << data.n() << "\n";
  out << "p = " << data.p() << "\n";
  out << "lambda_p = " << fit.lambda_p << "\n";
  out << "sigma = " << fit.sigma << "\n";
  out << "varsigma = " << fit.varsigma << "\n";
  out << "selection_standardized = true\n";
  out << "active = " << join_1based(fit.active) << "\n";
  out << "theta_tilde_S = " << vec_str(fit.theta_tilde_S) << "\n";
  const double gap =
      (data.X.transpose() * (data.Y - data.X * fit.beta_tilde)).lpNorm<Eigen::Infinity>();
  out << "raw_residual_sup = " << gap << "\n";
  return out.str();
}

std::string post_dantzig_report(const hdlm::DantzigFit& dfit, const hdlm::PostDantzigFit& fit,
                                const Dataset& data) {
  std::ostringstream out;
  out << "# post-dantzig fit report\n";
  out << "n = " << data.n() << "\n";
  out << "p = " << data.p() << "\n";
  out << "lambda_p = " << dfit.lambda_p << "\n";
  out << "sigma = " << dfit.sigma << "\n";
  out << "varsigma = " << dfit.varsigma << "\n";
  out << "selection_standardized = true\n";
  out << "active = " << join_1based(fit.split.idx_Z) << "\n";
  out << "theta_tilde_S = " << vec_str(dfit.theta_tilde_S) << "\n";
  out << "\n# instruments\n";
  out << "d = " << fit.plan.d << "\n";
  std::vector<int> u_cols_orig;
  for (int k : fit.plan.u_cols) u_cols_orig.push_back(fit.split.idx_U[k]);
  out << "u_cols = " << join_1based(u_cols_orig) << "\n";
  out << "alpha_source = " << fit.plan.alpha_source << "\n";
  out << "alpha = " << vec_str(fit.plan.alpha) << "\n";
  out << "rho = " << fit.plan.rho_scale << "\n";
  out << "lambda_M = " << fit.plan.lambda_M << "\n";
  for (Eigen::Index r = 0; r < fit.plan.A.rows(); ++r)
    out << "A_row_" << (r + 1) << " = " << vec_str(fit.plan.A.row(r).transpose()) << "\n";
  if (fit.plan.rank_warning)
    out << "warning = rank deficiency; instruments may be uninformative\n";
  out << "\n# corrected fit\n";
  out << "theta_hat = " << vec_str(fit.plm.theta_hat) << "\n";
  out << "sigma_V2_hat = " << fit.plm.sigma_V2_hat << "\n";
  out << "bandwidth_h = " << fit.plm.kernel.h << "\n";
  out << "bandwidth_scale = " << fit.plm.bandwidth_scale << "\n";
  out << "S_n_eigenvalues = " << vec_str(fit.plm.S_n_eigenvalues) << "\n";
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dantzig-selector submodel estimation with instrument-based bias correction"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "draw a synthetic dataset and write it as CSV");
  std::string sim_config, sim_out;
  std::uint64_t sim_seed = 0;
  bool sim_seed_set = false;
  sim->add_option("--config", sim_config, "model config file")->required();
  sim->add_option("--out", sim_out, "output CSV path")->required();
  sim->add_option("--seed", sim_seed, "RNG seed (overrides the config)")
      ->each([&](const std::string&) { sim_seed_set = true; });

  // screen
  auto* scr = app.add_subcommand("screen", "rank covariates by |corr(x_j, y)| and keep the best");
  std::string scr_data, scr_out;
  int scr_keep = 0;
  scr->add_option("--data", scr_data, "dataset CSV")->required();
  scr->add_option("--keep", scr_keep, "how many columns to keep")->required();
  scr->add_option("--out", scr_out, "output CSV path")->required();

  // fit-dantzig
  auto* fd = app.add_subcommand("fit-dantzig", "Dantzig selection plus least-squares refit");
  std::string fd_data, fd_out;
  double fd_sigma = 0;
  std::optional<double> fd_lambda;
  int fd_lambda_m = 10;
  double fd_varsigma = 1e-4;
  std::uint64_t fd_seed = 0;
  fd->add_option("--data", fd_data, "dataset CSV")->required();
  fd->add_option("--sigma", fd_sigma, "noise scale in the constraint")->required();
  auto* fd_lam = fd->add_option("--lambda", fd_lambda, "fixed lambda_p");
  fd->add_option("--lambda-gaussian", fd_lambda_m, "realizations for the Gaussian supremum rule")
      ->excludes(fd_lam);
  fd->add_option("--varsigma", fd_varsigma, "threshold multiplier");
  fd->add_option("--seed", fd_seed, "seed for the lambda rule");
  fd->add_option("--out", fd_out, "report path")->required();

  // fit-post-dantzig
  auto* fp = app.add_subcommand("fit-post-dantzig",
                                "Dantzig selection with the instrument-corrected refit");
  std::string fp_data, fp_out;
  double fp_sigma = 0;
  std::optional<double> fp_lambda;
  int fp_lambda_m = 10;
  double fp_varsigma = 0.5;
  int fp_d = 1;
  double fp_bw = 0.0;
  std::uint64_t fp_seed = 0;
  fp->add_option("--data", fp_data, "dataset CSV")->required();
  fp->add_option("--sigma", fp_sigma, "noise scale in the constraint")->required();
  auto* fp_lam = fp->add_option("--lambda", fp_lambda, "fixed lambda_p");
  fp->add_option("--lambda-gaussian", fp_lambda_m, "realizations for the Gaussian supremum rule")
      ->excludes(fp_lam);
  fp->add_option("--varsigma", fp_varsigma, "threshold multiplier");
  fp->add_option("--d", fp_d, "instrument count");
  fp->add_option("--bandwidth-scale", fp_bw, "kernel bandwidth scale (0 = rule of thumb)");
  fp->add_option("--seed", fp_seed, "seed for the lambda rule");
  fp->add_option("--out", fp_out, "report path")->required();

  // bench
  auto* bn = app.add_subcommand("bench", "Monte Carlo experiment harness");
  std::string bn_config, bn_out, bn_per_rep;
  int bn_reps = 0;
  int bn_parallel = 1;
  bn->add_option("--config", bn_config, "experiment config file")->required();
  bn->add_option("--out", bn_out, "table output (.md renders markdown, else CSV)")->required();
  bn->add_option("--reps", bn_reps, "override the repetition count");
  bn->add_option("--parallel", bn_parallel, "worker threads");
  bn->add_option("--per-rep", bn_per_rep, "also write the per-repetition records CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitBadConfig;
  }

  try {
    if (*sim) {
      hdlm::SimulationSpec spec;
      try {
        spec = hdlm::simulation_from_config(hdlm::KeyValueConfig::parse_file(sim_config));
      } catch (const std::exception& e) {
        throw BadConfig(e.what());
      }
      if (sim_seed_set) spec.seed = sim_seed;
      hdlm::write_dataset_csv(sim_out, hdlm::simulate_dataset(spec.model, spec.n, spec.seed));
    } else if (*scr) {
      const hdlm::Dataset data = hdlm::read_dataset_csv(scr_data);
      const hdlm::ScreenResult res = hdlm::sis_screen(data.X, data.Y, scr_keep);
      if (res.constant_column_warning)
        std::cerr << "warning: constant column scored 0\n";
      std::ostringstream out;
      out << "index,score\n";
      char buf[64];
      for (int j : res.kept) {
        std::snprintf(buf, sizeof(buf), "%.10g", res.scores[j]);
        out << (j + 1) << "," << buf << "\n";
      }
      write_text(scr_out, out.str());
    } else if (*fd) {
      const hdlm::Dataset data = hdlm::read_dataset_csv(fd_data);
      const SelectionResult sel =
          run_selection(data, fd_sigma, fd_lambda, fd_lambda_m, fd_varsigma, fd_seed);
      write_text(fd_out, dantzig_report(sel.fit, data));
    } else if (*fp) {
      const hdlm::Dataset data = hdlm::read_dataset_csv(fp_data);
      const SelectionResult sel =
          run_selection(data, fp_sigma, fp_lambda, fp_lambda_m, fp_varsigma, fp_seed);
      const hdlm::SubmodelSplit split =
          hdlm::SubmodelSplit::from_selected(sel.fit.active, static_cast<int>(data.p()));
      hdlm::PostDantzigOptions opts;
      opts.d = fp_d;
      opts.bandwidth_scale = fp_bw;
      const hdlm::PostDantzigFit fit = hdlm::fit_post_dantzig(data, split, sel.fit, opts);
      write_text(fp_out, post_dantzig_report(sel.fit, fit, data));
    } else if (*bn) {
      hdlm::ExperimentConfig cfg;
      try {
        cfg = hdlm::experiment_from_config(hdlm::KeyValueConfig::parse_file(bn_config));
        if (bn_reps > 0) cfg.reps = bn_reps;
        cfg.validate();
      } catch (const std::exception& e) {
        throw BadConfig(e.what());
      }
      const hdlm::ExperimentReport report = hdlm::run_experiment(cfg, bn_parallel);
      const bool markdown = bn_out.size() > 3 && bn_out.substr(bn_out.size() - 3) == ".md";
      write_text(bn_out,
                 emit_table(report, markdown ? hdlm::TableFormat::Markdown
                                             : hdlm::TableFormat::Csv));
      if (!bn_per_rep.empty()) write_text(bn_per_rep, emit_per_rep_csv(report));
      if (report.n_failed > 0)
        std::cerr << "note: " << report.n_failed << " of " << cfg.reps
                  << " repetitions failed and were excluded\n";
    }
  } catch (const BadConfig& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}
