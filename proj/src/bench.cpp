#include "hdlm/bench.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "hdlm/dantzig.hpp"
#include "hdlm/instruments.hpp"
#include "hdlm/plm.hpp"
#include "hdlm/rng.hpp"
#include "hdlm/screening.hpp"

namespace hdlm {

LambdaMode LambdaMode::gaussian_sup(int m) {
  LambdaMode mode;
  mode.kind = Kind::GaussianSup;
  mode.m = m;
  return mode;
}

LambdaMode LambdaMode::fixed(double value) {
  LambdaMode mode;
  mode.kind = Kind::Fixed;
  mode.value = value;
  return mode;
}

LambdaMode LambdaMode::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string head = colon == std::string::npos ? text : text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (head == "gaussian_sup") return gaussian_sup(arg.empty() ? 10 : std::stoi(arg));
  if (head == "fixed") {
    if (arg.empty()) throw std::runtime_error("lambda_mode fixed needs a value, e.g. fixed:3.5");
    return fixed(std::stod(arg));
  }
  throw std::runtime_error("lambda_mode must be gaussian_sup[:m] or fixed:value, got " + text);
}

std::string LambdaMode::str() const {
  if (kind == Kind::GaussianSup) return "gaussian_sup:" + std::to_string(m);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fixed:%g", value);
  return buf;
}

void ExperimentConfig::validate() const {
  if (n < 2 || p < 1) throw std::invalid_argument("ExperimentConfig: need n >= 2, p >= 1");
  if (reps < 1) throw std::invalid_argument("ExperimentConfig: need reps >= 1");
  if (holdout_n < 1) throw std::invalid_argument("ExperimentConfig: need holdout_n >= 1");
  if (target_r2.has_value() == sigma_eps.has_value())
    throw std::invalid_argument(
        "ExperimentConfig: exactly one of target_r2 / sigma_eps must be set");
  if (varsigma < 0) throw std::invalid_argument("ExperimentConfig: varsigma must be >= 0");
  if (d_instr < 1) throw std::invalid_argument("ExperimentConfig: need d_instr >= 1");
  coef.validate(p);
}

double mse_against_truth(const Eigen::VectorXd& theta_est, const Eigen::VectorXd& beta_true,
                         const std::vector<int>& selected) {
  if (selected.empty()) throw std::invalid_argument("mse_against_truth: empty selection");
  if (theta_est.size() != static_cast<Eigen::Index>(selected.size()))
    throw std::invalid_argument("mse_against_truth: estimate length must match selection");
  double sum = 0.0;
  for (std::size_t k = 0; k < selected.size(); ++k) {
    const int j = selected[k];
    if (j < 0 || j >= beta_true.size())
      throw std::invalid_argument("mse_against_truth: selected index out of range");
    const double diff = theta_est[static_cast<Eigen::Index>(k)] - beta_true[j];
    sum += diff * diff;
  }
  return sum / static_cast<double>(selected.size());
}

namespace {

RepRecord run_one_rep(const ExperimentConfig& cfg, const TrueModel& model, double sigma,
                      std::uint64_t rep_seed) {
  RepRecord rec;
  try {
    const Dataset train = simulate_dataset(model, cfg.n, derive_seed(rep_seed, 1));
    const Dataset holdout = simulate_dataset(model, cfg.holdout_n, derive_seed(rep_seed, 2));

    std::vector<int> pool(cfg.p);
    for (int j = 0; j < cfg.p; ++j) pool[j] = j;
    Eigen::MatrixXd X_sel = train.X;
    if (cfg.use_sis) {
      const int keep = cfg.d_keep > 0 ? cfg.d_keep : cfg.n - 1;
      const ScreenResult screen = sis_screen(train.X, train.Y, keep);
      pool = screen.kept;
      X_sel = select_columns(train.X, pool);
    }

    // The selection stage runs on the centered, unit-norm design (the
    // model carries no intercept, so without centering the tuning rule is
    // dominated by the covariate means and a few mean-heavy columns get
    // drafted as intercept substitutes). Coefficients map back to the raw
    // scale; the threshold and refit operate there.
    const Eigen::MatrixXd Xc = X_sel.rowwise() - X_sel.colwise().mean();
    const Eigen::VectorXd Yc = train.Y.array() - train.Y.mean();
    Eigen::VectorXd norms(X_sel.cols());
    Eigen::MatrixXd Xu = Xc;
    for (Eigen::Index j = 0; j < Xu.cols(); ++j) {
      norms[j] = Xu.col(j).norm();
      if (norms[j] > 0)
        Xu.col(j) /= norms[j];
      else
        norms[j] = 1.0;
    }

    double lambda_p = cfg.lambda.value;
    if (cfg.lambda.kind == LambdaMode::Kind::GaussianSup)
      lambda_p = select_lambda_gaussian(Xu, cfg.lambda.m, derive_seed(rep_seed, 3));

    const Eigen::VectorXd beta_sel =
        dantzig_select(Xu, Yc, lambda_p, sigma).cwiseQuotient(norms);
    const auto [active_sel, theta_S] =
        gaussian_dantzig(X_sel, train.Y, beta_sel, cfg.varsigma, sigma);

    Eigen::VectorXd beta_tilde = Eigen::VectorXd::Zero(cfg.p);
    for (Eigen::Index k = 0; k < beta_sel.size(); ++k) beta_tilde[pool[k]] = beta_sel[k];
    DantzigFit dfit;
    dfit.beta_tilde = beta_tilde;
    dfit.lambda_p = lambda_p;
    dfit.sigma = sigma;
    dfit.varsigma = cfg.varsigma;
    dfit.theta_tilde_S = theta_S;
    for (int j : active_sel) dfit.active.push_back(pool[j]);

    const SubmodelSplit split = SubmodelSplit::from_selected(dfit.active, cfg.p);

    PostDantzigOptions popts;
    popts.d = cfg.d_instr;
    popts.bandwidth_scale = cfg.bandwidth_scale;
    const PostDantzigFit fit = fit_post_dantzig(train, split, dfit, popts);

    rec.selected = dfit.active;
    rec.mse_hat = mse_against_truth(fit.plm.theta_hat, model.beta, dfit.active);
    rec.mse_S = mse_against_truth(dfit.theta_tilde_S, model.beta, dfit.active);

    const Eigen::MatrixXd Z_new = select_columns(holdout.X, split.idx_Z);
    const Eigen::MatrixXd U_new = select_columns(holdout.X, split.idx_U);
    const Eigen::MatrixXd V_new = instrument_V_for(fit.plan, Z_new, U_new);

    const auto pe = [&](const Eigen::VectorXd& pred) {
      return (holdout.Y - pred).squaredNorm() / static_cast<double>(cfg.holdout_n);
    };
    rec.pe_full = pe(predict_full(fit.plm, Z_new, V_new));
    rec.pe_sub = pe(predict_submodel(fit.plm, Z_new));
    rec.pe_ols = pe(predict_ols(dfit.theta_tilde_S, Z_new));
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.fail_reason = e.what();
  }
  return rec;
}

void sample_stats(const std::vector<double>& xs, double* mean, double* sd) {
  const double n = static_cast<double>(xs.size());
  double m = 0.0;
  for (double x : xs) m += x;
  m /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  *mean = m;
  *sd = xs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config, int parallel) {
  config.validate();

  ExperimentReport report;
  report.config = config;
  report.beta_seed =
      config.coef.seed != 0 ? config.coef.seed : derive_seed(config.seed, 0);

  CoefficientSpec coef = config.coef;
  coef.seed = report.beta_seed;
  TrueModel model;
  model.beta = make_beta(coef, config.p);
  model.rho_corr = config.rho_corr;
  model.mu = mu_zero_on_I(coef.I, config.p, config.mu_other);
  model.sigma_eps =
      config.sigma_eps ? *config.sigma_eps
                       : sigma_for_r2(model.beta, model.sigma_x(), *config.target_r2);
  report.beta_true = model.beta;
  report.sigma_eps_used = model.sigma_eps;
  report.r2_theoretical = model.r2();

  report.reps.resize(config.reps);
  std::vector<std::uint64_t> rep_seeds(config.reps);
  for (int r = 0; r < config.reps; ++r) rep_seeds[r] = derive_seed(config.seed, 1 + r);

  const int threads = std::max(1, parallel);
  if (threads == 1) {
    for (int r = 0; r < config.reps; ++r)
      report.reps[r] = run_one_rep(config, model, model.sigma_eps, rep_seeds[r]);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&]() {
        while (true) {
          const int r = next.fetch_add(1);
          if (r >= config.reps) break;
          report.reps[r] = run_one_rep(config, model, model.sigma_eps, rep_seeds[r]);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  std::vector<double> mh, ms, pf, ps, po;
  for (const RepRecord& rec : report.reps) {
    if (!rec.ok) {
      ++report.n_failed;
      continue;
    }
    ++report.n_ok;
    mh.push_back(rec.mse_hat);
    ms.push_back(rec.mse_S);
    pf.push_back(rec.pe_full);
    ps.push_back(rec.pe_sub);
    po.push_back(rec.pe_ols);
    if (rec.pe_sub < rec.pe_ols) ++report.agg.tau;
  }
  if (report.n_ok > 0) {
    sample_stats(mh, &report.agg.mse_hat_mean, &report.agg.mse_hat_sd);
    sample_stats(ms, &report.agg.mse_S_mean, &report.agg.mse_S_sd);
    sample_stats(pf, &report.agg.pe_full_mean, &report.agg.pe_full_sd);
    sample_stats(ps, &report.agg.pe_sub_mean, &report.agg.pe_sub_sd);
    sample_stats(po, &report.agg.pe_ols_mean, &report.agg.pe_ols_sd);
  }

  if (report.n_failed * 5 > config.reps) {
    std::ostringstream msg;
    msg << "run_experiment: " << report.n_failed << "/" << config.reps
        << " repetitions failed;";
    int shown = 0;
    for (const RepRecord& rec : report.reps) {
      if (rec.ok || shown >= 3) continue;
      msg << " [" << rec.fail_reason << "]";
      ++shown;
    }
    throw std::runtime_error(msg.str());
  }
  return report;
}

namespace {

std::string fmt4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string pair4(double mean, double sd) { return fmt4(mean) + "(" + fmt4(sd) + ")"; }

void append_row(std::ostringstream& out, const ExperimentReport& r, TableFormat format) {
  const char* sep = format == TableFormat::Csv ? "," : " | ";
  const Aggregates& a = r.agg;
  if (format == TableFormat::Markdown) out << "| ";
  out << r.config.id << sep << pair4(a.mse_hat_mean, a.mse_hat_sd) << sep
      << pair4(a.mse_S_mean, a.mse_S_sd) << sep << pair4(a.pe_full_mean, a.pe_full_sd) << sep
      << pair4(a.pe_sub_mean, a.pe_sub_sd) << sep << pair4(a.pe_ols_mean, a.pe_ols_sd) << sep
      << a.tau << "/" << r.n_ok;
  if (format == TableFormat::Markdown) out << " |";
  out << "\n";
}

void append_header(std::ostringstream& out, TableFormat format) {
  if (format == TableFormat::Csv) {
    out << "config,mse_hat,mse_S,pe_full,pe_sub,pe_ols,tau\n";
  } else {
    out << "| config | MSE theta_hat | MSE theta_S | PE full | PE sub | PE ols | tau |\n";
    out << "| --- | --- | --- | --- | --- | --- | --- |\n";
  }
}

}  // namespace

std::string emit_table(const ExperimentReport& report, TableFormat format) {
  std::ostringstream out;
  append_header(out, format);
  if (report.n_ok > 0) append_row(out, report, format);
  return out.str();
}

std::string emit_table(const std::vector<ExperimentReport>& reports, TableFormat format) {
  std::ostringstream out;
  append_header(out, format);
  for (const ExperimentReport& r : reports)
    if (r.n_ok > 0) append_row(out, r, format);
  return out.str();
}

std::string emit_per_rep_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "rep,ok,mse_hat,mse_S,pe_full,pe_sub,pe_ols,selected,fail_reason\n";
  char buf[64];
  for (std::size_t r = 0; r < report.reps.size(); ++r) {
    const RepRecord& rec = report.reps[r];
    out << (r + 1) << "," << (rec.ok ? 1 : 0);
    const double vals[] = {rec.mse_hat, rec.mse_S, rec.pe_full, rec.pe_sub, rec.pe_ols};
    for (double v : vals) {
      std::snprintf(buf, sizeof(buf), "%.10g", rec.ok ? v : 0.0);
      out << "," << buf;
    }
    out << ",";
    for (std::size_t k = 0; k < rec.selected.size(); ++k) {
      if (k) out << ";";
      out << (rec.selected[k] + 1);
    }
    out << "," << rec.fail_reason << "\n";
  }
  return out.str();
}

ExperimentConfig experiment_from_config(const KeyValueConfig& cfg) {
  ExperimentConfig ec;
  ec.id = cfg.get_string("id", "experiment");
  ec.n = cfg.get_int("n");
  ec.p = cfg.get_int("p");

  const std::string type = cfg.get_string("beta_type", "custom");
  if (type != "custom") {
    ec.coef = CoefficientSpec::preset(beta_type_from_string(type));
  } else {
    ec.coef = CoefficientSpec();
    ec.coef.beta_type = BetaType::Custom;
  }
  if (cfg.has("beta_I")) {
    const std::vector<double> vals = cfg.get_real_list("beta_I");
    ec.coef.beta_I =
        Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  }
  if (cfg.has("I")) {
    ec.coef.I.clear();
    for (int j : cfg.get_int_list("I")) ec.coef.I.push_back(j - 1);  // file is 1-based
  }
  if (cfg.has("S") && cfg.get_int("S") != ec.coef.S())
    throw std::runtime_error("config: S does not match |I|");
  ec.coef.tail_low = cfg.get_real("tail_low", ec.coef.tail_low);
  ec.coef.tail_high = cfg.get_real("tail_high", ec.coef.tail_high);
  ec.coef.seed = cfg.get_u64("beta_seed", 0);

  ec.rho_corr = cfg.get_real("rho_corr", ec.rho_corr);
  if (cfg.has("target_r2")) ec.target_r2 = cfg.get_real("target_r2");
  if (cfg.has("sigma_eps")) ec.sigma_eps = cfg.get_real("sigma_eps");
  ec.reps = cfg.get_int("reps", ec.reps);
  ec.lambda = LambdaMode::parse(cfg.get_string("lambda_mode", "gaussian_sup:10"));
  ec.varsigma = cfg.get_real("varsigma", ec.varsigma);
  ec.use_sis = cfg.get_bool("use_sis", ec.use_sis);
  ec.d_keep = cfg.get_int("d_keep", ec.d_keep);
  ec.d_instr = cfg.get_int("d_instr", ec.d_instr);
  ec.seed = cfg.get_u64("seed", ec.seed);
  ec.holdout_n = cfg.get_int("holdout_n", ec.holdout_n);
  ec.mu_other = cfg.get_real("mu_other", ec.mu_other);
  ec.bandwidth_scale = cfg.get_real("bandwidth_scale", ec.bandwidth_scale);
  ec.validate();
  return ec;
}

SimulationSpec simulation_from_config(const KeyValueConfig& cfg) {
  SimulationSpec spec;
  spec.n = cfg.get_int("n");
  spec.seed = cfg.get_u64("seed", 0);
  const int p = cfg.get_int("p");

  CoefficientSpec coef;
  const std::string type = cfg.get_string("beta_type", "custom");
  if (type != "custom") coef = CoefficientSpec::preset(beta_type_from_string(type));
  if (cfg.has("beta_I")) {
    const std::vector<double> vals = cfg.get_real_list("beta_I");
    coef.beta_I =
        Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  }
  if (cfg.has("I")) {
    coef.I.clear();
    for (int j : cfg.get_int_list("I")) coef.I.push_back(j - 1);
  }
  coef.tail_low = cfg.get_real("tail_low", coef.tail_low);
  coef.tail_high = cfg.get_real("tail_high", coef.tail_high);
  coef.seed = cfg.get_u64("beta_seed", 0);

  spec.model.beta = make_beta(coef, p);
  spec.model.rho_corr = cfg.get_real("rho_corr", 0.0);
  if (cfg.has("mu")) {
    const std::vector<double> mu = cfg.get_real_list("mu");
    if (static_cast<int>(mu.size()) != p) throw std::runtime_error("config: mu length != p");
    spec.model.mu =
        Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size()));
  } else {
    spec.model.mu = mu_zero_on_I(coef.I, p, cfg.get_real("mu_other", 2.0));
  }
  if (cfg.has("target_r2") == cfg.has("sigma_eps"))
    throw std::runtime_error("config: set exactly one of target_r2 / sigma_eps");
  if (cfg.has("sigma_eps"))
    spec.model.sigma_eps = cfg.get_real("sigma_eps");
  else
    spec.model.sigma_eps =
        sigma_for_r2(spec.model.beta, spec.model.sigma_x(), cfg.get_real("target_r2"));
  return spec;
}

}  // namespace hdlm
