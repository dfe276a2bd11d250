#include "nrba/simlab.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "nrba/errors.hpp"
#include "nrba/propensity.hpp"
#include "nrba/rng.hpp"

namespace nrba::simlab {

namespace {

double normal_pdf(double z) {
  static const double kInvSqrt2Pi = 0.3989422804014327;
  return kInvSqrt2Pi * std::exp(-0.5 * z * z);
}

// E[expit(alpha + s Z)] by composite Simpson on [-10, 10]
double mean_response_rate(double alpha, double s) {
  const int n = 4000;  // even
  const double a = -10.0, b = 10.0;
  const double h = (b - a) / n;
  auto f = [&](double z) { return glm::expit(alpha + s * z) * normal_pdf(z); };
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) {
    acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  }
  return acc * h / 3.0;
}

}  // namespace

double tune_intercept(double effective_sd, double rate) {
  if (!(rate > 0.0 && rate < 1.0)) throw Error("tune_intercept: rate must be in (0,1)");
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mean_response_rate(mid, effective_sd) < rate) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-13) break;
  }
  return 0.5 * (lo + hi);
}

void PopulationSpec::validate() const {
  if (N == 0) throw Error("population: N must be positive");
  if (!(sigma_xx > 0.0) || !(sigma_yy > 0.0)) {
    throw Error("population: variances must be positive");
  }
  if (!(std::abs(rho) < 1.0)) {
    throw Error("population: |rho| must be < 1");
  }
  if (split) {
    const double loading_var =
        (split->y_prop * split->y_prop + split->y_other * split->y_other) * sigma_xx;
    if (!(sigma_yy - loading_var > 0.0)) {
      throw Error("population: split loadings exceed sigma_yy (invalid covariance)");
    }
  }
}

Population gen_population(const PopulationSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  Population pop;
  pop.mu_y_true = spec.mu_y;
  pop.x1.resize(spec.N);
  pop.y.resize(spec.N);

  if (spec.split) {
    pop.split = true;
    pop.x2.resize(spec.N);
    const double sx = std::sqrt(spec.sigma_xx);
    const double resid_sd = std::sqrt(
        spec.sigma_yy -
        (spec.split->y_prop * spec.split->y_prop +
         spec.split->y_other * spec.split->y_other) * spec.sigma_xx);
    for (std::size_t i = 0; i < spec.N; ++i) {
      const double u = rng.gauss() * sx;
      const double v = rng.gauss() * sx;
      const double e = rng.gauss() * resid_sd;
      pop.x1[i] = spec.mu_x + u;
      pop.x2[i] = spec.mu_x + v;
      pop.y[i] = spec.mu_y + spec.split->y_prop * u + spec.split->y_other * v + e;
    }
  } else {
    const double sx = std::sqrt(spec.sigma_xx);
    const double sy = std::sqrt(spec.sigma_yy);
    const double c = std::sqrt(1.0 - spec.rho * spec.rho);
    for (std::size_t i = 0; i < spec.N; ++i) {
      const double z1 = rng.gauss();
      const double z2 = rng.gauss();
      pop.x1[i] = spec.mu_x + sx * z1;
      pop.y[i] = spec.mu_y + sy * (spec.rho * z1 + c * z2);
    }
  }
  return pop;
}

std::vector<std::uint8_t> apply_mechanism(const Population& pop,
                                          const MechanismSpec& mech,
                                          std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::uint8_t> r(pop.x1.size(), 0);
  for (std::size_t i = 0; i < pop.x1.size(); ++i) {
    double index = 0.0;
    switch (mech.kind) {
      case MechanismKind::MCAR:
        index = 0.0;
        break;
      case MechanismKind::MAR:
        index = pop.x1[i];
        break;
      case MechanismKind::MNAR:
        index = (1.0 - mech.phi) * mech.sd_ratio * pop.x1[i] + mech.phi * pop.y[i];
        break;
    }
    const double p = glm::expit(mech.intercept + mech.slope * index);
    r[i] = rng.bernoulli(p) ? 1 : 0;
  }
  return r;
}

BiasResult true_bias(const Population& pop, const std::vector<std::uint8_t>& responses) {
  if (responses.size() != pop.y.size()) throw SchemaError("true_bias: length mismatch");
  const auto N = pop.y.size();
  std::size_t nr = 0;
  double sr = 0.0, sn = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    if (responses[i]) {
      ++nr;
      sr += pop.y[i];
    } else {
      sn += pop.y[i];
    }
  }
  if (nr == 0 || nr == N) return {0.0, true};
  const double ybar_r = sr / static_cast<double>(nr);
  const double ybar_nr = sn / static_cast<double>(N - nr);
  const double frac = static_cast<double>(N - nr) / static_cast<double>(N);
  return {frac * (ybar_r - ybar_nr), false};
}

std::vector<std::vector<double>> mi_impute(const RectDataset& d,
                                           const glm::DesignMatrixSpec& model,
                                           const std::string& outcome,
                                           std::size_t m, std::uint64_t seed) {
  if (m < 2) throw Error("mi_impute: m must be at least 2");
  const auto fit = glm::fit_ols(d, model, outcome);
  const auto k = fit.k;

  const auto yj = d.col_index(outcome);
  std::vector<std::size_t> missing_rows;
  std::vector<std::size_t> all_rows(d.n_rows());
  for (std::size_t i = 0; i < d.n_rows(); ++i) {
    all_rows[i] = i;
    if (!d.observed(yj, i)) missing_rows.push_back(i);
  }

  // Cholesky factor of the coefficient covariance for the parameter draws;
  // a zero covariance (perfect fit) degenerates to fixed coefficients
  Eigen::MatrixXd cov(k, k);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = fit.cov[a * k + b];
    }
  }
  Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(k, k);
  if (fit.sigma2 > 0.0) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) {
      chol = llt.matrixL();
    } else {
      throw SingularFitError("mi_impute: coefficient covariance is not positive definite");
    }
  }
  const double resid_sd = std::sqrt(fit.sigma2);

  std::vector<std::vector<double>> completed(m, d.numeric_column(outcome));
  if (missing_rows.empty()) return completed;

  // design rows for the units to impute
  Rng rng(seed);
  for (std::size_t imp = 0; imp < m; ++imp) {
    glm::LinearFit draw = fit;
    Eigen::VectorXd z(k);
    for (std::size_t a = 0; a < k; ++a) z(static_cast<Eigen::Index>(a)) = rng.gauss();
    const Eigen::VectorXd delta = chol * z;
    for (std::size_t a = 0; a < k; ++a) draw.coefficients[a] += delta(static_cast<Eigen::Index>(a));

    const auto pred = glm::predict(draw, d, missing_rows, glm::PredictScale::Response);
    for (std::size_t t = 0; t < missing_rows.size(); ++t) {
      completed[imp][missing_rows[t]] = pred[t] + resid_sd * rng.gauss();
    }
  }
  return completed;
}

RubinResult rubin_combine(const std::vector<double>& estimates,
                          const std::vector<double>& variances) {
  const std::size_t m = estimates.size();
  if (m < 2 || variances.size() != m) {
    throw Error("rubin_combine: need at least two imputations");
  }
  RubinResult out;
  for (double e : estimates) out.estimate += e;
  out.estimate /= static_cast<double>(m);
  for (double v : variances) out.within += v;
  out.within /= static_cast<double>(m);
  for (double e : estimates) {
    out.between += (e - out.estimate) * (e - out.estimate);
  }
  out.between /= static_cast<double>(m - 1);
  out.total_variance = out.within + (1.0 + 1.0 / static_cast<double>(m)) * out.between;
  return out;
}

CellConfig CellConfig::from_code(const std::string& code) {
  if (code.size() != 3) throw Error("cell code must have three letters, e.g. HLL");
  auto flag = [&](char c) {
    if (c == 'H' || c == 'h') return true;
    if (c == 'L' || c == 'l') return false;
    throw Error("cell code letters must be L or H");
  };
  return {flag(code[0]), flag(code[1]), flag(code[2])};
}

std::string CellConfig::code() const {
  std::string s;
  s += xr_high ? 'H' : 'L';
  s += propy_high ? 'H' : 'L';
  s += othery_high ? 'H' : 'L';
  return s;
}

namespace {

struct ReplicateEstimates {
  double cc = 0.0;
  double ipw = 0.0;
  double mi = 0.0;
  double response_rate = 0.0;
};

// one Monte Carlo replicate of a Table-1 cell; everything derives from the
// replicate's own substream
ReplicateEstimates run_replicate(const CellConfig& cell, std::size_t n,
                                 const CellStrengths& st, double alpha,
                                 std::uint64_t master_seed, std::uint64_t stream) {
  Rng rng = Rng::substream(master_seed, stream);
  const double a = cell.xr_high ? st.high : st.low;
  const double b = cell.propy_high ? st.high : st.low;
  const double c = cell.othery_high ? st.high : st.low;
  const double mu = 1.0;

  std::vector<double> u(n), v(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = rng.gauss();
    v[i] = rng.gauss();
    y[i] = mu + b * u[i] + c * v[i] + rng.gauss();
  }
  std::vector<std::uint8_t> resp(n);
  std::size_t n_resp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    resp[i] = rng.bernoulli(glm::expit(alpha + a * u[i])) ? 1 : 0;
    n_resp += resp[i];
  }

  ReplicateEstimates est;
  est.response_rate = static_cast<double>(n_resp) / static_cast<double>(n);

  double sr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (resp[i]) sr += y[i];
  }
  est.cc = sr / static_cast<double>(n_resp);

  // analyst-side dataset: x observed for everyone, y for respondents
  std::vector<double> y_obs(n);
  std::vector<double> r01(n);
  for (std::size_t i = 0; i < n; ++i) {
    y_obs[i] = resp[i] ? y[i] : std::numeric_limits<double>::quiet_NaN();
    r01[i] = resp[i] ? 1.0 : 0.0;
  }
  const RectDataset d = from_columns({
      {{"x1", Role::Auxiliary, Measurement::Continuous, {}}, u, {}},
      {{"x2", Role::Auxiliary, Measurement::Continuous, {}}, v, {}},
      {{"r", Role::ResponseIndicator, Measurement::Continuous, {}}, r01, {}},
      {{"y", Role::Outcome, Measurement::Continuous, {}}, y_obs, {}},
  });

  glm::DesignMatrixSpec x_model;
  x_model.terms = {glm::Term::main("x1"), glm::Term::main("x2")};

  // IPW: correctly specified response model on the observed x
  {
    const auto fit = glm::fit_logistic(d, x_model, "r");
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    const auto phat = glm::predict(fit, d, rows, glm::PredictScale::Response);
    const auto w = propensity::ipw_weights(phat, resp);
    double ws = 0.0, wy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ws += w.weight[i];
      wy += w.weight[i] * y[i];  // weight is 0 for nonrespondents
    }
    est.ipw = wy / ws;
  }

  // MI: normal linear imputation on x, pooled mean over m completed sets
  {
    const auto completed = mi_impute(d, x_model, "y", st.mi_m, rng.next_u64());
    std::vector<double> means;
    std::vector<double> variances;
    for (const auto& yc : completed) {
      double s = 0.0;
      for (double val : yc) s += val;
      const double mean = s / static_cast<double>(n);
      double ss = 0.0;
      for (double val : yc) ss += (val - mean) * (val - mean);
      means.push_back(mean);
      variances.push_back(ss / static_cast<double>(n - 1) / static_cast<double>(n));
    }
    est.mi = rubin_combine(means, variances).estimate;
  }
  return est;
}

CellResult summarize(const std::string& method, const std::vector<double>& est,
                     double truth) {
  CellResult r;
  r.method = method;
  r.reps = est.size();
  double s = 0.0;
  for (double e : est) s += e;
  const double mean = s / static_cast<double>(est.size());
  r.bias = mean - truth;
  double ss = 0.0;
  for (double e : est) ss += (e - mean) * (e - mean);
  r.variance = ss / static_cast<double>(est.size() - 1);
  r.mcse = std::sqrt(r.variance / static_cast<double>(est.size()));
  return r;
}

}  // namespace

CellRun run_cell(const CellConfig& cell, std::size_t reps, std::size_t n,
                 std::uint64_t seed, const CellStrengths& strengths, ExecMode mode) {
  if (reps < 2) throw Error("run_cell: need at least 2 replicates");
  CellRun run;
  run.cell = cell.code();
  run.unstable_warning = reps < 50;
  run.est_cc.resize(reps);
  run.est_ipw.resize(reps);
  run.est_mi.resize(reps);

  const double a = cell.xr_high ? strengths.high : strengths.low;
  const double alpha = tune_intercept(a, strengths.response_rate);

  std::vector<double> rates(reps, 0.0);
  const auto body = [&](std::size_t k) {
    const auto est = run_replicate(cell, n, strengths, alpha, seed, k);
    run.est_cc[k] = est.cc;
    run.est_ipw[k] = est.ipw;
    run.est_mi[k] = est.mi;
    rates[k] = est.response_rate;
  };

  if (mode == ExecMode::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::size_t k = 0; k < reps; ++k) body(k);
  } else {
    for (std::size_t k = 0; k < reps; ++k) body(k);
  }

  // reduction in replicate order, independent of execution order
  const double truth = 1.0;
  run.methods.push_back(summarize("CC", run.est_cc, truth));
  run.methods.push_back(summarize("IPW", run.est_ipw, truth));
  run.methods.push_back(summarize("MI", run.est_mi, truth));
  double r = 0.0;
  for (double v : rates) r += v;
  run.mean_response_rate = r / static_cast<double>(reps);
  return run;
}

std::vector<CellRun> run_cell_grid(std::size_t reps, std::size_t n,
                                   std::uint64_t seed,
                                   const CellStrengths& strengths, ExecMode mode) {
  static const char* kOrder[8] = {"LLL", "LLH", "LHL", "LHH",
                                  "HLL", "HLH", "HHL", "HHH"};
  std::vector<CellRun> out;
  for (std::size_t ci = 0; ci < 8; ++ci) {
    const auto cell = CellConfig::from_code(kOrder[ci]);
    // disjoint substream block per cell
    out.push_back(run_cell(cell, reps, n, seed + ci * 0x10000000ULL, strengths, mode));
  }
  return out;
}

}  // namespace nrba::simlab
