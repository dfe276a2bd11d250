#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nrba/dataset.hpp"
#include "nrba/glm.hpp"

namespace nrba::simlab {

// Bivariate-normal population for (x, y); the optional split replaces x by
// two independent drivers (propensity driver x1, outcome driver x2) with the
// stated loadings on y and residual noise filling the variance up to
// sigma_yy.
struct PopulationSpec {
  std::size_t N = 0;
  double mu_x = 0.0;
  double mu_y = 0.0;
  double sigma_xx = 1.0;
  double sigma_yy = 1.0;
  double rho = 0.0;

  struct Split {
    double r_slope = 0.0;   // logit slope on x1 in the response model
    double y_prop = 0.0;    // loading of x1 on y
    double y_other = 0.0;   // loading of x2 on y
  };
  std::optional<Split> split;

  void validate() const;  // throws on invalid covariance
};

struct Population {
  std::vector<double> x1;
  std::vector<double> x2;  // empty unless split
  std::vector<double> y;
  double mu_y_true = 0.0;
  bool split = false;
};

Population gen_population(const PopulationSpec& spec, std::uint64_t seed);

enum class MechanismKind { MCAR, MAR, MNAR };

// Selection rule: response ~ Bernoulli(expit(intercept + slope * index)),
// index = 0 (MCAR), x (MAR), or V = (1-phi) sd_ratio x + phi y (MNAR) with
// sd_ratio = sqrt(sigma_yy/sigma_xx).
struct MechanismSpec {
  MechanismKind kind = MechanismKind::MCAR;
  double phi = 0.0;       // MNAR only
  double intercept = 0.0;
  double slope = 0.0;
  double sd_ratio = 1.0;  // MNAR index scaling
};

std::vector<std::uint8_t> apply_mechanism(const Population& pop,
                                          const MechanismSpec& mech,
                                          std::uint64_t seed);

// intercept alpha with E[expit(alpha + effective_sd * Z)] = rate, Z standard
// normal; used to pin average response rates in the simulation designs
double tune_intercept(double effective_sd, double rate);

struct BiasResult {
  double value = 0.0;
  bool vacuous = false;  // no respondents or no nonrespondents
};

// ((N - N_R)/N)(Ybar_R - Ybar_NR); equals the respondent-mean minus the
// population mean identically.
BiasResult true_bias(const Population& pop, const std::vector<std::uint8_t>& responses);

// Multiple imputation of the missing outcome under a normal linear model fit
// on the respondents: coefficients are drawn from their sampling distribution
// before each pass and residual noise added. Returns m completed outcome
// vectors.
std::vector<std::vector<double>> mi_impute(const RectDataset& d,
                                           const glm::DesignMatrixSpec& model,
                                           const std::string& outcome,
                                           std::size_t m, std::uint64_t seed);

struct RubinResult {
  double estimate = 0.0;
  double total_variance = 0.0;
  double within = 0.0;
  double between = 0.0;
};

// pooled = mean, total = Wbar + (1 + 1/m) B
RubinResult rubin_combine(const std::vector<double>& estimates,
                          const std::vector<double>& variances);

// The eight {L,H}^3 strength combinations: (propensity-R, propensity-Y,
// otherX-Y). "LHL" means weak selection, strong propensity-outcome loading,
// weak other loading.
struct CellConfig {
  bool xr_high = false;
  bool propy_high = false;
  bool othery_high = false;

  static CellConfig from_code(const std::string& code);  // e.g. "HLL"
  std::string code() const;
};

struct CellStrengths {
  double low = 0.1;
  double high = 1.0;
  double response_rate = 0.6;
  std::size_t mi_m = 20;
};

struct CellResult {
  std::string method;  // CC, IPW, MI
  double bias = 0.0;
  double variance = 0.0;
  double mcse = 0.0;   // MC standard error of the bias estimate
  std::size_t reps = 0;
};

struct CellRun {
  std::string cell;
  std::vector<CellResult> methods;       // CC, IPW, MI
  std::vector<double> est_cc, est_ipw, est_mi;  // per replicate, by index
  double mean_response_rate = 0.0;
  bool unstable_warning = false;  // reps < 50
};

enum class ExecMode { Serial, Parallel };

// Monte Carlo comparison of complete-case, inverse-propensity-weighted, and
// multiply-imputed means against the known population mean. Replicates use
// derived substreams and land in per-replicate slots, so serial and parallel
// runs agree bit for bit.
CellRun run_cell(const CellConfig& cell, std::size_t reps, std::size_t n,
                 std::uint64_t seed, const CellStrengths& strengths = {},
                 ExecMode mode = ExecMode::Parallel);

// all eight cells in LLL..HHH order with disjoint substreams of one master
// seed
std::vector<CellRun> run_cell_grid(std::size_t reps, std::size_t n,
                                   std::uint64_t seed,
                                   const CellStrengths& strengths = {},
                                   ExecMode mode = ExecMode::Parallel);

}  // namespace nrba::simlab
