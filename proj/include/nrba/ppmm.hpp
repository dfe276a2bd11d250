#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nrba/dataset.hpp"
#include "nrba/glm.hpp"

namespace nrba::ppmm {

// Proxy series over every eligible unit: x observed everywhere, y observed
// for respondents only. The proxy is oriented so its respondent correlation
// with the outcome is nonnegative (negated and flagged when needed).
struct ProxySeries {
  std::vector<double> x;
  std::vector<double> y;                   // aligned; ignored where nonrespondent
  std::vector<std::uint8_t> respondent;    // 1 = y observed
  double rho_hat = 0.0;
  bool sign_flipped = false;
  std::size_t n_respondents = 0;
};

// Builds a ProxySeries from raw vectors; computes rho over respondents and
// applies the sign convention. Throws InsufficientDataError for fewer than 3
// respondents and DegenerateProxyError when the correlation is undefined.
ProxySeries make_proxy(std::vector<double> x, std::vector<double> y,
                       std::vector<std::uint8_t> respondent);

// Scores the outcome model over the given rows (all eligible units) and pairs
// the predictions with the observed outcome.
ProxySeries build_proxy(const glm::LinearFit& outcome_fit, const RectDataset& d,
                        const std::string& outcome,
                        const std::vector<std::size_t>& rows);

// g(rho, phi) = (phi + (1-phi) rho) / (phi rho + (1-phi)); the multiplier the
// sensitivity parameter applies to the proxy-based adjustment. Requires
// rho > 0 whenever phi > 0 (at phi = 1 it is 1/rho).
double g_coefficient(double rho, double phi);

struct PpmmEstimate {
  double phi = 0.0;
  double lambda = 0.0;      // phi/(1-phi); infinity at phi = 1
  double g = 0.0;           // unitless g(rho, phi)
  double muY = 0.0;
  double muYvar = 0.0;
  double muX = 0.0;
  double sigmaXX = 0.0;
  double sigmaYY = 0.0;
  double sigmaXY = 0.0;
  double nrba = 0.0;        // muY - respondent mean of y
  std::size_t n = 0;        // eligible units
  std::size_t r = 0;        // respondents
};

// Closed-form proxy pattern-mixture MLE of the outcome mean and its
// large-sample variance for a fixed sensitivity parameter phi in [0, 1].
// phi = 1 uses the dedicated lambda = infinity branch.
PpmmEstimate ppmm_mle(const ProxySeries& proxy, double phi);

// g(rho,phi) * sqrt(s_yy/s_xx) * (xbar - xbar_R); agrees with
// ppmm_mle(...).muY - ybar_R.
double nrba_index(const ProxySeries& proxy, double phi);

// (mean of x over all units - mean of x over respondents) / respondent
// sample sd of x.
double standardized_deviation(const ProxySeries& proxy);

enum class RhoClass { Weak, Moderate, Strong };
enum class DClass { Small, Medium, Large };

const char* rho_class_name(RhoClass c);
const char* d_class_name(DClass c);

struct StrengthVerdict {
  RhoClass rho_class;
  double d = 0.0;
  DClass d_class;
};

// rho < 0.4 weak, 0.4..0.7 moderate, > 0.7 strong;
// |d| < 0.1 small, 0.1..0.3 medium, > 0.3 large (standardized d).
StrengthVerdict classify_strength(double rho, double d);

struct SubgroupEstimate {
  std::string group;
  double rho = 0.0;
  double d = 0.0;
  double ybar_r = 0.0;
  PpmmEstimate estimate;
};

// Per-group PPMM with group-specific correlation and variances. Groups with
// fewer than 3 respondents, no nonrespondent contrast, or nonpositive rho are
// skipped and listed.
std::vector<SubgroupEstimate> subgroup_nrba(const ProxySeries& proxy,
                                            const std::vector<std::string>& group_of_unit,
                                            double phi,
                                            std::vector<std::string>* skipped = nullptr);

struct SweepRow {
  double phi = 0.0;
  double muY = 0.0;
  double se = 0.0;
  double nrba = 0.0;
};

struct SweepTable {
  double rho = 0.0;
  double d = 0.0;
  double ybar_r = 0.0;
  std::vector<SweepRow> rows;
  bool intervals_overlap = true;  // all 95% intervals pairwise intersect
};

// Sensitivity table over a phi grid (default {0, 0.5, 1}).
SweepTable sensitivity_sweep(const ProxySeries& proxy,
                             std::vector<double> phis = {0.0, 0.5, 1.0});

struct GroupSweep {
  std::string group;
  SweepTable table;
};

std::vector<GroupSweep> sensitivity_sweep_by_group(
    const ProxySeries& proxy, const std::vector<std::string>& group_of_unit,
    std::vector<double> phis = {0.0, 0.5, 1.0},
    std::vector<std::string>* skipped = nullptr);

}  // namespace nrba::ppmm
