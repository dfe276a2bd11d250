#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nrba/dataset.hpp"
#include "nrba/glm.hpp"

namespace nrba::propensity {

enum class StageLevel { SingleStage, ConditionalStage };

struct PropensityModel {
  glm::LogisticFit fit;
  std::vector<double> phat;              // aligned to scored rows
  std::vector<std::size_t> scored_rows;  // dataset rows the phat refer to
  std::vector<std::size_t> fit_rows;     // rows used to estimate the model
  double auc = 0.0;
  StageLevel level = StageLevel::SingleStage;
  std::vector<std::size_t> flagged_units;  // phat rounded to exactly 0 or 1
};

// Fits the response-propensity logistic regression on the eligible rows
// (dataset rows with the indicator and all predictors observed, optionally
// restricted to fit_filter, e.g. prior-stage respondents) and scores every
// scoreable row. AUC is computed on the fitting rows.
PropensityModel fit_stage_propensity(const RectDataset& d,
                                     const std::string& response_indicator,
                                     const std::vector<glm::Term>& predictors,
                                     const std::vector<std::size_t>* fit_filter = nullptr,
                                     StageLevel level = StageLevel::SingleStage);

struct ComposedPropensity {
  std::vector<double> probability;       // product over stages, per unit
  std::vector<std::size_t> flagged_units;
};

// Overall response probability as the product of stage probabilities. Stages
// must be scored on the same unit universe.
ComposedPropensity compose_propensities(const std::vector<const PropensityModel*>& stages);
ComposedPropensity compose_propensities(const std::vector<std::vector<double>>& stage_phat);

struct PropensityStrata {
  std::vector<double> breaks;      // 0.2/0.4/0.6/0.8 quantiles of phat
  std::vector<int> stratum;        // 1-based, per respondent
  std::size_t n_strata = 0;        // occupied strata
  bool degenerate_warning = false; // fewer than 5 distinct phat values
};

// Quintile stratification of respondent propensities; type-7 interpolated
// quantiles, ties assigned to the lower stratum.
PropensityStrata quintile_strata(const std::vector<double>& phat_respondents);

struct StratumSummary {
  int stratum = 0;
  std::size_t n = 0;
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0, mean = 0.0;
  bool empty = false;
};

struct StratumOutcomeSummary {
  std::vector<StratumSummary> strata;
  double correlation = 0.0;  // Pearson, phat vs outcome over respondents
};

// Five-number summaries of the outcome per propensity stratum plus the
// propensity-outcome correlation. Vectors are aligned unit by unit.
StratumOutcomeSummary stratum_outcome_summary(const std::vector<int>& stratum_of_unit,
                                              const std::vector<double>& outcome,
                                              const std::vector<double>& phat);
StratumOutcomeSummary stratum_outcome_summary(const PropensityStrata& strata,
                                              const std::vector<double>& outcome,
                                              const std::vector<double>& phat);

struct ClampPolicy {
  double lo = 0.01;
  double hi = 0.99;
};

struct IpwWeights {
  std::vector<double> weight;  // 0 for nonrespondents
  std::size_t clamped_low = 0;
  std::size_t clamped_high = 0;
};

// weight = base / clamp(probability); base defaults to 1. Clamping keeps the
// inverse bounded and is reported, not silent.
IpwWeights ipw_weights(const std::vector<double>& probability,
                       const std::vector<std::uint8_t>& respondent,
                       const std::vector<double>* base_weight = nullptr,
                       const ClampPolicy& clamp = {});

// Plot-data helpers mirroring the propensity histogram and quintile boxplots.
struct Histogram {
  std::vector<double> edges;   // size bins + 1
  std::vector<std::size_t> counts;
};
Histogram propensity_histogram(const std::vector<double>& phat, std::size_t bins = 20);

}  // namespace nrba::propensity
