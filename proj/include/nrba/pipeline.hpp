#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nrba/dataset.hpp"
#include "nrba/ppmm.hpp"
#include "nrba/propensity.hpp"

namespace nrba::pipeline {

struct RakingMarginConfig {
  std::string column;
  std::map<std::string, double> targets;
};

struct BenchmarkConfig {
  std::string label;
  double mean = 0.0;
  double se = 0.0;
};

// Single configuration driving the ten-step analysis.
struct NrbaConfig {
  std::string input;  // delimited data file; resolved against the config dir
  char delimiter = ',';
  std::vector<ColumnSpec> columns;
  std::vector<std::string> outcomes;
  std::vector<std::string> auxiliary;        // candidate main effects
  std::vector<std::string> late_auxiliary;   // step-4 late-arriving predictors
  std::vector<std::string> subgroups;
  std::vector<double> phi_grid = {0.0, 0.5, 1.0};
  std::vector<std::string> weighting_classes;
  std::vector<RakingMarginConfig> raking_margins;
  std::vector<BenchmarkConfig> external_benchmarks;
  std::string output_dir = "nrba_report";
  std::uint64_t seed = 0;
  std::size_t tree_max_depth = 4;
  std::size_t tree_min_node = 50;
  propensity::ClampPolicy clamp;

  void validate() const;
};

NrbaConfig load_config(const std::string& path);

struct Warning {
  std::string code;
  std::string message;
};

struct OutcomeModelSummary {
  std::string outcome;
  std::size_t n_fit = 0;       // respondents behind the outcome model
  std::size_t n_eligible = 0;  // scoreable units entering the PPMM
  double aic = 0.0;
  double rho = 0.0;
  double d = 0.0;
  bool sign_flipped = false;
  std::vector<std::string> terms;
};

struct SensitivitySummary {
  std::string outcome;
  std::string subgroup_column;  // empty for the overall table
  std::string group;            // empty for the overall table
  ppmm::SweepTable table;
};

struct NrbaReport {
  ResponsePattern pattern;
  std::vector<OutcomeModelSummary> outcome_models;
  bool propensity_null = false;  // no nonrespondents: steps 5-9 degenerate
  double propensity_auc = 0.0;
  std::vector<SensitivitySummary> sensitivity;
  std::vector<Warning> warnings;
  std::vector<std::string> artifacts;  // file names under output_dir, in write order
};

// Runs Steps 1-10 in order, writing each step's artifacts before the next
// step begins. Hard errors abort with the step number and cause; soft
// conditions accumulate as coded warnings.
NrbaReport run_pipeline(const NrbaConfig& config);

// Step 1 alone: loads the data and writes the pattern artifacts.
ResponsePattern run_patterns(const NrbaConfig& config);

struct SurveyEstimate {
  std::string label;
  double mean = 0.0;
  double se = 0.0;
};

struct ExternalComparisonRow {
  std::string label;
  double survey_mean = 0.0, survey_se = 0.0;
  double benchmark_mean = 0.0, benchmark_se = 0.0;
  double difference = 0.0;
  double combined_se = 0.0;
  bool flagged = false;  // |difference| > 2 * combined se
  std::string caveat;
};

// Generic two-estimate comparison against external benchmarks (Step 8).
std::vector<ExternalComparisonRow> external_comparison(
    const std::vector<SurveyEstimate>& estimates,
    const std::vector<BenchmarkConfig>& benchmarks);

struct ItemAuditRow {
  std::string outcome;
  std::size_t unit_missing = 0;  // unit nonrespondents
  std::size_t item_missing = 0;  // missing among unit respondents
  std::string note;
};

// Step 10: item-only missingness per outcome, with the respondent-
// redefinition note when item nonresponse is present.
std::vector<ItemAuditRow> item_missingness_audit(const RectDataset& d,
                                                 const std::vector<std::string>& outcomes,
                                                 const std::string& response_indicator);

}  // namespace nrba::pipeline
