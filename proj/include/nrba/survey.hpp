#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nrba::survey {

// PSU/stratum/weight metadata for design-based estimation. Every row needs a
// PSU id (default: each row its own PSU) and a nonnegative weight; zero
// weights mark rows excluded by a nonresponse adjustment.
struct SurveyDesign {
  std::vector<double> weight;
  std::vector<std::int64_t> psu;      // empty = each row its own PSU
  std::vector<std::int64_t> stratum;  // empty = single stratum

  static SurveyDesign equal_weights(std::size_t n);
  void validate(std::size_t n) const;
};

struct EstimateRow {
  std::string label;
  double mean = 0.0;
  double se = 0.0;
  std::optional<double> deff;
  double n_effective = 0.0;
  std::size_t n = 0;  // analyzed rows
};

// Weighted mean with Taylor-linearized SE under with-replacement PSU sampling
// ((a/(a-1)) factor per stratum with a PSUs). Analyzed rows are those with
// positive weight, an observed value, and domain membership when given.
// A stratum with a single PSU among the analyzed rows is an error.
EstimateRow weighted_mean(const std::vector<double>& values,
                          const SurveyDesign& design,
                          const std::vector<std::uint8_t>* observed = nullptr,
                          const std::vector<std::uint8_t>* domain = nullptr,
                          std::string label = "");

// linearized variance / (s^2/n) on the analyzed rows
double design_effect(const std::vector<double>& values, const SurveyDesign& design,
                     const std::vector<std::uint8_t>* observed = nullptr,
                     const std::vector<std::uint8_t>* domain = nullptr);

struct ClassAdjustment {
  SurveyDesign design;                 // adjusted weights; nonrespondents 0
  std::vector<std::string> classes;    // distinct classes, sorted
  std::vector<double> factors;         // eligible total / respondent total
};

// Weighting-class nonresponse adjustment: respondent weights are multiplied
// by the class eligible-to-respondent weight ratio. Classes with eligible
// weight but no respondents are an error listing the offending classes.
ClassAdjustment weighting_class_adjust(const SurveyDesign& design,
                                       const std::vector<std::uint8_t>& respondent,
                                       const std::vector<std::string>& class_of_row);

struct RakingMargin {
  std::string name;
  std::vector<std::string> level_of_row;
  std::map<std::string, double> targets;  // level -> target weighted total
};

struct RakingResult {
  SurveyDesign design;
  bool converged = false;
  std::size_t iterations = 0;
  double max_discrepancy = 0.0;
  std::vector<std::string> discrepancy_report;  // per margin, final state
};

// Iterative proportional fitting of the weights to the margin targets.
RakingResult rake(const SurveyDesign& design, const std::vector<RakingMargin>& margins,
                  std::size_t max_iter = 100, double tol = 1e-8);

struct LabeledDesign {
  std::string label;
  const SurveyDesign* design = nullptr;
  bool report_deff = false;
};

// One row per design (and per subgroup level when given), mirroring the
// unweighted / base-weighted / adjusted comparison layout.
std::vector<EstimateRow> comparison_table(
    const std::vector<double>& values, const std::vector<LabeledDesign>& designs,
    const std::vector<std::uint8_t>* observed = nullptr,
    const std::vector<std::string>* subgroup_of_row = nullptr);

}  // namespace nrba::survey
