#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "nrba/dataset.hpp"

namespace nrba::glm {

// A model term: one column (main effect) or two (two-way interaction).
struct Term {
  std::vector<std::string> columns;

  static Term main(std::string c) { return Term{{std::move(c)}}; }
  static Term interaction(std::string a, std::string b) {
    return Term{{std::move(a), std::move(b)}};
  }
  std::string label() const;
  bool operator==(const Term& o) const { return columns == o.columns; }
};

struct DesignMatrixSpec {
  std::vector<Term> terms;
  bool intercept = true;
};

// One multiplicative factor of an expanded design column: either the value of
// a continuous column or an indicator for a categorical level.
struct Factor {
  std::string column;
  Measurement measurement = Measurement::Continuous;
  std::string level;  // categorical only
};

struct ExpandedColumn {
  std::string label;
  std::vector<Factor> factors;  // empty = intercept
};

// Expansion of a DesignMatrixSpec against a dataset's level tables.
// Reference-cell coding: the first level in sorted order is the baseline.
struct DesignInfo {
  DesignMatrixSpec spec;
  std::vector<ExpandedColumn> columns;              // full declared expansion
  std::vector<std::vector<std::string>> known_levels;  // per factor column used
  std::vector<std::string> factor_columns;          // categorical columns used
};

DesignInfo build_design(const RectDataset& d, const DesignMatrixSpec& spec);

// rows with the response and every design column observed
std::vector<std::size_t> complete_rows(const RectDataset& d,
                                       const DesignInfo& design,
                                       const std::string& response);

struct LinearFit {
  DesignInfo design;
  std::vector<std::size_t> kept_cols;  // indices into design.columns
  std::vector<std::string> kept;     // labels of retained columns
  std::vector<std::string> dropped;  // rank-deficient columns, first-come kept
  std::vector<double> coefficients;  // aligned with kept
  std::vector<double> cov;           // k*k row-major, sigma2 * (X'X)^-1
  double rss = 0.0;
  double sigma2 = 0.0;
  double aic = 0.0;                  // -inf when rss == 0
  std::size_t n = 0;
  std::size_t k = 0;
};

struct LogisticFit {
  DesignInfo design;
  std::vector<std::size_t> kept_cols;
  std::vector<std::string> kept;
  std::vector<std::string> dropped;
  std::vector<double> coefficients;
  std::vector<double> cov;           // (X'WX)^-1 at convergence
  double deviance = 0.0;
  double aic = 0.0;
  bool converged = false;
  bool separation_warning = false;
  std::size_t iterations = 0;
  std::size_t n = 0;
  std::size_t k = 0;
};

// Ordinary least squares on the complete-case rows (or the given subset).
LinearFit fit_ols(const RectDataset& d, const DesignMatrixSpec& spec,
                  const std::string& response,
                  const std::vector<std::size_t>* rows = nullptr);

// Logistic regression by iteratively reweighted least squares; converges when
// the relative deviance change drops below 1e-10 (max 50 iterations).
LogisticFit fit_logistic(const RectDataset& d, const DesignMatrixSpec& spec,
                         const std::string& response,
                         const std::vector<std::size_t>* rows = nullptr);

enum class PredictScale { Linear, Response };

std::vector<double> predict(const LinearFit& fit, const RectDataset& d,
                            const std::vector<std::size_t>& rows,
                            PredictScale scale = PredictScale::Response);
std::vector<double> predict(const LogisticFit& fit, const RectDataset& d,
                            const std::vector<std::size_t>& rows,
                            PredictScale scale = PredictScale::Response);

// n*ln(rss/n) + 2(k+1) for linear fits (error variance counted as a
// parameter); deviance + 2k for logistic fits. Throws PerfectFitError when
// rss == 0.
double model_aic(const LinearFit& fit);
double model_aic(const LogisticFit& fit);

enum class Family { Linear, Logistic };

struct StepwiseStep {
  Term term;
  double aic;  // AIC after accepting the term
};

struct StepwiseResult {
  DesignMatrixSpec selected;
  double initial_aic = 0.0;
  double final_aic = 0.0;
  std::vector<StepwiseStep> path;
  std::vector<std::string> skipped;  // unusable candidates, with reasons
};

// Forward selection from the intercept-only model; at each step adds the
// term with the largest AIC decrease, stops when none decreases it. All
// candidate fits share one complete-case row universe so AICs compare.
StepwiseResult stepwise_forward(const RectDataset& d,
                                const std::string& response,
                                const std::vector<Term>& candidates,
                                Family family,
                                const std::vector<std::size_t>* rows = nullptr);

struct TreeNode {
  std::size_t n = 0;
  double prediction = 0.0;
  // split, when not a leaf
  bool leaf = true;
  std::string column;
  bool categorical = false;
  double threshold = 0.0;   // continuous: x <= threshold goes left
  std::string level;        // categorical: x == level goes left
  std::unique_ptr<TreeNode> left;
  std::unique_ptr<TreeNode> right;
};

struct TreeResult {
  std::unique_ptr<TreeNode> root;
  // distinct (ancestor column, descendant column) pairs, preorder discovery
  std::vector<std::pair<std::string, std::string>> interaction_pairs;
};

// Greedy binary regression/classification tree for interaction screening:
// variance reduction for continuous responses, Gini reduction when the
// response is 0/1. Ties break to the lowest column index, then lowest split.
TreeResult grow_tree(const RectDataset& d, const std::string& response,
                     const std::vector<std::string>& candidates,
                     std::size_t max_depth, std::size_t min_node);

// Mann-Whitney AUC: P(score_1 > score_0) + 0.5 P(tie), computed exactly via
// average ranks.
double auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

double expit(double x);
double logit(double p);

}  // namespace nrba::glm
