#include "nrba/propensity.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "nrba/errors.hpp"

namespace nrba::propensity {

namespace {

// type-7 quantile: linear interpolation between order statistics
double quantile_type7(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = static_cast<double>(n - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
    sab += (a[i] - ma) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

PropensityModel fit_stage_propensity(const RectDataset& d,
                                     const std::string& response_indicator,
                                     const std::vector<glm::Term>& predictors,
                                     const std::vector<std::size_t>* fit_filter,
                                     StageLevel level) {
  glm::DesignMatrixSpec spec;
  spec.terms = predictors;

  const glm::DesignInfo info = glm::build_design(d, spec);
  std::vector<std::size_t> eligible = glm::complete_rows(d, info, response_indicator);
  std::vector<std::size_t> fit_rows;
  if (fit_filter) {
    std::set<std::size_t> allow(fit_filter->begin(), fit_filter->end());
    for (auto i : eligible) {
      if (allow.count(i)) fit_rows.push_back(i);
    }
  } else {
    fit_rows = eligible;
  }

  PropensityModel m;
  m.level = level;
  m.fit = glm::fit_logistic(d, spec, response_indicator, &fit_rows);
  m.fit_rows = fit_rows;

  // score every row with observed predictors (indicator not needed to score)
  m.scored_rows = glm::complete_rows(d, info, "");
  m.phat = glm::predict(m.fit, d, m.scored_rows, glm::PredictScale::Response);
  for (std::size_t i = 0; i < m.phat.size(); ++i) {
    if (m.phat[i] <= 0.0 || m.phat[i] >= 1.0) m.flagged_units.push_back(m.scored_rows[i]);
  }

  const auto yj = d.col_index(response_indicator);
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  const auto fitted = glm::predict(m.fit, d, fit_rows, glm::PredictScale::Response);
  for (std::size_t i = 0; i < fit_rows.size(); ++i) {
    scores.push_back(fitted[i]);
    labels.push_back(d.value(yj, fit_rows[i]) != 0.0 ? 1 : 0);
  }
  m.auc = glm::auc(scores, labels);
  return m;
}

ComposedPropensity compose_propensities(const std::vector<std::vector<double>>& stage_phat) {
  if (stage_phat.empty()) throw SchemaError("compose_propensities: no stages");
  const std::size_t n = stage_phat[0].size();
  for (const auto& s : stage_phat) {
    if (s.size() != n) throw SchemaError("compose_propensities: stage length mismatch");
  }
  ComposedPropensity out;
  out.probability.assign(n, 1.0);
  for (const auto& s : stage_phat) {
    for (std::size_t i = 0; i < n; ++i) out.probability[i] *= s[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (out.probability[i] <= 0.0 || out.probability[i] >= 1.0) {
      out.flagged_units.push_back(i);
    }
  }
  return out;
}

ComposedPropensity compose_propensities(const std::vector<const PropensityModel*>& stages) {
  std::vector<std::vector<double>> phats;
  for (const auto* s : stages) {
    if (!s) throw SchemaError("compose_propensities: null stage");
    phats.push_back(s->phat);
  }
  return compose_propensities(phats);
}

PropensityStrata quintile_strata(const std::vector<double>& phat_respondents) {
  if (phat_respondents.size() < 5) {
    throw InsufficientDataError("quintile_strata: fewer than 5 respondents");
  }
  std::vector<double> sorted = phat_respondents;
  std::sort(sorted.begin(), sorted.end());

  PropensityStrata s;
  for (double q : {0.2, 0.4, 0.6, 0.8}) s.breaks.push_back(quantile_type7(sorted, q));

  s.stratum.resize(phat_respondents.size());
  std::set<int> occupied;
  for (std::size_t i = 0; i < phat_respondents.size(); ++i) {
    int k = 1;
    for (double b : s.breaks) {
      if (b < phat_respondents[i]) ++k;  // ties go to the lower stratum
    }
    s.stratum[i] = k;
    occupied.insert(k);
  }
  s.n_strata = occupied.size();

  std::set<double> distinct(phat_respondents.begin(), phat_respondents.end());
  s.degenerate_warning = distinct.size() < 5;
  return s;
}

StratumOutcomeSummary stratum_outcome_summary(const PropensityStrata& strata,
                                              const std::vector<double>& outcome,
                                              const std::vector<double>& phat) {
  return stratum_outcome_summary(strata.stratum, outcome, phat);
}

StratumOutcomeSummary stratum_outcome_summary(const std::vector<int>& stratum_of_unit,
                                              const std::vector<double>& outcome,
                                              const std::vector<double>& phat) {
  if (outcome.size() != stratum_of_unit.size() || phat.size() != stratum_of_unit.size()) {
    throw SchemaError("stratum_outcome_summary: length mismatch");
  }
  StratumOutcomeSummary out;
  for (int k = 1; k <= 5; ++k) {
    std::vector<double> vals;
    for (std::size_t i = 0; i < outcome.size(); ++i) {
      if (stratum_of_unit[i] == k) vals.push_back(outcome[i]);
    }
    StratumSummary s;
    s.stratum = k;
    s.n = vals.size();
    if (vals.empty()) {
      s.empty = true;
    } else {
      std::sort(vals.begin(), vals.end());
      s.min = vals.front();
      s.max = vals.back();
      s.q1 = quantile_type7(vals, 0.25);
      s.median = quantile_type7(vals, 0.5);
      s.q3 = quantile_type7(vals, 0.75);
      double m = 0.0;
      for (double v : vals) m += v;
      s.mean = m / static_cast<double>(vals.size());
    }
    out.strata.push_back(s);
  }
  out.correlation = pearson(phat, outcome);
  return out;
}

IpwWeights ipw_weights(const std::vector<double>& probability,
                       const std::vector<std::uint8_t>& respondent,
                       const std::vector<double>* base_weight,
                       const ClampPolicy& clamp) {
  if (probability.size() != respondent.size()) {
    throw SchemaError("ipw_weights: length mismatch");
  }
  if (base_weight && base_weight->size() != probability.size()) {
    throw SchemaError("ipw_weights: base weight length mismatch");
  }
  if (!(clamp.lo > 0.0 && clamp.lo <= clamp.hi && clamp.hi < 1.0)) {
    throw Error("ipw_weights: clamp bounds must satisfy 0 < lo <= hi < 1");
  }
  IpwWeights out;
  out.weight.assign(probability.size(), 0.0);
  for (std::size_t i = 0; i < probability.size(); ++i) {
    if (!respondent[i]) continue;
    double p = probability[i];
    if (p < clamp.lo) {
      p = clamp.lo;
      ++out.clamped_low;
    } else if (p > clamp.hi) {
      p = clamp.hi;
      ++out.clamped_high;
    }
    const double base = base_weight ? (*base_weight)[i] : 1.0;
    out.weight[i] = base / p;
  }
  return out;
}

Histogram propensity_histogram(const std::vector<double>& phat, std::size_t bins) {
  if (bins == 0) throw Error("propensity_histogram: bins must be positive");
  Histogram h;
  h.counts.assign(bins, 0);
  for (std::size_t b = 0; b <= bins; ++b) {
    h.edges.push_back(static_cast<double>(b) / static_cast<double>(bins));
  }
  for (double p : phat) {
    auto b = static_cast<std::size_t>(std::floor(p * static_cast<double>(bins)));
    if (b >= bins) b = bins - 1;
    ++h.counts[b];
  }
  return h;
}

}  // namespace nrba::propensity
