#include "nrba/survey.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "nrba/errors.hpp"

namespace nrba::survey {

namespace {

std::int64_t psu_of(const SurveyDesign& d, std::size_t i) {
  return d.psu.empty() ? static_cast<std::int64_t>(i) : d.psu[i];
}

std::int64_t stratum_of(const SurveyDesign& d, std::size_t i) {
  return d.stratum.empty() ? 0 : d.stratum[i];
}

// with-replacement PSU linearization of the ratio mean: per-stratum
// (a/(a-1)) * sum over PSUs of (z_psu - zbar)^2, z_i = w_i (y_i - mean)/W.
// The PSU structure comes from the full universe; rows outside the analyzed
// domain contribute zero (indicator-residual domain estimation).
double linearized_variance(const std::vector<double>& values,
                           const SurveyDesign& design,
                           const std::vector<std::size_t>& universe,
                           const std::vector<std::uint8_t>& analyzed,
                           double mean, double wsum) {
  std::map<std::pair<std::int64_t, std::int64_t>, double> z;
  std::map<std::int64_t, std::set<std::int64_t>> strata_psus;
  for (auto i : universe) {
    const auto key = std::make_pair(stratum_of(design, i), psu_of(design, i));
    strata_psus[key.first].insert(key.second);
    double& cell = z[key];
    if (analyzed[i]) cell += design.weight[i] * (values[i] - mean) / wsum;
  }

  double var = 0.0;
  for (const auto& [h, psus] : strata_psus) {
    const auto a = psus.size();
    if (a < 2) {
      throw VarianceUndefinedError("stratum " + std::to_string(h) +
                                   " has a single PSU; variance undefined");
    }
    double zbar = 0.0;
    for (auto c : psus) zbar += z[{h, c}];
    zbar /= static_cast<double>(a);
    double ss = 0.0;
    for (auto c : psus) {
      const double dz = z[{h, c}] - zbar;
      ss += dz * dz;
    }
    var += static_cast<double>(a) / static_cast<double>(a - 1) * ss;
  }
  return var;
}

}  // namespace

SurveyDesign SurveyDesign::equal_weights(std::size_t n) {
  SurveyDesign d;
  d.weight.assign(n, 1.0);
  return d;
}

void SurveyDesign::validate(std::size_t n) const {
  if (weight.size() != n) throw SchemaError("design weight length mismatch");
  for (double w : weight) {
    if (!(w >= 0.0) || std::isnan(w)) throw SchemaError("weights must be nonnegative");
  }
  if (!psu.empty() && psu.size() != n) throw SchemaError("design psu length mismatch");
  if (!stratum.empty() && stratum.size() != n) {
    throw SchemaError("design stratum length mismatch");
  }
}

EstimateRow weighted_mean(const std::vector<double>& values,
                          const SurveyDesign& design,
                          const std::vector<std::uint8_t>* observed,
                          const std::vector<std::uint8_t>* domain,
                          std::string label) {
  design.validate(values.size());

  // estimation universe: positive weight and observed value
  std::vector<std::size_t> universe;
  std::vector<std::uint8_t> analyzed(values.size(), 0);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (design.weight[i] <= 0.0) continue;
    if (observed && !(*observed)[i]) continue;
    universe.push_back(i);
    if (domain && !(*domain)[i]) continue;
    analyzed[i] = 1;
    rows.push_back(i);
  }
  if (rows.empty()) throw InsufficientDataError("weighted_mean: no analyzed rows");

  double wsum = 0.0, wy = 0.0;
  for (auto i : rows) {
    wsum += design.weight[i];
    wy += design.weight[i] * values[i];
  }
  EstimateRow out;
  out.label = std::move(label);
  out.mean = wy / wsum;
  out.n = rows.size();

  const double var = linearized_variance(values, design, universe, analyzed, out.mean, wsum);
  out.se = std::sqrt(var);

  // SRS variance at the same size for the design effect
  double m = 0.0;
  for (auto i : rows) m += values[i];
  m /= static_cast<double>(rows.size());
  double ss = 0.0;
  for (auto i : rows) ss += (values[i] - m) * (values[i] - m);
  const double n = static_cast<double>(rows.size());
  if (rows.size() > 1 && ss > 0.0) {
    const double srs = ss / (n - 1.0) / n;
    out.deff = var / srs;
    out.n_effective = n / *out.deff;
  } else {
    out.n_effective = n;
  }
  return out;
}

double design_effect(const std::vector<double>& values, const SurveyDesign& design,
                     const std::vector<std::uint8_t>* observed,
                     const std::vector<std::uint8_t>* domain) {
  const auto row = weighted_mean(values, design, observed, domain);
  if (!row.deff) throw VarianceUndefinedError("design_effect: zero SRS variance");
  return *row.deff;
}

ClassAdjustment weighting_class_adjust(const SurveyDesign& design,
                                       const std::vector<std::uint8_t>& respondent,
                                       const std::vector<std::string>& class_of_row) {
  const std::size_t n = respondent.size();
  design.validate(n);
  if (class_of_row.size() != n) throw SchemaError("weighting_class_adjust: length mismatch");

  std::map<std::string, double> eligible, responding;
  for (std::size_t i = 0; i < n; ++i) {
    eligible[class_of_row[i]] += design.weight[i];
    if (respondent[i]) responding[class_of_row[i]] += design.weight[i];
  }

  std::vector<std::string> empty_classes;
  for (const auto& [cls, total] : eligible) {
    if (total > 0.0 && responding[cls] <= 0.0) empty_classes.push_back(cls);
  }
  if (!empty_classes.empty()) {
    std::string msg = "weighting classes without respondents:";
    for (const auto& c : empty_classes) msg += " '" + c + "'";
    throw InfeasibleAdjustmentError(msg);
  }

  ClassAdjustment out;
  out.design = design;
  for (const auto& [cls, total] : eligible) {
    out.classes.push_back(cls);
    out.factors.push_back(responding[cls] > 0.0 ? total / responding[cls] : 1.0);
  }
  std::map<std::string, double> factor;
  for (std::size_t k = 0; k < out.classes.size(); ++k) factor[out.classes[k]] = out.factors[k];
  for (std::size_t i = 0; i < n; ++i) {
    out.design.weight[i] = respondent[i] ? design.weight[i] * factor[class_of_row[i]] : 0.0;
  }
  return out;
}

RakingResult rake(const SurveyDesign& design, const std::vector<RakingMargin>& margins,
                  std::size_t max_iter, double tol) {
  const std::size_t n = design.weight.size();
  design.validate(n);
  if (margins.empty()) throw SchemaError("rake: no margins");
  for (const auto& m : margins) {
    if (m.level_of_row.size() != n) throw SchemaError("rake: margin '" + m.name + "' length mismatch");
    for (const auto& [level, target] : m.targets) {
      if (!(target > 0.0)) {
        throw InfeasibleAdjustmentError("rake: target for " + m.name + "=" + level +
                                        " must be positive");
      }
      bool present = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (design.weight[i] > 0.0 && m.level_of_row[i] == level) {
          present = true;
          break;
        }
      }
      if (!present) {
        throw InfeasibleAdjustmentError("rake: category " + m.name + "=" + level +
                                        " has no positive-weight rows");
      }
    }
  }

  RakingResult out;
  out.design = design;
  auto weighted_margin = [&](const RakingMargin& m, const std::string& level) {
    double t = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (m.level_of_row[i] == level) t += out.design.weight[i];
    }
    return t;
  };

  for (std::size_t iter = 1; iter <= max_iter; ++iter) {
    out.iterations = iter;
    for (const auto& m : margins) {
      for (const auto& [level, target] : m.targets) {
        const double current = weighted_margin(m, level);
        if (current <= 0.0) {
          throw InfeasibleAdjustmentError("rake: category " + m.name + "=" + level +
                                          " lost all weight");
        }
        const double f = target / current;
        if (f == 1.0) continue;
        for (std::size_t i = 0; i < n; ++i) {
          if (m.level_of_row[i] == level) out.design.weight[i] *= f;
        }
      }
    }
    double worst = 0.0;
    for (const auto& m : margins) {
      for (const auto& [level, target] : m.targets) {
        worst = std::max(worst, std::abs(weighted_margin(m, level) - target));
      }
    }
    out.max_discrepancy = worst;
    if (worst <= tol) {
      out.converged = true;
      break;
    }
  }

  for (const auto& m : margins) {
    for (const auto& [level, target] : m.targets) {
      const double cur = weighted_margin(m, level);
      out.discrepancy_report.push_back(m.name + "=" + level + ": target " +
                                       std::to_string(target) + ", achieved " +
                                       std::to_string(cur));
    }
  }
  return out;
}

std::vector<EstimateRow> comparison_table(
    const std::vector<double>& values, const std::vector<LabeledDesign>& designs,
    const std::vector<std::uint8_t>* observed,
    const std::vector<std::string>* subgroup_of_row) {
  std::vector<EstimateRow> out;
  std::vector<std::string> levels;
  if (subgroup_of_row) {
    std::set<std::string> s(subgroup_of_row->begin(), subgroup_of_row->end());
    levels.assign(s.begin(), s.end());
  }

  for (const auto& ld : designs) {
    if (!ld.design) throw SchemaError("comparison_table: null design");
    auto overall = weighted_mean(values, *ld.design, observed, nullptr, ld.label);
    if (!ld.report_deff) overall.deff.reset();
    out.push_back(overall);
    for (const auto& lvl : levels) {
      std::vector<std::uint8_t> domain(values.size(), 0);
      for (std::size_t i = 0; i < values.size(); ++i) {
        domain[i] = ((*subgroup_of_row)[i] == lvl) ? 1 : 0;
      }
      auto row = weighted_mean(values, *ld.design, observed, &domain, ld.label + "/" + lvl);
      if (!ld.report_deff) row.deff.reset();
      out.push_back(row);
    }
  }
  return out;
}

}  // namespace nrba::survey
