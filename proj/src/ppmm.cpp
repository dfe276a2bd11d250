#include "nrba/ppmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "nrba/errors.hpp"

namespace nrba::ppmm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct RespondentMoments {
  std::size_t n = 0;   // eligible units
  std::size_t r = 0;   // respondents
  double xbar0 = 0.0;  // respondent means
  double ybar0 = 0.0;
  double sxx0 = 0.0;   // respondent second moments, divided by r
  double syy0 = 0.0;
  double sxy0 = 0.0;
  double xbar1 = 0.0;  // nonrespondent x moments, divided by n - r
  double sxx1 = 0.0;
  double xbar = 0.0;   // overall proxy mean
  double rho = 0.0;
};

RespondentMoments moments(const ProxySeries& p) {
  RespondentMoments m;
  m.n = p.x.size();
  double sx0 = 0.0, sy0 = 0.0, sx1 = 0.0;
  for (std::size_t i = 0; i < m.n; ++i) {
    if (p.respondent[i]) {
      ++m.r;
      sx0 += p.x[i];
      sy0 += p.y[i];
    } else {
      sx1 += p.x[i];
    }
  }
  if (m.r < 3) throw InsufficientDataError("ppmm: fewer than 3 respondents");
  const auto nr = m.n - m.r;
  m.xbar0 = sx0 / static_cast<double>(m.r);
  m.ybar0 = sy0 / static_cast<double>(m.r);
  m.xbar = (sx0 + sx1) / static_cast<double>(m.n);
  if (nr > 0) m.xbar1 = sx1 / static_cast<double>(nr);

  double sxx = 0.0, syy = 0.0, sxy = 0.0, sxx1 = 0.0;
  for (std::size_t i = 0; i < m.n; ++i) {
    if (p.respondent[i]) {
      const double dx = p.x[i] - m.xbar0;
      const double dy = p.y[i] - m.ybar0;
      sxx += dx * dx;
      syy += dy * dy;
      sxy += dx * dy;
    } else {
      const double dx = p.x[i] - m.xbar1;
      sxx1 += dx * dx;
    }
  }
  m.sxx0 = sxx / static_cast<double>(m.r);
  m.syy0 = syy / static_cast<double>(m.r);
  m.sxy0 = sxy / static_cast<double>(m.r);
  if (nr > 0) m.sxx1 = sxx1 / static_cast<double>(nr);
  if (m.sxx0 <= 0.0 || m.syy0 <= 0.0) {
    throw DegenerateProxyError("ppmm: zero respondent variance in x or y");
  }
  m.rho = m.sxy0 / std::sqrt(m.sxx0 * m.syy0);
  return m;
}

double phi_to_lambda(double phi) {
  if (phi < 0.0 || phi > 1.0) {
    throw Error("phi must lie in [0, 1], got " + std::to_string(phi));
  }
  return phi == 1.0 ? kInf : phi / (1.0 - phi);
}

// Eq.-6 ratio without the public positivity guard; at phi = 1 this is 1/rho
double g_unitless(double rho, double phi) {
  if (phi == 1.0) return 1.0 / rho;
  return (phi + (1.0 - phi) * rho) / (phi * rho + (1.0 - phi));
}

// scaled slope applied to (muX - xbar0): sqrt(syy0/sxx0) * g(rho, phi),
// with the dedicated closed form at lambda = infinity
double g_lambda(const RespondentMoments& m, double lambda) {
  if (lambda == kInf) {
    if (m.sxy0 == 0.0) {
      throw DegenerateProxyError("ppmm: rho = 0, the phi = 1 branch is undefined");
    }
    return m.syy0 / m.sxy0;
  }
  return std::sqrt(m.syy0 / m.sxx0) * (lambda + m.rho) / (lambda * m.rho + 1.0);
}

// large-sample variance of the scaled slope
double g_lambda_var(const RespondentMoments& m, double lambda) {
  const double sxx = m.sxx0, syy = m.syy0, sxy = m.sxy0;
  const double r = static_cast<double>(m.r);
  if (lambda == kInf) {
    const double num = (sxx * syy - sxy * sxy) * syy * syy;
    const double den = r * sxy * sxy * sxy * sxy;
    return num / den;
  }
  const double l2 = lambda * lambda;
  const double root = std::sqrt(sxx * syy);
  const double a = sxx * sxx * syy * syy * (1.0 - l2 + l2 * l2);
  const double b = 2.0 * sxx * syy * sxy * lambda *
                   (3.0 * lambda * sxy + root * (1.0 + l2));
  const double c = lambda * sxy * sxy * sxy *
                   (lambda * sxy + 2.0 * root * (1.0 + l2));
  const double num = (sxx * syy - sxy * sxy) * (a + b + c);
  const double base = root + lambda * sxy;
  const double den = r * sxx * sxx * base * base * base * base;
  return num / den;
}

}  // namespace

ProxySeries make_proxy(std::vector<double> x, std::vector<double> y,
                       std::vector<std::uint8_t> respondent) {
  if (x.size() != y.size() || x.size() != respondent.size()) {
    throw SchemaError("proxy series length mismatch");
  }
  ProxySeries p;
  p.x = std::move(x);
  p.y = std::move(y);
  p.respondent = std::move(respondent);
  for (auto r : p.respondent) p.n_respondents += (r != 0);
  if (p.n_respondents < 3) {
    throw InsufficientDataError("proxy: fewer than 3 respondents");
  }

  // respondent Pearson correlation
  double sx = 0.0, sy = 0.0;
  const double r = static_cast<double>(p.n_respondents);
  for (std::size_t i = 0; i < p.x.size(); ++i) {
    if (!p.respondent[i]) continue;
    sx += p.x[i];
    sy += p.y[i];
  }
  const double mx = sx / r, my = sy / r;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < p.x.size(); ++i) {
    if (!p.respondent[i]) continue;
    sxx += (p.x[i] - mx) * (p.x[i] - mx);
    syy += (p.y[i] - my) * (p.y[i] - my);
    sxy += (p.x[i] - mx) * (p.y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    throw DegenerateProxyError("proxy: correlation undefined (zero variance)");
  }
  p.rho_hat = sxy / std::sqrt(sxx * syy);
  if (p.rho_hat < 0.0) {
    for (auto& v : p.x) v = -v;
    p.rho_hat = -p.rho_hat;
    p.sign_flipped = true;
  }
  return p;
}

ProxySeries build_proxy(const glm::LinearFit& outcome_fit, const RectDataset& d,
                        const std::string& outcome,
                        const std::vector<std::size_t>& rows) {
  const auto preds = glm::predict(outcome_fit, d, rows, glm::PredictScale::Response);
  const auto j = d.col_index(outcome);
  std::vector<double> y(rows.size(), 0.0);
  std::vector<std::uint8_t> resp(rows.size(), 0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (d.observed(j, rows[i])) {
      resp[i] = 1;
      y[i] = d.value(j, rows[i]);
    }
  }
  return make_proxy(preds, std::move(y), std::move(resp));
}

double g_coefficient(double rho, double phi) {
  if (phi < 0.0 || phi > 1.0) {
    throw Error("phi must lie in [0, 1], got " + std::to_string(phi));
  }
  if (rho <= 0.0) {
    throw DegenerateProxyError("g_coefficient: proxy must be positively oriented (rho > 0)");
  }
  return (phi + (1.0 - phi) * rho) / (phi * rho + (1.0 - phi));
}

PpmmEstimate ppmm_mle(const ProxySeries& proxy, double phi) {
  const double lambda = phi_to_lambda(phi);
  const RespondentMoments m = moments(proxy);
  const auto nr = m.n - m.r;

  PpmmEstimate est;
  est.phi = phi;
  est.lambda = lambda;
  est.n = m.n;
  est.r = m.r;
  est.muX = m.xbar;

  if (nr == 0) {
    // fully observed: every estimate collapses to respondent statistics
    est.g = g_unitless(m.rho, phi);
    est.sigmaXX = m.sxx0;
    est.sigmaYY = m.syy0;
    est.sigmaXY = m.sxy0;
    est.muY = m.ybar0;
    est.muYvar = m.syy0 / static_cast<double>(m.n);
    est.nrba = 0.0;
    return est;
  }

  const double gl = g_lambda(m, lambda);
  const double glv = g_lambda_var(m, lambda);
  const double n = static_cast<double>(m.n);
  const double r = static_cast<double>(m.r);
  const double fr = r / n;
  const double fnr = static_cast<double>(nr) / n;

  est.g = g_unitless(m.rho, phi);
  est.sigmaXX = fr * m.sxx0 + fnr * m.sxx1 +
                fr * fnr * (m.xbar0 - m.xbar1) * (m.xbar0 - m.xbar1);
  est.muY = m.ybar0 + gl * (m.xbar - m.xbar0);
  est.sigmaYY = m.syy0 + gl * gl * (est.sigmaXX - m.sxx0);
  est.sigmaXY = m.sxy0 + gl * (est.sigmaXX - m.sxx0);
  const double one = est.sigmaYY / n;
  const double two = glv * (m.xbar - m.xbar0) * (m.xbar - m.xbar0);
  const double three = (static_cast<double>(nr) / (r * n)) *
                       (m.syy0 - 2.0 * gl * m.sxy0 + gl * gl * m.sxx0);
  est.muYvar = one + two + three;
  est.nrba = est.muY - m.ybar0;
  return est;
}

double nrba_index(const ProxySeries& proxy, double phi) {
  if (phi < 0.0 || phi > 1.0) throw Error("phi must lie in [0, 1]");
  const RespondentMoments m = moments(proxy);
  if (phi == 1.0 && m.rho <= 0.0) {
    throw DegenerateProxyError("nrba_index: rho = 0, the phi = 1 case is undefined");
  }
  return g_unitless(m.rho, phi) * std::sqrt(m.syy0 / m.sxx0) * (m.xbar - m.xbar0);
}

double standardized_deviation(const ProxySeries& proxy) {
  const RespondentMoments m = moments(proxy);
  // respondent sample sd (r - 1 denominator, as in sample summaries)
  const double ss = m.sxx0 * static_cast<double>(m.r);
  const double sd = std::sqrt(ss / static_cast<double>(m.r - 1));
  if (sd <= 0.0) throw DegenerateProxyError("standardized_deviation: zero respondent sd");
  return (m.xbar - m.xbar0) / sd;
}

const char* rho_class_name(RhoClass c) {
  switch (c) {
    case RhoClass::Weak: return "weak";
    case RhoClass::Moderate: return "moderate";
    case RhoClass::Strong: return "strong";
  }
  return "?";
}

const char* d_class_name(DClass c) {
  switch (c) {
    case DClass::Small: return "small";
    case DClass::Medium: return "medium";
    case DClass::Large: return "large";
  }
  return "?";
}

StrengthVerdict classify_strength(double rho, double d) {
  StrengthVerdict v;
  v.d = d;
  if (rho < 0.4) {
    v.rho_class = RhoClass::Weak;
  } else if (rho <= 0.7) {
    v.rho_class = RhoClass::Moderate;
  } else {
    v.rho_class = RhoClass::Strong;
  }
  const double a = std::abs(d);
  if (a < 0.1) {
    v.d_class = DClass::Small;
  } else if (a <= 0.3) {
    v.d_class = DClass::Medium;
  } else {
    v.d_class = DClass::Large;
  }
  return v;
}

std::vector<SubgroupEstimate> subgroup_nrba(const ProxySeries& proxy,
                                            const std::vector<std::string>& group_of_unit,
                                            double phi,
                                            std::vector<std::string>* skipped) {
  if (group_of_unit.size() != proxy.x.size()) {
    throw SchemaError("subgroup_nrba: group labels do not align with proxy units");
  }
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < group_of_unit.size(); ++i) {
    groups[group_of_unit[i]].push_back(i);
  }

  std::vector<SubgroupEstimate> out;
  for (const auto& [name, idx] : groups) {
    std::vector<double> x, y;
    std::vector<std::uint8_t> resp;
    for (auto i : idx) {
      x.push_back(proxy.x[i]);
      y.push_back(proxy.y[i]);
      resp.push_back(proxy.respondent[i]);
    }
    try {
      // keep the global orientation: group data inherit the flipped proxy
      ProxySeries sub;
      sub.x = std::move(x);
      sub.y = std::move(y);
      sub.respondent = std::move(resp);
      for (auto r : sub.respondent) sub.n_respondents += (r != 0);
      if (sub.n_respondents < 3) {
        throw InsufficientDataError("fewer than 3 respondents");
      }
      const RespondentMoments m = moments(sub);
      if (m.rho <= 0.0) {
        throw DegenerateProxyError("nonpositive group correlation");
      }
      sub.rho_hat = m.rho;
      SubgroupEstimate e;
      e.group = name;
      e.rho = m.rho;
      e.ybar_r = m.ybar0;
      e.d = standardized_deviation(sub);
      e.estimate = ppmm_mle(sub, phi);
      out.push_back(std::move(e));
    } catch (const Error& err) {
      if (skipped) skipped->push_back(name + ": " + err.what());
    }
  }
  return out;
}

SweepTable sensitivity_sweep(const ProxySeries& proxy, std::vector<double> phis) {
  if (phis.empty()) phis = {0.0, 0.5, 1.0};
  for (double p : phis) {
    if (p < 0.0 || p > 1.0) throw Error("sensitivity_sweep: phi grid must lie in [0, 1]");
  }
  const RespondentMoments m = moments(proxy);
  SweepTable t;
  t.rho = m.rho;
  t.d = standardized_deviation(proxy);
  t.ybar_r = m.ybar0;
  for (double phi : phis) {
    const PpmmEstimate est = ppmm_mle(proxy, phi);
    t.rows.push_back({phi, est.muY, std::sqrt(est.muYvar), est.nrba});
  }
  // overlap diagnostic: do all 95% intervals pairwise intersect?
  t.intervals_overlap = true;
  for (std::size_t a = 0; a < t.rows.size() && t.intervals_overlap; ++a) {
    for (std::size_t b = a + 1; b < t.rows.size(); ++b) {
      const double lo_a = t.rows[a].muY - 1.96 * t.rows[a].se;
      const double hi_a = t.rows[a].muY + 1.96 * t.rows[a].se;
      const double lo_b = t.rows[b].muY - 1.96 * t.rows[b].se;
      const double hi_b = t.rows[b].muY + 1.96 * t.rows[b].se;
      if (hi_a < lo_b || hi_b < lo_a) {
        t.intervals_overlap = false;
        break;
      }
    }
  }
  return t;
}

std::vector<GroupSweep> sensitivity_sweep_by_group(
    const ProxySeries& proxy, const std::vector<std::string>& group_of_unit,
    std::vector<double> phis, std::vector<std::string>* skipped) {
  if (phis.empty()) phis = {0.0, 0.5, 1.0};
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < group_of_unit.size(); ++i) {
    groups[group_of_unit[i]].push_back(i);
  }
  std::vector<GroupSweep> out;
  for (const auto& [name, idx] : groups) {
    ProxySeries sub;
    for (auto i : idx) {
      sub.x.push_back(proxy.x[i]);
      sub.y.push_back(proxy.y[i]);
      sub.respondent.push_back(proxy.respondent[i]);
      sub.n_respondents += (proxy.respondent[i] != 0);
    }
    try {
      if (sub.n_respondents < 3) throw InsufficientDataError("fewer than 3 respondents");
      const RespondentMoments m = moments(sub);
      if (m.rho <= 0.0) throw DegenerateProxyError("nonpositive group correlation");
      sub.rho_hat = m.rho;
      out.push_back({name, sensitivity_sweep(sub, phis)});
    } catch (const Error& err) {
      if (skipped) skipped->push_back(name + ": " + err.what());
    }
  }
  return out;
}

}  // namespace nrba::ppmm
