#include "nrba/glm.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <set>

#include "nrba/errors.hpp"

namespace nrba::glm {

namespace {

constexpr double kRankTol = 1e-10;

// log(1 + exp(x)) without overflow
double log1pexp(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

struct QrResult {
  Eigen::MatrixXd q;                 // n x k, orthonormal kept columns
  Eigen::MatrixXd r;                 // k x k upper triangular
  std::vector<std::size_t> kept;     // indices into the expanded columns
  std::vector<std::size_t> dropped;
};

// Modified Gram-Schmidt with one reorthogonalization pass. Columns are
// processed in declaration order and dependent columns dropped, so the
// first-come column of an aliased pair is the one retained.
QrResult qr_first_come(const Eigen::MatrixXd& x) {
  const auto n = x.rows();
  const auto m = x.cols();
  QrResult out;
  out.q.resize(n, m);
  out.r = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    Eigen::VectorXd v = x.col(j);
    const double orig_norm = v.norm();
    const auto k = static_cast<Eigen::Index>(out.kept.size());
    Eigen::VectorXd proj = Eigen::VectorXd::Zero(k);
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index i = 0; i < k; ++i) {
        const double c = out.q.col(i).dot(v);
        proj(i) += c;
        v -= c * out.q.col(i);
      }
    }
    const double nv = v.norm();
    if (orig_norm == 0.0 || nv <= kRankTol * orig_norm) {
      out.dropped.push_back(static_cast<std::size_t>(j));
      continue;
    }
    for (Eigen::Index i = 0; i < k; ++i) out.r(i, k) = proj(i);
    out.r(k, k) = nv;
    out.q.col(k) = v / nv;
    out.kept.push_back(static_cast<std::size_t>(j));
  }
  const auto k = static_cast<Eigen::Index>(out.kept.size());
  out.q.conservativeResize(n, k);
  out.r.conservativeResize(k, k);
  return out;
}

Eigen::MatrixXd upper_triangular_inverse(const Eigen::MatrixXd& r) {
  const auto k = r.rows();
  Eigen::MatrixXd inv = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    inv(j, j) = 1.0 / r(j, j);
    for (Eigen::Index i = j - 1; i >= 0; --i) {
      double s = 0.0;
      for (Eigen::Index l = i + 1; l <= j; ++l) s += r(i, l) * inv(l, j);
      inv(i, j) = -s / r(i, i);
    }
  }
  return inv;
}

}  // namespace

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

std::string Term::label() const {
  std::string out;
  for (const auto& c : columns) {
    if (!out.empty()) out += ":";
    out += c;
  }
  return out;
}

DesignInfo build_design(const RectDataset& d, const DesignMatrixSpec& spec) {
  DesignInfo info;
  info.spec = spec;

  if (spec.intercept) info.columns.push_back({"(Intercept)", {}});

  std::set<std::string> factor_cols;
  auto factors_for = [&](const std::string& col) -> std::vector<Factor> {
    const std::size_t j = d.col_index(col);
    const auto& cs = d.spec(j);
    if (cs.measurement == Measurement::Continuous) {
      return {{col, Measurement::Continuous, ""}};
    }
    const auto& lv = d.levels(j);
    if (lv.empty()) throw SchemaError("categorical column '" + col + "' has no observed levels");
    factor_cols.insert(col);
    std::vector<Factor> out;
    // reference-cell coding: first level in sorted order is the baseline
    for (std::size_t l = 1; l < lv.size(); ++l) {
      out.push_back({col, Measurement::Categorical, lv[l]});
    }
    if (out.empty()) throw SchemaError("categorical column '" + col + "' has a single level");
    return out;
  };

  for (const auto& term : spec.terms) {
    if (term.columns.empty() || term.columns.size() > 2) {
      throw SchemaError("term must reference one or two columns");
    }
    if (term.columns.size() == 1) {
      for (auto& f : factors_for(term.columns[0])) {
        std::string label = f.measurement == Measurement::Categorical
                                ? f.column + "=" + f.level
                                : f.column;
        info.columns.push_back({std::move(label), {f}});
      }
    } else {
      const auto fa = factors_for(term.columns[0]);
      const auto fb = factors_for(term.columns[1]);
      for (const auto& a : fa) {
        for (const auto& b : fb) {
          std::string la = a.measurement == Measurement::Categorical
                               ? a.column + "=" + a.level
                               : a.column;
          std::string lb = b.measurement == Measurement::Categorical
                               ? b.column + "=" + b.level
                               : b.column;
          info.columns.push_back({la + ":" + lb, {a, b}});
        }
      }
    }
  }

  for (const auto& c : factor_cols) {
    info.factor_columns.push_back(c);
    info.known_levels.push_back(d.levels(d.col_index(c)));
  }
  return info;
}

namespace {

std::vector<std::string> design_data_columns(const DesignInfo& design) {
  std::set<std::string> cols;
  for (const auto& ec : design.columns) {
    for (const auto& f : ec.factors) cols.insert(f.column);
  }
  return {cols.begin(), cols.end()};
}

void check_levels(const DesignInfo& design, const RectDataset& d,
                  const std::vector<std::size_t>& rows) {
  for (std::size_t f = 0; f < design.factor_columns.size(); ++f) {
    const auto& col = design.factor_columns[f];
    const auto j = d.col_index(col);
    const auto& known = design.known_levels[f];
    for (auto i : rows) {
      if (!d.observed(j, i)) continue;
      const auto& name = d.level_name(j, i);
      if (!std::binary_search(known.begin(), known.end(), name)) {
        throw UnseenLevelError("column '" + col + "' has unseen level '" + name + "'");
      }
    }
  }
}

Eigen::MatrixXd evaluate_design(const DesignInfo& design, const RectDataset& d,
                                const std::vector<std::size_t>& rows) {
  check_levels(design, d, rows);
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto m = static_cast<Eigen::Index>(design.columns.size());
  Eigen::MatrixXd x(n, m);
  for (Eigen::Index c = 0; c < m; ++c) {
    const auto& ec = design.columns[static_cast<std::size_t>(c)];
    for (Eigen::Index r = 0; r < n; ++r) {
      const std::size_t row = rows[static_cast<std::size_t>(r)];
      double v = 1.0;
      for (const auto& f : ec.factors) {
        const std::size_t j = d.col_index(f.column);
        if (!d.observed(j, row)) {
          throw CellError("row " + std::to_string(row) + " missing design column '" +
                          f.column + "'");
        }
        if (f.measurement == Measurement::Continuous) {
          v *= d.value(j, row);
        } else {
          v *= (d.level_name(j, row) == f.level) ? 1.0 : 0.0;
        }
      }
      x(r, c) = v;
    }
  }
  return x;
}

std::vector<double> response_vector(const RectDataset& d, const std::string& response,
                                    const std::vector<std::size_t>& rows) {
  const auto j = d.col_index(response);
  std::vector<double> y;
  y.reserve(rows.size());
  for (auto i : rows) {
    if (!d.observed(j, i)) {
      throw CellError("row " + std::to_string(i) + " missing response '" + response + "'");
    }
    y.push_back(d.value(j, i));
  }
  return y;
}

struct PreparedFit {
  std::vector<std::size_t> rows;
  Eigen::MatrixXd x;       // kept columns only
  Eigen::VectorXd y;
  QrResult qr;
  std::vector<std::string> kept_labels;
  std::vector<std::string> dropped_labels;
};

PreparedFit prepare(const RectDataset& d, const DesignInfo& design,
                    const std::string& response,
                    const std::vector<std::size_t>* rows_in) {
  PreparedFit p;
  p.rows = rows_in ? *rows_in : complete_rows(d, design, response);
  if (p.rows.empty()) throw SingularFitError("zero usable rows for response '" + response + "'");

  Eigen::MatrixXd full = evaluate_design(design, d, p.rows);
  const auto yv = response_vector(d, response, p.rows);
  p.y = Eigen::Map<const Eigen::VectorXd>(yv.data(), static_cast<Eigen::Index>(yv.size()));

  p.qr = qr_first_come(full);
  for (auto j : p.qr.kept) p.kept_labels.push_back(design.columns[j].label);
  for (auto j : p.qr.dropped) p.dropped_labels.push_back(design.columns[j].label);

  const auto k = static_cast<Eigen::Index>(p.qr.kept.size());
  if (k == 0) throw SingularFitError("no usable design columns");
  if (static_cast<Eigen::Index>(p.rows.size()) < k) {
    throw SingularFitError("fewer rows (" + std::to_string(p.rows.size()) +
                           ") than retained columns (" + std::to_string(k) + ")");
  }
  p.x.resize(full.rows(), k);
  for (Eigen::Index c = 0; c < k; ++c) {
    p.x.col(c) = full.col(static_cast<Eigen::Index>(p.qr.kept[static_cast<std::size_t>(c)]));
  }
  return p;
}

}  // namespace

std::vector<std::size_t> complete_rows(const RectDataset& d,
                                       const DesignInfo& design,
                                       const std::string& response) {
  std::vector<std::size_t> cols;
  for (const auto& name : design_data_columns(design)) cols.push_back(d.col_index(name));
  if (!response.empty()) cols.push_back(d.col_index(response));
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < d.n_rows(); ++i) {
    bool ok = true;
    for (auto j : cols) {
      if (!d.observed(j, i)) {
        ok = false;
        break;
      }
    }
    if (ok) rows.push_back(i);
  }
  return rows;
}

LinearFit fit_ols(const RectDataset& d, const DesignMatrixSpec& spec,
                  const std::string& response,
                  const std::vector<std::size_t>* rows) {
  DesignInfo design = build_design(d, spec);
  PreparedFit p = prepare(d, design, response, rows);
  const auto n = p.x.rows();
  const auto k = p.x.cols();

  const Eigen::VectorXd qty = p.qr.q.transpose() * p.y;
  Eigen::VectorXd beta = p.qr.r.triangularView<Eigen::Upper>().solve(qty);
  const Eigen::VectorXd resid = p.y - p.x * beta;
  const double rss = resid.squaredNorm();

  LinearFit fit;
  fit.design = std::move(design);
  fit.kept_cols = p.qr.kept;
  fit.kept = std::move(p.kept_labels);
  fit.dropped = std::move(p.dropped_labels);
  fit.coefficients.assign(beta.data(), beta.data() + k);
  fit.rss = rss;
  fit.n = static_cast<std::size_t>(n);
  fit.k = static_cast<std::size_t>(k);
  fit.sigma2 = (n > k) ? rss / static_cast<double>(n - k) : 0.0;
  fit.aic = static_cast<double>(n) * std::log(rss / static_cast<double>(n)) +
            2.0 * (static_cast<double>(k) + 1.0);

  const Eigen::MatrixXd rinv = upper_triangular_inverse(p.qr.r);
  const Eigen::MatrixXd cov = fit.sigma2 * (rinv * rinv.transpose());
  fit.cov.assign(cov.data(), cov.data() + k * k);  // symmetric, order moot
  return fit;
}

LogisticFit fit_logistic(const RectDataset& d, const DesignMatrixSpec& spec,
                         const std::string& response,
                         const std::vector<std::size_t>* rows) {
  DesignInfo design = build_design(d, spec);
  PreparedFit p = prepare(d, design, response, rows);
  const auto n = p.x.rows();
  const auto k = p.x.cols();

  std::size_t ones = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (p.y(i) != 0.0 && p.y(i) != 1.0) {
      throw DegenerateResponseError("logistic response '" + response + "' is not 0/1");
    }
    ones += (p.y(i) == 1.0);
  }
  if (ones == 0 || ones == static_cast<std::size_t>(n)) {
    throw DegenerateResponseError("logistic response '" + response +
                                  "' has a single class");
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  auto deviance_of = [&](const Eigen::VectorXd& lp) {
    double dev = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      dev += p.y(i) * lp(i) - log1pexp(lp(i));
    }
    return -2.0 * dev;
  };

  double dev = deviance_of(eta);
  bool converged = false;
  std::size_t iter = 0;
  Eigen::MatrixXd xtwx(k, k);
  while (iter < 50) {
    ++iter;
    Eigen::VectorXd w(n), z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pi = expit(eta(i));
      const double wi = std::max(pi * (1.0 - pi), 1e-10);
      w(i) = wi;
      z(i) = eta(i) + (p.y(i) - pi) / wi;
    }
    const Eigen::MatrixXd xw = p.x.array().colwise() * w.array();
    xtwx = p.x.transpose() * xw;
    const Eigen::VectorXd xtwz = xw.transpose() * z;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(xtwx);
    if (ldlt.info() != Eigen::Success) {
      throw SingularFitError("IRLS weighted normal equations are singular");
    }
    beta = ldlt.solve(xtwz);
    eta = p.x * beta;
    const double new_dev = deviance_of(eta);
    const double rel = std::abs(new_dev - dev) / (std::abs(new_dev) + 0.1);
    dev = new_dev;
    if (rel < 1e-10) {
      converged = true;
      break;
    }
  }

  LogisticFit fit;
  fit.design = std::move(design);
  fit.kept_cols = p.qr.kept;
  fit.kept = std::move(p.kept_labels);
  fit.dropped = std::move(p.dropped_labels);
  fit.coefficients.assign(beta.data(), beta.data() + k);
  fit.deviance = dev;
  fit.aic = dev + 2.0 * static_cast<double>(k);
  fit.converged = converged;
  fit.iterations = iter;
  fit.n = static_cast<std::size_t>(n);
  fit.k = static_cast<std::size_t>(k);
  if (!converged && eta.cwiseAbs().maxCoeff() > 30.0) {
    fit.separation_warning = true;
  }

  Eigen::MatrixXd cov = xtwx.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
  fit.cov.assign(cov.data(), cov.data() + k * k);
  return fit;
}

namespace {

template <typename Fit>
std::vector<double> predict_impl(const Fit& fit, const RectDataset& d,
                                 const std::vector<std::size_t>& rows,
                                 PredictScale scale, bool logistic) {
  Eigen::MatrixXd full = evaluate_design(fit.design, d, rows);
  std::vector<double> out(rows.size(), 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    double lp = 0.0;
    for (std::size_t c = 0; c < fit.kept_cols.size(); ++c) {
      lp += fit.coefficients[c] * full(static_cast<Eigen::Index>(r),
                                       static_cast<Eigen::Index>(fit.kept_cols[c]));
    }
    out[r] = (logistic && scale == PredictScale::Response) ? expit(lp) : lp;
  }
  return out;
}

}  // namespace

std::vector<double> predict(const LinearFit& fit, const RectDataset& d,
                            const std::vector<std::size_t>& rows, PredictScale scale) {
  return predict_impl(fit, d, rows, scale, false);
}

std::vector<double> predict(const LogisticFit& fit, const RectDataset& d,
                            const std::vector<std::size_t>& rows, PredictScale scale) {
  return predict_impl(fit, d, rows, scale, true);
}

double model_aic(const LinearFit& fit) {
  if (fit.rss == 0.0) {
    throw PerfectFitError("rss is zero: linear AIC is -infinity");
  }
  return fit.aic;
}

double model_aic(const LogisticFit& fit) { return fit.aic; }

StepwiseResult stepwise_forward(const RectDataset& d, const std::string& response,
                                const std::vector<Term>& candidates, Family family,
                                const std::vector<std::size_t>* rows) {
  if (candidates.empty()) throw SchemaError("stepwise_forward: no candidate terms");

  StepwiseResult out;

  // one shared complete-case universe so every AIC is comparable; candidates
  // on fully missing columns are dropped before the universe is formed
  std::vector<Term> pool;
  std::vector<std::size_t> universe;
  {
    std::set<std::string> cols;
    for (const auto& t : candidates) {
      bool usable = true;
      for (const auto& c : t.columns) {
        const auto j = d.col_index(c);
        const auto& m = d.column_mask(j);
        if (std::none_of(m.begin(), m.end(), [](std::uint8_t v) { return v != 0; })) {
          usable = false;
        }
      }
      if (!usable) {
        out.skipped.push_back(t.label() + ": column entirely missing");
      } else {
        pool.push_back(t);
        for (const auto& c : t.columns) cols.insert(c);
      }
    }
    DesignMatrixSpec all;
    for (const auto& c : cols) all.terms.push_back(Term::main(c));
    const DesignInfo info = build_design(d, all);
    universe = complete_rows(d, info, response);
    if (rows) {
      std::vector<std::size_t> filtered;
      std::set<std::size_t> allow(rows->begin(), rows->end());
      for (auto i : universe) {
        if (allow.count(i)) filtered.push_back(i);
      }
      universe = filtered;
    }
  }
  if (universe.empty()) throw SingularFitError("stepwise_forward: zero usable rows");

  auto aic_of = [&](const DesignMatrixSpec& spec) {
    if (family == Family::Linear) {
      return fit_ols(d, spec, response, &universe).aic;
    }
    return fit_logistic(d, spec, response, &universe).aic;
  };

  DesignMatrixSpec current;  // intercept-only
  double current_aic = aic_of(current);
  out.initial_aic = current_aic;

  std::vector<bool> used(pool.size(), false);
  while (true) {
    if (std::isinf(current_aic) && current_aic < 0) break;  // perfect fit
    double best_aic = current_aic;
    std::size_t best = pool.size();
    for (std::size_t c = 0; c < pool.size(); ++c) {
      if (used[c]) continue;
      DesignMatrixSpec trial = current;
      trial.terms.push_back(pool[c]);
      double a;
      try {
        a = aic_of(trial);
      } catch (const Error& e) {
        out.skipped.push_back(pool[c].label() + ": " + e.what());
        used[c] = true;
        continue;
      }
      if (a < best_aic) {
        best_aic = a;
        best = c;
      }
    }
    if (best == pool.size()) break;  // nothing decreases the AIC
    used[best] = true;
    current.terms.push_back(pool[best]);
    current_aic = best_aic;
    out.path.push_back({pool[best], best_aic});
  }

  out.selected = current;
  out.final_aic = current_aic;
  return out;
}

namespace {

struct SplitSearch {
  bool found = false;
  double reduction = 0.0;
  std::size_t candidate = 0;  // index into the candidate list (sorted by column)
  bool categorical = false;
  double threshold = 0.0;
  std::size_t level = 0;
};

double node_impurity(const std::vector<double>& y, const std::vector<std::size_t>& rows,
                     bool binary) {
  double s = 0.0, s2 = 0.0;
  for (auto i : rows) {
    s += y[i];
    s2 += y[i] * y[i];
  }
  const double n = static_cast<double>(rows.size());
  if (n == 0) return 0.0;
  if (binary) {
    const double p = s / n;
    return 2.0 * n * p * (1.0 - p);  // total Gini impurity
  }
  return std::max(s2 - s * s / n, 0.0);  // total sum of squares
}

double children_impurity_binary(double n, double s, bool /*unused*/) {
  if (n <= 0) return 0.0;
  const double p = s / n;
  return 2.0 * n * p * (1.0 - p);
}

void collect_pairs(const TreeNode* node,
                   std::vector<std::pair<std::string, std::string>>& pairs) {
  if (!node || node->leaf) return;
  // pair this split column with every non-leaf descendant's column
  std::vector<const TreeNode*> stack{node->left.get(), node->right.get()};
  while (!stack.empty()) {
    const TreeNode* cur = stack.back();
    stack.pop_back();
    if (!cur || cur->leaf) continue;
    if (cur->column != node->column) {
      std::pair<std::string, std::string> p{node->column, cur->column};
      bool dup = false;
      for (const auto& e : pairs) {
        if ((e.first == p.first && e.second == p.second) ||
            (e.first == p.second && e.second == p.first)) {
          dup = true;
          break;
        }
      }
      if (!dup) pairs.push_back(p);
    }
    stack.push_back(cur->right.get());
    stack.push_back(cur->left.get());
  }
  collect_pairs(node->left.get(), pairs);
  collect_pairs(node->right.get(), pairs);
}

}  // namespace

TreeResult grow_tree(const RectDataset& d, const std::string& response,
                     const std::vector<std::string>& candidates,
                     std::size_t max_depth, std::size_t min_node) {
  if (max_depth < 1) throw SchemaError("grow_tree: max_depth must be >= 1");
  if (candidates.empty()) throw SchemaError("grow_tree: no candidate columns");

  // candidates ordered by dataset column index; ties break toward the lowest
  std::vector<std::size_t> cand_cols;
  for (const auto& c : candidates) cand_cols.push_back(d.col_index(c));
  std::sort(cand_cols.begin(), cand_cols.end());
  cand_cols.erase(std::unique(cand_cols.begin(), cand_cols.end()), cand_cols.end());

  const std::size_t yj = d.col_index(response);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < d.n_rows(); ++i) {
    bool ok = d.observed(yj, i);
    for (auto j : cand_cols) ok = ok && d.observed(j, i);
    if (ok) rows.push_back(i);
  }
  if (rows.empty()) throw InsufficientDataError("grow_tree: zero usable rows");

  const auto& y = d.column_values(yj);
  bool binary = true;
  for (auto i : rows) binary = binary && (y[i] == 0.0 || y[i] == 1.0);

  const double root_imp = node_impurity(y, rows, binary);
  const double min_gain = 1e-9 * std::max(1.0, root_imp);

  std::function<std::unique_ptr<TreeNode>(std::vector<std::size_t>, std::size_t)> build =
      [&](std::vector<std::size_t> node_rows, std::size_t depth) -> std::unique_ptr<TreeNode> {
    auto node = std::make_unique<TreeNode>();
    node->n = node_rows.size();
    double s = 0.0;
    for (auto i : node_rows) s += y[i];
    node->prediction = node->n ? s / static_cast<double>(node->n) : 0.0;
    if (depth >= max_depth || node_rows.size() < 2) return node;

    const double parent_imp = node_impurity(y, node_rows, binary);
    SplitSearch best;
    for (std::size_t c = 0; c < cand_cols.size(); ++c) {
      const std::size_t j = cand_cols[c];
      const auto& spec = d.spec(j);
      if (spec.measurement == Measurement::Continuous) {
        std::vector<std::size_t> order = node_rows;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          return d.value(j, a) < d.value(j, b);
        });
        double ls = 0.0, ls2 = 0.0;
        double ts = 0.0, ts2 = 0.0;
        for (auto i : order) {
          ts += y[i];
          ts2 += y[i] * y[i];
        }
        const double nd = static_cast<double>(order.size());
        for (std::size_t m = 0; m + 1 < order.size(); ++m) {
          ls += y[order[m]];
          ls2 += y[order[m]] * y[order[m]];
          const double xv = d.value(j, order[m]);
          const double xn = d.value(j, order[m + 1]);
          if (xv == xn) continue;
          const double nl = static_cast<double>(m + 1);
          const double nr = nd - nl;
          if (nl < static_cast<double>(min_node) || nr < static_cast<double>(min_node)) continue;
          double child_imp;
          if (binary) {
            child_imp = children_impurity_binary(nl, ls, true) +
                        children_impurity_binary(nr, ts - ls, true);
          } else {
            const double rs = ts - ls, rs2 = ts2 - ls2;
            child_imp = std::max(ls2 - ls * ls / nl, 0.0) +
                        std::max(rs2 - rs * rs / nr, 0.0);
          }
          const double gain = parent_imp - child_imp;
          if (gain > min_gain && gain > best.reduction) {
            best = {true, gain, c, false, 0.5 * (xv + xn), 0};
          }
        }
      } else {
        const auto& lv = d.levels(j);
        for (std::size_t l = 0; l < lv.size(); ++l) {
          double nl = 0.0, ls = 0.0, ls2 = 0.0;
          double ts = 0.0, ts2 = 0.0;
          for (auto i : node_rows) {
            ts += y[i];
            ts2 += y[i] * y[i];
            if (static_cast<std::size_t>(d.value(j, i)) == l) {
              nl += 1.0;
              ls += y[i];
              ls2 += y[i] * y[i];
            }
          }
          const double nr = static_cast<double>(node_rows.size()) - nl;
          if (nl < static_cast<double>(min_node) || nr < static_cast<double>(min_node)) continue;
          double child_imp;
          if (binary) {
            child_imp = children_impurity_binary(nl, ls, true) +
                        children_impurity_binary(nr, ts - ls, true);
          } else {
            const double rs = ts - ls, rs2 = ts2 - ls2;
            child_imp = std::max(ls2 - ls * ls / nl, 0.0) +
                        std::max(rs2 - rs * rs / nr, 0.0);
          }
          const double gain = parent_imp - child_imp;
          if (gain > min_gain && gain > best.reduction) {
            best = {true, gain, c, true, 0.0, l};
          }
        }
      }
    }

    if (!best.found) return node;

    const std::size_t j = cand_cols[best.candidate];
    node->leaf = false;
    node->column = d.spec(j).name;
    node->categorical = best.categorical;
    std::vector<std::size_t> left_rows, right_rows;
    if (best.categorical) {
      node->level = d.levels(j)[best.level];
      for (auto i : node_rows) {
        (static_cast<std::size_t>(d.value(j, i)) == best.level ? left_rows : right_rows)
            .push_back(i);
      }
    } else {
      node->threshold = best.threshold;
      for (auto i : node_rows) {
        (d.value(j, i) <= best.threshold ? left_rows : right_rows).push_back(i);
      }
    }
    node->left = build(std::move(left_rows), depth + 1);
    node->right = build(std::move(right_rows), depth + 1);
    return node;
  };

  TreeResult out;
  out.root = build(rows, 0);
  collect_pairs(out.root.get(), out.interaction_pairs);
  return out;
}

double auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  if (scores.size() != labels.size()) throw SchemaError("auc: length mismatch");
  const std::size_t n = scores.size();
  std::size_t n1 = 0;
  for (auto l : labels) n1 += (l != 0);
  const std::size_t n0 = n - n1;
  if (n1 == 0 || n0 == 0) throw DegenerateResponseError("auc: labels have a single class");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // average ranks over tied scores
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t t = i; t <= j; ++t) {
      if (labels[order[t]] != 0) rank_sum_pos += avg_rank;
    }
    i = j + 1;
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n1) * static_cast<double>(n1 + 1);
  return u / (static_cast<double>(n1) * static_cast<double>(n0));
}

}  // namespace nrba::glm
