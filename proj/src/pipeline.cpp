#include "nrba/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "nrba/errors.hpp"
#include "nrba/report.hpp"
#include "nrba/survey.hpp"

namespace nrba::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using report::fmt;
using report::Table;

namespace {

std::string phi_label(double phi) { return "phi=" + fmt(phi); }

// per-row level labels of a (usually categorical) column; "(missing)" where
// the cell is unobserved
std::vector<std::string> row_labels(const RectDataset& d, const std::string& column) {
  const auto j = d.col_index(column);
  std::vector<std::string> out(d.n_rows());
  const bool cat = d.spec(j).measurement == Measurement::Categorical;
  for (std::size_t i = 0; i < d.n_rows(); ++i) {
    if (!d.observed(j, i)) {
      out[i] = "(missing)";
    } else if (cat) {
      out[i] = d.level_name(j, i);
    } else {
      out[i] = fmt(d.value(j, i));
    }
  }
  return out;
}

std::vector<std::int64_t> id_column(const RectDataset& d, Role role) {
  std::vector<std::int64_t> out;
  const auto col = d.role_col(role);
  if (!col) return out;
  out.resize(d.n_rows());
  for (std::size_t i = 0; i < d.n_rows(); ++i) {
    if (!d.observed(*col, i)) {
      throw SchemaError("column '" + d.spec(*col).name + "' (role " +
                        role_name(role) + ") has missing values");
    }
    out[i] = static_cast<std::int64_t>(std::llround(d.value(*col, i)));
  }
  return out;
}

struct StepGuard {
  int step;
  const char* name;
  template <typename F>
  auto run(F&& f) -> decltype(f()) {
    try {
      return f();
    } catch (const Error& e) {
      throw Error("step " + std::to_string(step) + " (" + name + "): " + e.what());
    }
  }
};

}  // namespace

void NrbaConfig::validate() const {
  if (input.empty()) throw SchemaError("config: input file required");
  if (columns.empty()) throw SchemaError("config: column schema required");
  if (outcomes.empty()) throw SchemaError("config: at least one outcome required");
  std::set<std::string> names;
  for (const auto& c : columns) names.insert(c.name);
  auto require = [&](const std::string& n, const char* what) {
    if (!names.count(n)) {
      throw SchemaError(std::string("config: ") + what + " column '" + n +
                        "' not in the schema");
    }
  };
  for (const auto& o : outcomes) require(o, "outcome");
  for (const auto& a : auxiliary) require(a, "auxiliary");
  for (const auto& a : late_auxiliary) require(a, "late auxiliary");
  for (const auto& s : subgroups) require(s, "subgroup");
  for (const auto& w : weighting_classes) require(w, "weighting class");
  for (const auto& m : raking_margins) require(m.column, "raking margin");
  for (double p : phi_grid) {
    if (p < 0.0 || p > 1.0) throw SchemaError("config: phi grid values must lie in [0, 1]");
  }
  bool has_indicator = false;
  for (const auto& c : columns) {
    has_indicator = has_indicator || c.role == Role::ResponseIndicator;
  }
  if (!has_indicator) throw SchemaError("config: a response-indicator column is required");
  if (output_dir.empty()) throw SchemaError("config: output_dir required");
}

NrbaConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ParseError("config is not valid JSON: " + std::string(e.what()));
  }

  NrbaConfig c;
  c.input = j.at("input").get<std::string>();
  if (j.contains("delimiter")) {
    const auto s = j["delimiter"].get<std::string>();
    if (s.size() != 1) throw SchemaError("config: delimiter must be one character");
    c.delimiter = s[0];
  }
  for (const auto& jc : j.at("columns")) {
    ColumnSpec cs;
    cs.name = jc.at("name").get<std::string>();
    cs.role = role_from_name(jc.at("role").get<std::string>());
    cs.measurement = measurement_from_name(jc.at("measurement").get<std::string>());
    if (jc.contains("missing_sentinels")) {
      for (const auto& s : jc["missing_sentinels"]) {
        cs.missing_sentinels.push_back(s.get<std::string>());
      }
    }
    c.columns.push_back(std::move(cs));
  }
  auto strings = [&](const char* key) {
    std::vector<std::string> out;
    if (j.contains(key)) {
      for (const auto& s : j[key]) out.push_back(s.get<std::string>());
    }
    return out;
  };
  c.outcomes = strings("outcomes");
  c.auxiliary = strings("auxiliary");
  c.late_auxiliary = strings("late_auxiliary");
  c.subgroups = strings("subgroups");
  c.weighting_classes = strings("weighting_classes");
  if (j.contains("phi_grid")) {
    c.phi_grid.clear();
    for (const auto& p : j["phi_grid"]) c.phi_grid.push_back(p.get<double>());
  }
  if (j.contains("raking_margins")) {
    for (const auto& m : j["raking_margins"]) {
      RakingMarginConfig rm;
      rm.column = m.at("column").get<std::string>();
      for (const auto& [level, target] : m.at("targets").items()) {
        rm.targets[level] = target.get<double>();
      }
      c.raking_margins.push_back(std::move(rm));
    }
  }
  if (j.contains("external_benchmarks")) {
    for (const auto& b : j["external_benchmarks"]) {
      c.external_benchmarks.push_back({b.at("label").get<std::string>(),
                                       b.at("mean").get<double>(),
                                       b.at("se").get<double>()});
    }
  }
  if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("tree")) {
    if (j["tree"].contains("max_depth")) c.tree_max_depth = j["tree"]["max_depth"].get<std::size_t>();
    if (j["tree"].contains("min_node")) c.tree_min_node = j["tree"]["min_node"].get<std::size_t>();
  }
  if (j.contains("clamp")) {
    c.clamp.lo = j["clamp"].at(0).get<double>();
    c.clamp.hi = j["clamp"].at(1).get<double>();
  }

  // input and output paths resolve against the config's directory
  const fs::path base = fs::path(path).parent_path();
  if (!fs::path(c.input).is_absolute()) c.input = (base / c.input).string();
  if (!fs::path(c.output_dir).is_absolute()) c.output_dir = (base / c.output_dir).string();
  c.validate();
  return c;
}

std::vector<ExternalComparisonRow> external_comparison(
    const std::vector<SurveyEstimate>& estimates,
    const std::vector<BenchmarkConfig>& benchmarks) {
  static const char* kCaveat =
      "differences in the estimates could be due to other sources of heterogeneity";
  std::vector<ExternalComparisonRow> out;
  for (const auto& b : benchmarks) {
    const SurveyEstimate* match = nullptr;
    for (const auto& e : estimates) {
      if (e.label == b.label) {
        match = &e;
        break;
      }
    }
    if (!match) throw SchemaError("external_comparison: no estimate labeled '" + b.label + "'");
    ExternalComparisonRow r;
    r.label = b.label;
    r.survey_mean = match->mean;
    r.survey_se = match->se;
    r.benchmark_mean = b.mean;
    r.benchmark_se = b.se;
    r.difference = match->mean - b.mean;
    r.combined_se = std::sqrt(match->se * match->se + b.se * b.se);
    r.flagged = std::abs(r.difference) > 2.0 * r.combined_se;
    r.caveat = kCaveat;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ItemAuditRow> item_missingness_audit(const RectDataset& d,
                                                 const std::vector<std::string>& outcomes,
                                                 const std::string& response_indicator) {
  const auto rj = d.col_index(response_indicator);
  std::vector<ItemAuditRow> out;
  for (const auto& o : outcomes) {
    const auto oj = d.col_index(o);
    ItemAuditRow row;
    row.outcome = o;
    for (std::size_t i = 0; i < d.n_rows(); ++i) {
      const bool responds = d.value(rj, i) != 0.0;
      if (!responds) {
        ++row.unit_missing;
      } else if (!d.observed(oj, i)) {
        ++row.item_missing;
      }
    }
    row.note = row.item_missing == 0
                   ? "no item nonresponse"
                   : "analyses of this outcome treat the " +
                         std::to_string(d.n_rows() - row.unit_missing - row.item_missing) +
                         " observed cases as respondents";
    out.push_back(std::move(row));
  }
  return out;
}

namespace {

struct ArtifactWriter {
  std::string dir;
  std::vector<std::string>* artifacts;
  void table(const std::string& name, const Table& t) {
    t.write((fs::path(dir) / name).string());
    artifacts->push_back(name);
  }
  void text(const std::string& name, const std::string& content) {
    report::write_file((fs::path(dir) / name).string(), content);
    artifacts->push_back(name);
  }
};

void write_step1(const RectDataset& d, const ResponsePattern& pattern,
                 const std::vector<std::string>& outcomes, ArtifactWriter& w) {
  Table cols({"column", "n", "n_missing", "missing_rate"});
  for (std::size_t j = 0; j < pattern.column_names.size(); ++j) {
    const auto missing = static_cast<std::size_t>(
        std::llround(pattern.column_missing_rates[j] * static_cast<double>(pattern.n)));
    cols.add_row({pattern.column_names[j], fmt(static_cast<double>(pattern.n)),
                  fmt(static_cast<double>(missing)), fmt(pattern.column_missing_rates[j])});
  }
  w.table("step01_column_missingness.csv", cols);

  Table classes({"pattern", "count"});
  for (const auto& pc : pattern.classes) {
    std::string p;
    for (auto b : pc.pattern) p += (b ? '1' : '0');
    classes.add_row({p, fmt(static_cast<double>(pc.count))});
  }
  w.table("step01_pattern_classes.csv", classes);

  Table mono({"key", "value"});
  mono.add_row({"n_rows", fmt(static_cast<double>(pattern.n))});
  mono.add_row({"n_columns", fmt(static_cast<double>(pattern.column_names.size()))});
  mono.add_row({"monotone", pattern.monotone ? "true" : "false"});
  w.table("step01_summary.csv", mono);

  if (!outcomes.empty()) {
    std::vector<std::vector<std::string>> groups;
    for (const auto& o : outcomes) groups.push_back({o});
    const auto cross = cross_pattern_table(d, groups, outcomes);
    std::vector<std::string> header;
    for (const auto& g : cross.group_names) header.push_back(g);
    header.push_back("count");
    Table t(header);
    for (std::size_t idx = 0; idx < cross.counts.size(); ++idx) {
      std::vector<std::string> row;
      for (std::size_t g = 0; g < cross.group_names.size(); ++g) {
        row.push_back((idx >> g) & 1 ? "R" : "NR");
      }
      row.push_back(fmt(static_cast<double>(cross.counts[idx])));
      t.add_row(row);
    }
    w.table("step01_cross_patterns.csv", t);
  }
}

}  // namespace

ResponsePattern run_patterns(const NrbaConfig& config) {
  config.validate();
  const RectDataset d = load_table(config.input, config.columns, {config.delimiter});
  fs::create_directories(config.output_dir);
  std::vector<std::string> artifacts;
  ArtifactWriter w{config.output_dir, &artifacts};
  const auto pattern = missingness_summary(d);
  write_step1(d, pattern, config.outcomes, w);
  return pattern;
}

NrbaReport run_pipeline(const NrbaConfig& config) {
  config.validate();
  NrbaReport R;
  auto warn = [&](const std::string& code, const std::string& message) {
    R.warnings.push_back({code, message});
  };

  const RectDataset d = load_table(config.input, config.columns, {config.delimiter});
  fs::create_directories(config.output_dir);
  ArtifactWriter w{config.output_dir, &R.artifacts};

  const auto resp_col = d.role_col(Role::ResponseIndicator);
  if (!resp_col) throw SchemaError("dataset has no response-indicator column");
  const std::string resp_name = d.spec(*resp_col).name;
  std::vector<std::uint8_t> respondent(d.n_rows(), 0);
  std::size_t n_resp = 0;
  for (std::size_t i = 0; i < d.n_rows(); ++i) {
    const double v = d.value(*resp_col, i);
    if (v != 0.0 && v != 1.0) {
      throw SchemaError("response indicator must be 0/1; row " + std::to_string(i + 2));
    }
    respondent[i] = v != 0.0 ? 1 : 0;
    n_resp += respondent[i];
  }
  const bool any_nonrespondent = n_resp < d.n_rows();
  if (!any_nonrespondent) {
    R.propensity_null = true;
    warn("no_nonrespondents", "every unit responded; steps 5-9 are null adjustments");
  }

  // ---- Step 1: missing-data patterns ----
  StepGuard s1{1, "patterns"};
  R.pattern = s1.run([&] {
    auto p = missingness_summary(d);
    write_step1(d, p, config.outcomes, w);
    return p;
  });

  // ---- Step 2: key survey variables and analyses ----
  StepGuard{2, "key variables"}.run([&] {
    Table t({"outcome", "analysis"});
    for (const auto& o : config.outcomes) {
      t.add_row({o, "population mean"});
      for (const auto& s : config.subgroups) t.add_row({o, "subgroup means by " + s});
    }
    w.table("step02_key_variables.csv", t);
    return 0;
  });

  // ---- Step 3: outcome models and proxies ----
  struct OutcomeWork {
    glm::LinearFit fit;
    std::vector<std::size_t> eligible_rows;
    ppmm::ProxySeries proxy;
  };
  std::map<std::string, OutcomeWork> work;

  StepGuard s3{3, "outcome models"};
  s3.run([&] {
    Table models({"outcome", "n_fit", "n_eligible", "aic", "rho", "sign_flipped",
                  "n_terms", "terms"});
    Table coefs({"outcome", "term", "coefficient"});
    for (const auto& outcome : config.outcomes) {
      const auto tree = glm::grow_tree(d, outcome, config.auxiliary,
                                       config.tree_max_depth, config.tree_min_node);
      std::vector<glm::Term> candidates;
      for (const auto& a : config.auxiliary) candidates.push_back(glm::Term::main(a));
      for (const auto& [a, b] : tree.interaction_pairs) {
        candidates.push_back(glm::Term::interaction(a, b));
      }
      const auto sw = glm::stepwise_forward(d, outcome, candidates, glm::Family::Linear);
      for (const auto& s : sw.skipped) warn("stepwise_skipped", outcome + ": " + s);

      OutcomeWork ow;
      ow.fit = glm::fit_ols(d, sw.selected, outcome);
      for (const auto& dropped : ow.fit.dropped) {
        warn("rank_dropped", outcome + ": design column '" + dropped + "' dropped");
      }
      const auto info = glm::build_design(d, sw.selected);
      ow.eligible_rows = glm::complete_rows(d, info, "");
      ow.proxy = ppmm::build_proxy(ow.fit, d, outcome, ow.eligible_rows);
      if (ow.proxy.sign_flipped) {
        warn("proxy_sign_flipped", outcome + ": proxy negated to orient rho positive");
      }
      if (ow.proxy.rho_hat < 0.4) {
        warn("weak_proxy", outcome + ": rho = " + fmt(ow.proxy.rho_hat) +
                               " below 0.4; evidence from this NRBA is weak");
      }

      OutcomeModelSummary s;
      s.outcome = outcome;
      s.n_fit = ow.fit.n;
      s.n_eligible = ow.eligible_rows.size();
      s.aic = ow.fit.aic;
      s.rho = ow.proxy.rho_hat;
      s.d = ppmm::standardized_deviation(ow.proxy);
      s.sign_flipped = ow.proxy.sign_flipped;
      for (const auto& t : sw.selected.terms) s.terms.push_back(t.label());
      R.outcome_models.push_back(s);

      std::string terms;
      for (const auto& t : s.terms) {
        if (!terms.empty()) terms += ";";
        terms += t;
      }
      models.add_row({outcome, fmt(static_cast<double>(s.n_fit)),
                      fmt(static_cast<double>(s.n_eligible)), fmt(s.aic), fmt(s.rho),
                      s.sign_flipped ? "true" : "false",
                      fmt(static_cast<double>(s.terms.size())), terms});
      for (std::size_t c = 0; c < ow.fit.kept.size(); ++c) {
        coefs.add_row({outcome, ow.fit.kept[c], fmt(ow.fit.coefficients[c])});
      }
      work.emplace(outcome, std::move(ow));
    }
    w.table("step03_outcome_models.csv", models);
    w.table("step03_coefficients.csv", coefs);
    return 0;
  });

  // ---- Step 4: late-arriving external predictors ----
  StepGuard{4, "external predictors"}.run([&] {
    Table t({"outcome", "rho_base", "rho_extended", "gain",
             "nonrespondents_covered", "nonrespondents_total"});
    if (!config.late_auxiliary.empty()) {
      // coverage of the late variables among nonrespondents
      std::size_t covered = 0, total = 0;
      for (std::size_t i = 0; i < d.n_rows(); ++i) {
        if (respondent[i]) continue;
        ++total;
        bool all = true;
        for (const auto& a : config.late_auxiliary) {
          all = all && d.observed(d.col_index(a), i);
        }
        covered += all;
      }
      for (const auto& outcome : config.outcomes) {
        std::vector<glm::Term> candidates;
        for (const auto& a : config.auxiliary) candidates.push_back(glm::Term::main(a));
        for (const auto& a : config.late_auxiliary) candidates.push_back(glm::Term::main(a));
        const auto sw = glm::stepwise_forward(d, outcome, candidates, glm::Family::Linear);
        const auto fit = glm::fit_ols(d, sw.selected, outcome);
        const auto info = glm::build_design(d, sw.selected);
        const auto rows = glm::complete_rows(d, info, outcome);
        const auto pred = glm::predict(fit, d, rows);
        // respondent correlation of the extended predictions with the outcome
        std::vector<double> yv;
        const auto oj = d.col_index(outcome);
        for (auto i : rows) yv.push_back(d.value(oj, i));
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
          mx += pred[i];
          my += yv[i];
        }
        mx /= static_cast<double>(rows.size());
        my /= static_cast<double>(rows.size());
        double sxx = 0.0, syy = 0.0, sxy = 0.0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
          sxx += (pred[i] - mx) * (pred[i] - mx);
          syy += (yv[i] - my) * (yv[i] - my);
          sxy += (pred[i] - mx) * (yv[i] - my);
        }
        const double rho_ext =
            (sxx > 0 && syy > 0) ? sxy / std::sqrt(sxx * syy) : 0.0;
        double rho_base = 0.0;
        for (const auto& s : R.outcome_models) {
          if (s.outcome == outcome) rho_base = s.rho;
        }
        t.add_row({outcome, fmt(rho_base), fmt(rho_ext), fmt(rho_ext - rho_base),
                   fmt(static_cast<double>(covered)), fmt(static_cast<double>(total))});
      }
    }
    w.table("step04_external_predictors.csv", t);
    return 0;
  });

  // ---- Step 5: response propensity ----
  propensity::PropensityModel pm;
  std::vector<int> respondent_stratum;         // stratum id per scored respondent row
  std::vector<std::size_t> scored_respondents; // dataset rows
  std::vector<double> respondent_phat;

  StepGuard s5{5, "propensity model"};
  s5.run([&] {
    Table summary({"key", "value"});
    Table coefs({"term", "coefficient"});
    if (!any_nonrespondent) {
      summary.add_row({"note", "every unit responded; no propensity model"});
      w.table("step05_summary.csv", summary);
      w.table("step05_model.csv", coefs);
      w.table("fig4_propensity_hist.csv", Table({"bin_lo", "bin_hi", "count"}));
      w.table("fig5_quintile_boxplots.csv",
              Table({"outcome", "stratum", "n", "min", "q1", "median", "q3", "max", "mean"}));
      w.table("step05_strata_correlation.csv", Table({"outcome", "correlation"}));
      return 0;
    }

    const auto tree = glm::grow_tree(d, resp_name, config.auxiliary,
                                     config.tree_max_depth, config.tree_min_node);
    std::vector<glm::Term> candidates;
    for (const auto& a : config.auxiliary) candidates.push_back(glm::Term::main(a));
    for (const auto& [a, b] : tree.interaction_pairs) {
      candidates.push_back(glm::Term::interaction(a, b));
    }
    const auto sw = glm::stepwise_forward(d, resp_name, candidates, glm::Family::Logistic);
    for (const auto& s : sw.skipped) warn("stepwise_skipped", resp_name + ": " + s);
    pm = propensity::fit_stage_propensity(d, resp_name, sw.selected.terms);
    R.propensity_auc = pm.auc;
    if (pm.fit.separation_warning) {
      warn("separation", "propensity model shows separation; fit did not converge");
    }
    if (!pm.fit.converged && !pm.fit.separation_warning) {
      warn("propensity_nonconverged", "propensity IRLS did not converge");
    }

    for (std::size_t k = 0; k < pm.scored_rows.size(); ++k) {
      if (respondent[pm.scored_rows[k]]) {
        scored_respondents.push_back(pm.scored_rows[k]);
        respondent_phat.push_back(pm.phat[k]);
      }
    }
    const auto strata = propensity::quintile_strata(respondent_phat);
    if (strata.degenerate_warning) {
      warn("degenerate_strata", "fewer than 5 distinct propensity values; " +
                                    std::to_string(strata.n_strata) + " strata formed");
    }
    respondent_stratum = strata.stratum;

    for (std::size_t c = 0; c < pm.fit.kept.size(); ++c) {
      coefs.add_row({pm.fit.kept[c], fmt(pm.fit.coefficients[c])});
    }
    w.table("step05_model.csv", coefs);

    summary.add_row({"auc", fmt(pm.auc)});
    summary.add_row({"n_fit", fmt(static_cast<double>(pm.fit_rows.size()))});
    summary.add_row({"n_scored", fmt(static_cast<double>(pm.scored_rows.size()))});
    summary.add_row({"converged", pm.fit.converged ? "true" : "false"});
    double mean_phat = 0.0;
    for (double p : pm.phat) mean_phat += p;
    mean_phat /= static_cast<double>(pm.phat.size());
    summary.add_row({"mean_phat", fmt(mean_phat)});
    for (std::size_t b = 0; b < strata.breaks.size(); ++b) {
      summary.add_row({"quintile_break_" + std::to_string(b + 1), fmt(strata.breaks[b])});
    }
    w.table("step05_summary.csv", summary);

    const auto hist = propensity::propensity_histogram(pm.phat);
    Table fig4({"bin_lo", "bin_hi", "count"});
    for (std::size_t b = 0; b < hist.counts.size(); ++b) {
      fig4.add_row({fmt(hist.edges[b]), fmt(hist.edges[b + 1]),
                    fmt(static_cast<double>(hist.counts[b]))});
    }
    w.table("fig4_propensity_hist.csv", fig4);

    Table fig5({"outcome", "stratum", "n", "min", "q1", "median", "q3", "max", "mean"});
    Table corr({"outcome", "correlation"});
    for (const auto& outcome : config.outcomes) {
      const auto oj = d.col_index(outcome);
      std::vector<int> strat;
      std::vector<double> yv, pv;
      for (std::size_t k = 0; k < scored_respondents.size(); ++k) {
        const auto row = scored_respondents[k];
        if (!d.observed(oj, row)) continue;  // item nonresponse
        strat.push_back(respondent_stratum[k]);
        yv.push_back(d.value(oj, row));
        pv.push_back(respondent_phat[k]);
      }
      const auto s = propensity::stratum_outcome_summary(strat, yv, pv);
      for (const auto& st : s.strata) {
        if (st.empty) {
          warn("empty_stratum", outcome + ": stratum " + std::to_string(st.stratum) +
                                    " has no respondents with this outcome");
          continue;
        }
        fig5.add_row({outcome, std::to_string(st.stratum), fmt(static_cast<double>(st.n)),
                      fmt(st.min), fmt(st.q1), fmt(st.median), fmt(st.q3), fmt(st.max),
                      fmt(st.mean)});
      }
      corr.add_row({outcome, fmt(s.correlation)});
    }
    w.table("fig5_quintile_boxplots.csv", fig5);
    w.table("step05_strata_correlation.csv", corr);
    return 0;
  });

  // ---- Step 6: strength of evidence, Table-1 placement ----
  StepGuard{6, "strength assessment"}.run([&] {
    Table t({"outcome", "rho", "rho_class", "d", "d_class", "auc",
             "propensity_outcome_corr", "table1_cell"});
    for (const auto& s : R.outcome_models) {
      const auto v = ppmm::classify_strength(s.rho, s.d);
      std::string cell = "-";
      std::string auc_s = "-";
      std::string corr_s = "-";
      if (any_nonrespondent) {
        const auto oj = d.col_index(s.outcome);
        std::vector<double> yv, pv;
        for (std::size_t k = 0; k < scored_respondents.size(); ++k) {
          const auto row = scored_respondents[k];
          if (!d.observed(oj, row)) continue;
          yv.push_back(d.value(oj, row));
          pv.push_back(respondent_phat[k]);
        }
        double corr = 0.0;
        if (!yv.empty()) {
          double mx = 0.0, my = 0.0;
          for (std::size_t i = 0; i < yv.size(); ++i) {
            mx += pv[i];
            my += yv[i];
          }
          mx /= static_cast<double>(yv.size());
          my /= static_cast<double>(yv.size());
          double sxx = 0.0, syy = 0.0, sxy = 0.0;
          for (std::size_t i = 0; i < yv.size(); ++i) {
            sxx += (pv[i] - mx) * (pv[i] - mx);
            syy += (yv[i] - my) * (yv[i] - my);
            sxy += (pv[i] - mx) * (yv[i] - my);
          }
          corr = (sxx > 0 && syy > 0) ? sxy / std::sqrt(sxx * syy) : 0.0;
        }
        // documented placement rule: X-R High iff AUC > 0.7; propensity-Y
        // High iff |corr| >= 0.4; otherX-Y High iff rho >= 0.4
        cell.clear();
        cell += R.propensity_auc > 0.7 ? 'H' : 'L';
        cell += std::abs(corr) >= 0.4 ? 'H' : 'L';
        cell += s.rho >= 0.4 ? 'H' : 'L';
        auc_s = fmt(R.propensity_auc);
        corr_s = fmt(corr);
      }
      t.add_row({s.outcome, fmt(s.rho), ppmm::rho_class_name(v.rho_class), fmt(s.d),
                 ppmm::d_class_name(v.d_class), auc_s, corr_s, cell});
    }
    w.table("step06_strength.csv", t);
    return 0;
  });

  // ---- Step 7: weighting adjustment effects ----
  survey::SurveyDesign base_design, unweighted_design, final_design;
  StepGuard s7{7, "weighting comparison"};
  s7.run([&] {
    const auto psu = id_column(d, Role::Psu);
    const auto stratum = id_column(d, Role::Stratum);
    const auto bw_col = d.role_col(Role::BaseWeight);
    std::vector<double> base_w(d.n_rows(), 1.0);
    if (bw_col) {
      for (std::size_t i = 0; i < d.n_rows(); ++i) {
        if (!d.observed(*bw_col, i)) {
          throw SchemaError("base weight missing at row " + std::to_string(i + 2));
        }
        base_w[i] = d.value(*bw_col, i);
      }
    } else {
      warn("no_base_weight", "no base-weight column; unit weights used");
    }

    base_design = {base_w, psu, stratum};
    unweighted_design = {std::vector<double>(d.n_rows(), 1.0), psu, stratum};

    // weighting classes: cross-classification of the configured columns
    std::vector<std::string> class_of_row(d.n_rows(), "all");
    if (!config.weighting_classes.empty()) {
      std::vector<std::vector<std::string>> parts;
      for (const auto& c : config.weighting_classes) parts.push_back(row_labels(d, c));
      for (std::size_t i = 0; i < d.n_rows(); ++i) {
        std::string label;
        for (std::size_t p = 0; p < parts.size(); ++p) {
          if (p) label += "|";
          label += config.weighting_classes[p] + "=" + parts[p][i];
        }
        class_of_row[i] = label;
      }
    }
    const auto adj = survey::weighting_class_adjust(base_design, respondent, class_of_row);
    final_design = adj.design;

    Table factors({"class", "factor"});
    for (std::size_t k = 0; k < adj.classes.size(); ++k) {
      factors.add_row({adj.classes[k], fmt(adj.factors[k])});
    }
    w.table("step07_adjustment_factors.csv", factors);

    if (!config.raking_margins.empty()) {
      std::vector<survey::RakingMargin> margins;
      for (const auto& m : config.raking_margins) {
        survey::RakingMargin rm;
        rm.name = m.column;
        rm.level_of_row = row_labels(d, m.column);
        rm.targets = m.targets;
        margins.push_back(std::move(rm));
      }
      const auto raked = survey::rake(final_design, margins);
      if (!raked.converged) {
        warn("raking_nonconverged", "raking did not converge; max discrepancy " +
                                        fmt(raked.max_discrepancy));
      }
      final_design = raked.design;
    }

    Table t({"outcome", "domain", "n", "unweighted_mean", "unweighted_se", "base_mean",
             "base_se", "adjusted_mean", "adjusted_se", "deff"});
    for (const auto& outcome : config.outcomes) {
      const auto values = d.numeric_column(outcome);
      const auto observed = d.observed_mask(outcome);
      auto add_rows = [&](const std::string& domain_label,
                          const std::vector<std::uint8_t>* domain) {
        const auto un = survey::weighted_mean(values, unweighted_design, &observed, domain);
        const auto ba = survey::weighted_mean(values, base_design, &observed, domain);
        const auto ad = survey::weighted_mean(values, final_design, &observed, domain);
        t.add_row({outcome, domain_label, fmt(static_cast<double>(ad.n)), fmt(un.mean),
                   fmt(un.se), fmt(ba.mean), fmt(ba.se), fmt(ad.mean), fmt(ad.se),
                   ad.deff ? fmt(*ad.deff) : "-"});
      };
      add_rows("overall", nullptr);
      for (const auto& sg : config.subgroups) {
        const auto labels = row_labels(d, sg);
        std::set<std::string> levels(labels.begin(), labels.end());
        for (const auto& lvl : levels) {
          std::vector<std::uint8_t> domain(d.n_rows(), 0);
          for (std::size_t i = 0; i < d.n_rows(); ++i) domain[i] = labels[i] == lvl;
          add_rows(sg + "=" + lvl, &domain);
        }
      }
    }
    w.table("step07_weighting_comparison.csv", t);
    return 0;
  });

  // ---- Step 8: external comparison ----
  StepGuard{8, "external comparison"}.run([&] {
    Table t({"label", "survey_mean", "survey_se", "benchmark_mean", "benchmark_se",
             "difference", "combined_se", "flagged", "caveat"});
    if (!config.external_benchmarks.empty()) {
      std::vector<SurveyEstimate> estimates;
      for (const auto& outcome : config.outcomes) {
        const auto values = d.numeric_column(outcome);
        const auto observed = d.observed_mask(outcome);
        const auto est = survey::weighted_mean(values, final_design, &observed);
        estimates.push_back({outcome, est.mean, est.se});
      }
      for (const auto& row : external_comparison(estimates, config.external_benchmarks)) {
        if (row.flagged) {
          warn("external_difference", row.label + ": |difference| exceeds 2 combined SE");
        }
        t.add_row({row.label, fmt(row.survey_mean), fmt(row.survey_se),
                   fmt(row.benchmark_mean), fmt(row.benchmark_se), fmt(row.difference),
                   fmt(row.combined_se), row.flagged ? "true" : "false", row.caveat});
      }
    }
    w.table("step08_external_comparison.csv", t);
    return 0;
  });

  // ---- Step 9: sensitivity analysis ----
  StepGuard s9{9, "sensitivity analysis"};
  s9.run([&] {
    std::vector<std::string> header{"outcome", "rho", "d", "ybar_r"};
    for (double phi : config.phi_grid) {
      header.push_back("mu_" + phi_label(phi));
      header.push_back("se_" + phi_label(phi));
    }
    header.push_back("intervals_overlap");
    Table overall(header);

    for (const auto& outcome : config.outcomes) {
      auto& ow = work.at(outcome);
      const auto sweep = ppmm::sensitivity_sweep(ow.proxy, config.phi_grid);
      SensitivitySummary ss;
      ss.outcome = outcome;
      ss.table = sweep;
      R.sensitivity.push_back(ss);
      if (!sweep.intervals_overlap) {
        warn("sensitivity_nonoverlap",
             outcome + ": intervals across phi do not all overlap");
      }
      std::vector<std::string> row{outcome, fmt(sweep.rho), fmt(sweep.d), fmt(sweep.ybar_r)};
      for (const auto& r : sweep.rows) {
        row.push_back(fmt(r.muY));
        row.push_back(fmt(r.se));
      }
      row.push_back(sweep.intervals_overlap ? "true" : "false");
      overall.add_row(row);
    }
    w.table("step09_sensitivity_overall.csv", overall);

    for (const auto& sg : config.subgroups) {
      std::vector<std::string> gh{"outcome", "group", "rho", "d", "ybar_r"};
      for (double phi : config.phi_grid) {
        gh.push_back("mu_" + phi_label(phi));
        gh.push_back("se_" + phi_label(phi));
      }
      gh.push_back("intervals_overlap");
      Table gt(gh);
      for (const auto& outcome : config.outcomes) {
        auto& ow = work.at(outcome);
        const auto all_labels = row_labels(d, sg);
        std::vector<std::string> labels;
        for (auto i : ow.eligible_rows) labels.push_back(all_labels[i]);
        std::vector<std::string> skipped;
        const auto sweeps =
            ppmm::sensitivity_sweep_by_group(ow.proxy, labels, config.phi_grid, &skipped);
        for (const auto& s : skipped) {
          warn("subgroup_skipped", outcome + " by " + sg + ": " + s);
        }
        for (const auto& gsw : sweeps) {
          SensitivitySummary ss;
          ss.outcome = outcome;
          ss.subgroup_column = sg;
          ss.group = gsw.group;
          ss.table = gsw.table;
          R.sensitivity.push_back(ss);
          std::vector<std::string> row{outcome, gsw.group, fmt(gsw.table.rho),
                                       fmt(gsw.table.d), fmt(gsw.table.ybar_r)};
          for (const auto& r : gsw.table.rows) {
            row.push_back(fmt(r.muY));
            row.push_back(fmt(r.se));
          }
          row.push_back(gsw.table.intervals_overlap ? "true" : "false");
          gt.add_row(row);
        }
      }
      w.table("step09_sensitivity_" + sg + ".csv", gt);
    }
    return 0;
  });

  // ---- Step 10: item nonresponse audit ----
  StepGuard{10, "item nonresponse"}.run([&] {
    Table t({"outcome", "unit_missing", "item_missing", "note"});
    for (const auto& row : item_missingness_audit(d, config.outcomes, resp_name)) {
      t.add_row({row.outcome, fmt(static_cast<double>(row.unit_missing)),
                 fmt(static_cast<double>(row.item_missing)), row.note});
    }
    w.table("step10_item_missingness.csv", t);
    return 0;
  });

  // ---- structured summary ----
  {
    json s;
    s["n_rows"] = d.n_rows();
    s["n_respondents"] = n_resp;
    s["seed"] = config.seed;
    s["monotone_pattern"] = R.pattern.monotone;
    json models = json::array();
    for (const auto& m : R.outcome_models) {
      json jm;
      jm["outcome"] = m.outcome;
      jm["n_fit"] = m.n_fit;
      jm["n_eligible"] = m.n_eligible;
      jm["aic"] = m.aic;
      jm["rho"] = m.rho;
      jm["d"] = m.d;
      jm["sign_flipped"] = m.sign_flipped;
      jm["terms"] = m.terms;
      models.push_back(jm);
    }
    s["outcome_models"] = models;
    s["propensity_null"] = R.propensity_null;
    if (!R.propensity_null) s["propensity_auc"] = R.propensity_auc;
    json sens = json::array();
    for (const auto& sv : R.sensitivity) {
      json js;
      js["outcome"] = sv.outcome;
      if (!sv.subgroup_column.empty()) {
        js["subgroup_column"] = sv.subgroup_column;
        js["group"] = sv.group;
      }
      js["rho"] = sv.table.rho;
      js["d"] = sv.table.d;
      js["ybar_r"] = sv.table.ybar_r;
      json rows = json::array();
      for (const auto& r : sv.table.rows) {
        rows.push_back({{"phi", r.phi}, {"muY", r.muY}, {"se", r.se}, {"nrba", r.nrba}});
      }
      js["rows"] = rows;
      js["intervals_overlap"] = sv.table.intervals_overlap;
      sens.push_back(js);
    }
    s["sensitivity"] = sens;
    json warns = json::array();
    for (const auto& wn : R.warnings) {
      warns.push_back({{"code", wn.code}, {"message", wn.message}});
    }
    s["warnings"] = warns;
    s["artifacts"] = R.artifacts;
    w.text("summary.json", s.dump(2) + "\n");
  }

  return R;
}

}  // namespace nrba::pipeline
