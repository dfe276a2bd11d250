#include "nrba/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "nrba/errors.hpp"
#include "nrba/glm.hpp"
#include "nrba/report.hpp"
#include "nrba/rng.hpp"

namespace nrba::simlab {

namespace {

using json = nlohmann::ordered_json;

const char* kRegions[4] = {"northeast", "midwest", "south", "west"};
const char* kLocales[4] = {"city", "rural", "suburb", "town"};
const char* kRaces[5] = {"api", "black", "hispanic", "other", "white"};

struct School {
  int stratum;  // 1..4, one per census region
  std::string region;
  std::string locale;
  std::string school_type;
  std::string lowest_grade;
  std::string highest_grade;
  double num_students;
  double fte_teachers;
  double str_ratio;
  double pct_kg, pct_asian, pct_hispanic, pct_black;
  double effect;      // school-level shift shared by outcomes
  double base_weight; // school stage of the child base weight
};

template <typename T, std::size_t K>
const T& pick(Rng& rng, const T (&options)[K], const double (&probs)[K]) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < K; ++i) {
    acc += probs[i];
    if (u < acc) return options[i];
  }
  return options[K - 1];
}

}  // namespace

SyntheticPaths write_synthetic_survey(const std::string& dir, std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  constexpr std::size_t kPsus = 100;
  constexpr std::size_t kChildrenPerPsu = 50;
  constexpr std::size_t kN = kPsus * kChildrenPerPsu;
  constexpr double kTargetResponse = 0.87;

  Rng rng(seed);

  // ---- school (PSU) frame ----
  std::vector<School> schools(kPsus);
  for (std::size_t s = 0; s < kPsus; ++s) {
    School& sc = schools[s];
    sc.stratum = static_cast<int>(s % 4) + 1;
    sc.region = kRegions[s % 4];
    {
      const double probs[4] = {0.30, 0.15, 0.40, 0.15};
      sc.locale = pick(rng, kLocales, probs);
    }
    sc.school_type = rng.uniform() < 0.22 ? "private" : "public";
    sc.lowest_grade = rng.uniform() < 0.35 ? "preK" : "K";
    {
      const char* grades[3] = {"5", "6", "8"};
      const double probs[3] = {0.55, 0.25, 0.20};
      sc.highest_grade = pick(rng, grades, probs);
    }
    sc.num_students = std::round(std::exp(5.8 + 0.45 * rng.gauss()));
    sc.num_students = std::clamp(sc.num_students, 80.0, 2000.0);
    sc.fte_teachers = std::round(std::max(4.0, sc.num_students / 18.0 + 2.0 * rng.gauss()));
    sc.str_ratio = sc.num_students / sc.fte_teachers;
    sc.pct_kg = std::clamp(9.0 + 3.0 * rng.gauss(), 2.0, 25.0);
    sc.pct_asian = std::clamp(std::exp(1.0 + 0.9 * rng.gauss()), 0.0, 60.0);
    sc.pct_hispanic = std::clamp(std::exp(2.4 + 0.8 * rng.gauss()), 0.0, 90.0);
    sc.pct_black = std::clamp(std::exp(2.1 + 0.9 * rng.gauss()), 0.0, 90.0);
    sc.effect = 2.4 * rng.gauss();
    sc.base_weight = (sc.school_type == "private" ? 2.2 : 3.4) *
                     (1.0 + 0.25 * (rng.uniform() - 0.5));
  }

  // ---- children ----
  struct Child {
    std::size_t school;
    std::string sex;
    std::string race;
    std::string birth_year;
    double ses;
    double base_weight;
    double reading, math;
    double resp_lp;  // response linear predictor, intercept solved below
    bool responds = false;
  };
  std::vector<Child> kids(kN);

  auto race_effect = [](const std::string& r) {
    if (r == "white") return 1.3;
    if (r == "black") return -1.9;
    if (r == "hispanic") return -3.4;
    if (r == "api") return 3.9;
    return 1.1;  // other
  };

  for (std::size_t i = 0; i < kN; ++i) {
    Child& ch = kids[i];
    ch.school = i / kChildrenPerPsu;
    const School& sc = schools[ch.school];
    ch.sex = rng.uniform() < 0.51 ? "male" : "female";
    {
      // school composition tilts the race mix
      double ph = std::min(0.75, sc.pct_hispanic / 100.0 + 0.08);
      double pb = std::min(0.65, sc.pct_black / 100.0 + 0.04);
      double pa = std::min(0.50, sc.pct_asian / 100.0 + 0.02);
      double po = 0.07;
      double pw = std::max(0.05, 1.0 - ph - pb - pa - po);
      const double total = ph + pb + pa + po + pw;
      const double u = rng.uniform() * total;
      if (u < pa) ch.race = "api";
      else if (u < pa + pb) ch.race = "black";
      else if (u < pa + pb + ph) ch.race = "hispanic";
      else if (u < pa + pb + ph + po) ch.race = "other";
      else ch.race = "white";
    }
    {
      const double u = rng.uniform();
      ch.birth_year = u < 0.22 ? "2004" : (u < 0.85 ? "2005" : "2006");
    }
    ch.ses = 0.35 * race_effect(ch.race) / 4.0 +
             (sc.school_type == "private" ? 0.5 : 0.0) + 0.9 * rng.gauss();
    ch.base_weight = sc.base_weight * (1.0 + 0.3 * rng.uniform());

    const double year_effect = ch.birth_year == "2004" ? 1.6
                               : ch.birth_year == "2006" ? -1.8 : 0.0;
    const double common = race_effect(ch.race) + year_effect +
                          (ch.sex == "female" ? 0.6 : 0.0) +
                          (sc.school_type == "private" ? 1.5 : 0.0) +
                          0.012 * (sc.pct_kg - 9.0) * 10.0 -
                          0.015 * sc.pct_hispanic - 0.010 * sc.pct_black +
                          0.004 * (sc.num_students - 350.0) / 10.0 + 2.1 * ch.ses +
                          sc.effect;
    ch.reading = 54.0 + common + 8.2 * rng.gauss();
    ch.math = 35.0 + 0.8 * common + 7.1 * rng.gauss();

    // response depends on school and child frame variables (not the outcome)
    ch.resp_lp = (sc.school_type == "private" ? 0.35 : 0.0) +
                 (ch.race == "hispanic" ? -0.45 : 0.0) +
                 (ch.race == "black" ? -0.25 : 0.0) +
                 (ch.race == "api" ? 0.15 : 0.0) -
                 0.006 * sc.pct_hispanic -
                 0.0004 * (sc.num_students - 350.0) +
                 (sc.locale == std::string("city") ? -0.15 : 0.0) + 0.18 * ch.ses;
  }

  // intercept pinned so the realized expected response rate hits the target
  double alpha;
  {
    double lo = -5.0, hi = 10.0;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      double mean = 0.0;
      for (const auto& ch : kids) mean += glm::expit(mid + ch.resp_lp);
      mean /= static_cast<double>(kN);
      (mean < kTargetResponse ? lo : hi) = mid;
    }
    alpha = 0.5 * (lo + hi);
  }
  for (auto& ch : kids) ch.responds = rng.bernoulli(glm::expit(alpha + ch.resp_lp));

  // item nonresponse on reading among respondents: 120 sentinel-coded cells
  // and 50 blank cells
  std::vector<std::size_t> respondents;
  for (std::size_t i = 0; i < kN; ++i) {
    if (kids[i].responds) respondents.push_back(i);
  }
  std::vector<std::size_t> shuffled = respondents;
  for (std::size_t i = shuffled.size(); i > 1; --i) {
    std::swap(shuffled[i - 1], shuffled[rng.next_u64() % i]);
  }
  std::vector<int> item_state(kN, 0);  // 1 = sentinel, 2 = blank
  for (std::size_t t = 0; t < 120 && t < shuffled.size(); ++t) item_state[shuffled[t]] = 1;
  for (std::size_t t = 120; t < 170 && t < shuffled.size(); ++t) item_state[shuffled[t]] = 2;

  // ses is a late-arriving household variable: observed for respondents, and
  // for roughly 30% of nonrespondents
  std::vector<bool> ses_observed(kN, false);
  for (std::size_t i = 0; i < kN; ++i) {
    ses_observed[i] = kids[i].responds || rng.uniform() < 0.30;
  }

  // ---- write the delimited file ----
  using report::fmt;
  std::string csv;
  csv +=
      "child_id,psu,stratum,base_weight,child_responds,sex,race,birth_year,"
      "school_type,region,locale,lowest_grade,highest_grade,num_students,"
      "fte_teachers,str_ratio,pct_kg,pct_asian,pct_hispanic,pct_black,ses,"
      "reading_score,math_score\n";
  for (std::size_t i = 0; i < kN; ++i) {
    const Child& ch = kids[i];
    const School& sc = schools[ch.school];
    csv += std::to_string(i + 1) + ",";
    csv += std::to_string(ch.school + 1) + ",";
    csv += std::to_string(sc.stratum) + ",";
    csv += fmt(ch.base_weight) + ",";
    csv += (ch.responds ? "1," : "0,");
    csv += ch.sex + "," + ch.race + "," + ch.birth_year + ",";
    csv += sc.school_type + "," + sc.region + "," + sc.locale + ",";
    csv += sc.lowest_grade + "," + sc.highest_grade + ",";
    csv += fmt(sc.num_students) + "," + fmt(sc.fte_teachers) + "," + fmt(sc.str_ratio) + ",";
    csv += fmt(sc.pct_kg) + "," + fmt(sc.pct_asian) + "," + fmt(sc.pct_hispanic) + "," +
           fmt(sc.pct_black) + ",";
    csv += ses_observed[i] ? fmt(ch.ses) : std::string();
    csv += ",";
    if (!ch.responds) {
      csv += ",";  // unit nonresponse: both outcomes blank
    } else if (item_state[i] == 1) {
      csv += "-9,";
      csv += fmt(ch.math);
      csv += "\n";
      continue;
    } else if (item_state[i] == 2) {
      csv += ",";
      csv += fmt(ch.math);
      csv += "\n";
      continue;
    } else {
      csv += fmt(ch.reading) + ",";
      csv += fmt(ch.math);
      csv += "\n";
      continue;
    }
    csv += "\n";
  }

  SyntheticPaths paths;
  paths.data_csv = (fs::path(dir) / "synthetic_study.csv").string();
  paths.config_json = (fs::path(dir) / "synthetic_config.json").string();
  report::write_file(paths.data_csv, csv);

  // ---- matching analysis config ----
  json cfg;
  cfg["input"] = "synthetic_study.csv";
  cfg["delimiter"] = ",";
  json cols = json::array();
  auto col = [&](const char* name, const char* role, const char* meas,
                 std::vector<std::string> sentinels = {}) {
    json c;
    c["name"] = name;
    c["role"] = role;
    c["measurement"] = meas;
    if (!sentinels.empty()) c["missing_sentinels"] = sentinels;
    cols.push_back(c);
  };
  col("child_id", "id", "continuous");
  col("psu", "psu", "continuous");
  col("stratum", "stratum", "continuous");
  col("base_weight", "base-weight", "continuous");
  col("child_responds", "response-indicator", "continuous");
  col("sex", "auxiliary", "categorical");
  col("race", "subgroup", "categorical");
  col("birth_year", "auxiliary", "categorical");
  col("school_type", "auxiliary", "categorical");
  col("region", "auxiliary", "categorical");
  col("locale", "auxiliary", "categorical");
  col("lowest_grade", "auxiliary", "categorical");
  col("highest_grade", "auxiliary", "categorical");
  col("num_students", "auxiliary", "continuous");
  col("fte_teachers", "auxiliary", "continuous");
  col("str_ratio", "auxiliary", "continuous");
  col("pct_kg", "auxiliary", "continuous");
  col("pct_asian", "auxiliary", "continuous");
  col("pct_hispanic", "auxiliary", "continuous");
  col("pct_black", "auxiliary", "continuous");
  col("ses", "auxiliary", "continuous");
  col("reading_score", "outcome", "continuous", {"-9"});
  col("math_score", "outcome", "continuous", {"-9"});
  cfg["columns"] = cols;
  cfg["outcomes"] = {"reading_score", "math_score"};
  cfg["auxiliary"] = {"sex", "race", "birth_year", "school_type", "region", "locale",
                      "lowest_grade", "highest_grade", "num_students", "fte_teachers",
                      "str_ratio", "pct_kg", "pct_asian", "pct_hispanic", "pct_black"};
  cfg["late_auxiliary"] = {"ses"};
  cfg["subgroups"] = {"race", "school_type"};
  cfg["phi_grid"] = {0.0, 0.5, 1.0};
  cfg["weighting_classes"] = {"race", "school_type"};

  // raking targets: base-weighted margins of the full eligible sample, so the
  // margins are consistent by construction
  {
    json margins = json::array();
    for (const char* colname : {"region", "school_type"}) {
      std::map<std::string, double> totals;
      for (std::size_t i = 0; i < kN; ++i) {
        const School& sc = schools[kids[i].school];
        const std::string level =
            std::string(colname) == "region" ? sc.region : sc.school_type;
        totals[level] += kids[i].base_weight;
      }
      json m;
      m["column"] = colname;
      json t;
      for (const auto& [level, total] : totals) t[level] = total;
      m["targets"] = t;
      margins.push_back(m);
    }
    cfg["raking_margins"] = margins;
  }

  // external benchmarks: the full-sample base-weighted truth plays the role
  // of a high-quality reference study
  {
    json bench = json::array();
    for (const char* outcome : {"reading_score", "math_score"}) {
      double ws = 0.0, wy = 0.0;
      for (std::size_t i = 0; i < kN; ++i) {
        const double y = std::string(outcome) == "reading_score" ? kids[i].reading
                                                                 : kids[i].math;
        ws += kids[i].base_weight;
        wy += kids[i].base_weight * y;
      }
      json b;
      b["label"] = outcome;
      b["mean"] = wy / ws;
      b["se"] = std::string(outcome) == "reading_score" ? 0.21 : 0.18;
      bench.push_back(b);
    }
    cfg["external_benchmarks"] = bench;
  }

  cfg["seed"] = seed;
  cfg["tree"] = {{"max_depth", 3}, {"min_node", 200}};
  cfg["output_dir"] = "nrba_report";

  report::write_file(paths.config_json, cfg.dump(2) + "\n");
  return paths;
}

}  // namespace nrba::simlab
