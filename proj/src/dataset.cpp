#include "nrba/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "nrba/errors.hpp"

namespace nrba {

namespace {

std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

bool parse_double(std::string_view s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

bool is_sentinel(const ColumnSpec& spec, std::string_view token) {
  double tv = 0.0;
  const bool token_numeric = parse_double(token, tv);
  for (const auto& s : spec.missing_sentinels) {
    if (token == s) return true;
    double sv = 0.0;
    if (token_numeric && parse_double(s, sv) && sv == tv) return true;
  }
  return false;
}

}  // namespace

const char* role_name(Role r) {
  switch (r) {
    case Role::Outcome: return "outcome";
    case Role::Auxiliary: return "auxiliary";
    case Role::Weight: return "weight";
    case Role::BaseWeight: return "base-weight";
    case Role::Psu: return "psu";
    case Role::Stratum: return "stratum";
    case Role::Subgroup: return "subgroup";
    case Role::ResponseIndicator: return "response-indicator";
    case Role::Id: return "id";
  }
  return "?";
}

Role role_from_name(std::string_view s) {
  for (Role r : {Role::Outcome, Role::Auxiliary, Role::Weight, Role::BaseWeight,
                 Role::Psu, Role::Stratum, Role::Subgroup,
                 Role::ResponseIndicator, Role::Id}) {
    if (s == role_name(r)) return r;
  }
  throw SchemaError("unknown column role: " + std::string(s));
}

const char* measurement_name(Measurement m) {
  return m == Measurement::Continuous ? "continuous" : "categorical";
}

Measurement measurement_from_name(std::string_view s) {
  if (s == "continuous") return Measurement::Continuous;
  if (s == "categorical") return Measurement::Categorical;
  throw SchemaError("unknown measurement: " + std::string(s));
}

RectDataset::RectDataset(std::vector<ColumnSpec> columns, std::size_t n)
    : columns_(std::move(columns)), n_(n) {
  values_.assign(columns_.size(), std::vector<double>(n_, 0.0));
  mask_.assign(columns_.size(), std::vector<std::uint8_t>(n_, 0));
  levels_.assign(columns_.size(), {});
  validate_roles();
}

std::size_t RectDataset::col_index(std::string_view name) const {
  auto idx = find_col(name);
  if (!idx) throw SchemaError("unknown column: " + std::string(name));
  return *idx;
}

std::optional<std::size_t> RectDataset::find_col(std::string_view name) const {
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (columns_[j].name == name) return j;
  }
  return std::nullopt;
}

std::optional<std::size_t> RectDataset::role_col(Role role) const {
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (columns_[j].role == role) return j;
  }
  return std::nullopt;
}

const std::string& RectDataset::level_name(std::size_t col, std::size_t row) const {
  const auto& lv = levels_[col];
  auto idx = static_cast<std::size_t>(values_[col][row]);
  if (idx >= lv.size()) throw SchemaError("level index out of range in column " + columns_[col].name);
  return lv[idx];
}

std::vector<double> RectDataset::numeric_column(std::string_view name) const {
  return values_[col_index(name)];
}

std::vector<std::uint8_t> RectDataset::observed_mask(std::string_view name) const {
  return mask_[col_index(name)];
}

void RectDataset::validate_roles() const {
  // singleton roles: at most one column each
  for (Role r : {Role::Weight, Role::BaseWeight, Role::Psu, Role::Stratum,
                 Role::ResponseIndicator, Role::Id}) {
    std::size_t count = 0;
    for (const auto& c : columns_) count += (c.role == r);
    if (count > 1) {
      throw SchemaError(std::string("more than one column with role ") + role_name(r));
    }
  }
  std::map<std::string, int> seen;
  for (const auto& c : columns_) {
    if (++seen[c.name] > 1) throw SchemaError("duplicate column name: " + c.name);
  }
}

RectDataset load_table(const std::string& path,
                       const std::vector<ColumnSpec>& schema,
                       const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split_line(line, options.delimiter);
  if (header.size() != schema.size()) {
    throw SchemaError("header has " + std::to_string(header.size()) +
                      " columns, schema declares " + std::to_string(schema.size()));
  }
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (std::string(trim(header[j])) != schema[j].name) {
      throw SchemaError("header column " + std::to_string(j + 1) + " is '" +
                        std::string(trim(header[j])) + "', schema expects '" +
                        schema[j].name + "'");
    }
  }

  // first pass: collect raw tokens
  std::vector<std::vector<std::string>> raw(schema.size());
  std::size_t row_number = 1;  // header = row 1
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++row_number;
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
    auto fields = split_line(line, options.delimiter);
    if (fields.size() != schema.size()) {
      throw ParseError("row " + std::to_string(row_number) + " has " +
                       std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(schema.size()));
    }
    for (std::size_t j = 0; j < schema.size(); ++j) {
      raw[j].push_back(std::string(trim(fields[j])));
    }
  }
  const std::size_t n = raw.empty() ? 0 : raw[0].size();

  RectDataset d(schema, n);

  // level discovery for categorical columns: sorted distinct observed tokens
  std::vector<std::map<std::string, std::size_t>> level_index(schema.size());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (schema[j].measurement != Measurement::Categorical) continue;
    std::vector<std::string> distinct;
    for (const auto& tok : raw[j]) {
      if (tok.empty() || is_sentinel(schema[j], tok)) continue;
      distinct.push_back(tok);
    }
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (std::size_t k = 0; k < distinct.size(); ++k) level_index[j][distinct[k]] = k;
    d.set_levels(j, std::move(distinct));
  }

  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& spec = schema[j];
    for (std::size_t i = 0; i < n; ++i) {
      const std::string& tok = raw[j][i];
      if (tok.empty() || is_sentinel(spec, tok)) {
        if (spec.role == Role::ResponseIndicator) {
          throw ParseError("row " + std::to_string(i + 2) +
                           ": response indicator '" + spec.name +
                           "' is missing; the response indicator must be fully observed");
        }
        d.set_missing(j, i);
        continue;
      }
      if (spec.measurement == Measurement::Categorical) {
        d.set_cell(j, i, static_cast<double>(level_index[j][tok]));
      } else {
        double v = 0.0;
        if (!parse_double(tok, v)) {
          throw CellError("row " + std::to_string(i + 2) + ", column '" +
                          spec.name + "': cannot parse '" + tok +
                          "' as a number");
        }
        d.set_cell(j, i, v);
      }
    }
  }
  return d;
}

RectDataset from_columns(const std::vector<ColumnData>& columns) {
  if (columns.empty()) return {};
  std::size_t n = 0;
  for (const auto& c : columns) {
    std::size_t len = c.spec.measurement == Measurement::Continuous
                          ? c.numeric.size()
                          : c.labels.size();
    if (n == 0) n = len;
    if (len != n) throw SchemaError("ragged in-memory columns");
  }
  std::vector<ColumnSpec> specs;
  specs.reserve(columns.size());
  for (const auto& c : columns) specs.push_back(c.spec);
  RectDataset d(std::move(specs), n);

  for (std::size_t j = 0; j < columns.size(); ++j) {
    const auto& c = columns[j];
    if (c.spec.measurement == Measurement::Continuous) {
      for (std::size_t i = 0; i < n; ++i) {
        if (std::isnan(c.numeric[i])) {
          d.set_missing(j, i);
        } else {
          d.set_cell(j, i, c.numeric[i]);
        }
      }
    } else {
      std::vector<std::string> distinct;
      for (const auto& s : c.labels) {
        if (!s.empty()) distinct.push_back(s);
      }
      std::sort(distinct.begin(), distinct.end());
      distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
      std::map<std::string, std::size_t> idx;
      for (std::size_t k = 0; k < distinct.size(); ++k) idx[distinct[k]] = k;
      d.set_levels(j, distinct);
      for (std::size_t i = 0; i < n; ++i) {
        if (c.labels[i].empty()) {
          d.set_missing(j, i);
        } else {
          d.set_cell(j, i, static_cast<double>(idx[c.labels[i]]));
        }
      }
    }
    if (c.spec.role == Role::ResponseIndicator) {
      for (std::size_t i = 0; i < n; ++i) {
        if (!d.observed(j, i)) {
          throw SchemaError("response indicator '" + c.spec.name +
                            "' has a missing value; it must be fully observed");
        }
      }
    }
  }
  return d;
}

namespace {

// monotone iff the per-column observed-row sets form a chain under inclusion;
// sorting by missing rate ascending and verifying is exact for that condition
bool monotone_by_sorted_check(const std::vector<std::vector<std::uint8_t>>& cols,
                              std::size_t n) {
  const std::size_t p = cols.size();
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::size_t> observed_count(p, 0);
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t i = 0; i < n; ++i) observed_count[j] += cols[j][i];
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return observed_count[a] > observed_count[b];
  });
  for (std::size_t i = 0; i < n; ++i) {
    bool seen_missing = false;
    for (std::size_t k = 0; k < p; ++k) {
      const bool obs = cols[order[k]][i] != 0;
      if (seen_missing && obs) return false;
      if (!obs) seen_missing = true;
    }
  }
  return true;
}

}  // namespace

bool monotone_by_permutation(const std::vector<std::vector<std::uint8_t>>& col_masks) {
  const std::size_t p = col_masks.size();
  if (p == 0) return true;
  const std::size_t n = col_masks[0].size();
  std::vector<std::size_t> perm(p);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      bool seen_missing = false;
      for (std::size_t k = 0; k < p; ++k) {
        const bool obs = col_masks[perm[k]][i] != 0;
        if (seen_missing && obs) {
          ok = false;
          break;
        }
        if (!obs) seen_missing = true;
      }
    }
    if (ok) return true;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return false;
}

ResponsePattern missingness_summary(const RectDataset& d) {
  if (d.n_rows() == 0) throw InsufficientDataError("missingness_summary: empty dataset");
  ResponsePattern out;
  out.n = d.n_rows();
  const std::size_t p = d.n_cols();
  std::vector<std::vector<std::uint8_t>> cols(p);
  for (std::size_t j = 0; j < p; ++j) {
    out.column_names.push_back(d.spec(j).name);
    cols[j] = d.column_mask(j);
    std::size_t missing = 0;
    for (auto m : cols[j]) missing += (m == 0);
    out.column_missing_rates.push_back(static_cast<double>(missing) /
                                       static_cast<double>(out.n));
  }

  std::map<std::vector<std::uint8_t>, std::size_t> classes;
  std::vector<std::uint8_t> row(p);
  for (std::size_t i = 0; i < out.n; ++i) {
    for (std::size_t j = 0; j < p; ++j) row[j] = cols[j][i];
    ++classes[row];
  }
  for (auto& [pattern, count] : classes) {
    out.classes.push_back({pattern, count});
  }
  std::stable_sort(out.classes.begin(), out.classes.end(),
                   [](const PatternClass& a, const PatternClass& b) {
                     if (a.count != b.count) return a.count > b.count;
                     return a.pattern > b.pattern;
                   });

  out.monotone = p <= 6 ? monotone_by_permutation(cols)
                        : monotone_by_sorted_check(cols, out.n);
  return out;
}

CrossPatternTable cross_pattern_table(
    const RectDataset& d, const std::vector<std::vector<std::string>>& groups,
    std::vector<std::string> group_names) {
  if (groups.empty()) throw SchemaError("cross_pattern_table: no groups given");
  const std::size_t k = groups.size();
  if (k > 16) throw SchemaError("cross_pattern_table: too many groups");
  std::vector<std::vector<std::size_t>> group_cols(k);
  for (std::size_t g = 0; g < k; ++g) {
    if (groups[g].empty()) throw SchemaError("cross_pattern_table: empty group");
    for (const auto& name : groups[g]) group_cols[g].push_back(d.col_index(name));
  }

  CrossPatternTable out;
  if (group_names.size() == k) {
    out.group_names = std::move(group_names);
  } else {
    for (std::size_t g = 0; g < k; ++g) {
      std::string label;
      for (const auto& name : groups[g]) {
        if (!label.empty()) label += "+";
        label += name;
      }
      out.group_names.push_back(label);
    }
  }
  out.counts.assign(std::size_t{1} << k, 0);
  for (std::size_t i = 0; i < d.n_rows(); ++i) {
    std::size_t index = 0;
    for (std::size_t g = 0; g < k; ++g) {
      bool responding = true;
      for (auto c : group_cols[g]) {
        if (!d.observed(c, i)) {
          responding = false;
          break;
        }
      }
      if (responding) index |= (std::size_t{1} << g);
    }
    ++out.counts[index];
  }
  return out;
}

}  // namespace nrba
