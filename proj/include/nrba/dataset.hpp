#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nrba {

enum class Role {
  Outcome,
  Auxiliary,
  Weight,
  BaseWeight,
  Psu,
  Stratum,
  Subgroup,
  ResponseIndicator,
  Id,
};

enum class Measurement { Continuous, Categorical };

const char* role_name(Role r);
Role role_from_name(std::string_view s);
const char* measurement_name(Measurement m);
Measurement measurement_from_name(std::string_view s);

struct ColumnSpec {
  std::string name;
  Role role = Role::Auxiliary;
  Measurement measurement = Measurement::Continuous;
  // raw tokens mapped to missing (e.g. "-9"); numeric tokens also match by value
  std::vector<std::string> missing_sentinels;
};

// Rectangular survey data with an explicit observed/missing mask. Continuous
// cells hold parsed values; categorical cells hold indices into the per-column
// sorted level table. Read-only after construction.
class RectDataset {
 public:
  RectDataset() = default;
  RectDataset(std::vector<ColumnSpec> columns, std::size_t n);

  std::size_t n_rows() const { return n_; }
  std::size_t n_cols() const { return columns_.size(); }
  const std::vector<ColumnSpec>& columns() const { return columns_; }
  const ColumnSpec& spec(std::size_t col) const { return columns_[col]; }

  std::size_t col_index(std::string_view name) const;  // throws SchemaError
  std::optional<std::size_t> find_col(std::string_view name) const;
  std::optional<std::size_t> role_col(Role role) const;  // singleton roles

  bool observed(std::size_t col, std::size_t row) const {
    return mask_[col][row] != 0;
  }
  double value(std::size_t col, std::size_t row) const {
    return values_[col][row];
  }
  const std::vector<double>& column_values(std::size_t col) const {
    return values_[col];
  }
  const std::vector<std::uint8_t>& column_mask(std::size_t col) const {
    return mask_[col];
  }
  const std::vector<std::string>& levels(std::size_t col) const {
    return levels_[col];
  }
  const std::string& level_name(std::size_t col, std::size_t row) const;

  // column vector helpers; missing cells pass through as stored (callers
  // should consult the mask)
  std::vector<double> numeric_column(std::string_view name) const;
  std::vector<std::uint8_t> observed_mask(std::string_view name) const;

  // mutating builders, used by load_table and in-memory construction
  void set_cell(std::size_t col, std::size_t row, double v) {
    values_[col][row] = v;
    mask_[col][row] = 1;
  }
  void set_missing(std::size_t col, std::size_t row) {
    values_[col][row] = 0.0;
    mask_[col][row] = 0;
  }
  void set_levels(std::size_t col, std::vector<std::string> lv) {
    levels_[col] = std::move(lv);
  }

  void validate_roles() const;  // throws SchemaError on duplicate singletons

 private:
  std::vector<ColumnSpec> columns_;
  std::size_t n_ = 0;
  std::vector<std::vector<double>> values_;        // [col][row]
  std::vector<std::vector<std::uint8_t>> mask_;    // [col][row], 1 = observed
  std::vector<std::vector<std::string>> levels_;   // [col], sorted, categorical only
};

struct LoadOptions {
  char delimiter = ',';
};

// Reads a delimited text file with one header row. Sentinel-valued and empty
// cells become missing. Rows with a missing response-indicator cell are
// rejected: the response indicator must be fully observed.
RectDataset load_table(const std::string& path,
                       const std::vector<ColumnSpec>& schema,
                       const LoadOptions& options = {});

// In-memory constructor used by tests and the simulation lab. NaN marks a
// missing cell in continuous columns; categorical columns take level strings
// with "" marking missing.
struct ColumnData {
  ColumnSpec spec;
  std::vector<double> numeric;        // continuous columns
  std::vector<std::string> labels;    // categorical columns
};
RectDataset from_columns(const std::vector<ColumnData>& columns);

struct PatternClass {
  std::vector<std::uint8_t> pattern;  // 1 = observed, per column
  std::size_t count = 0;
};

struct ResponsePattern {
  std::size_t n = 0;
  std::vector<std::string> column_names;
  std::vector<double> column_missing_rates;
  std::vector<PatternClass> classes;  // sorted by count descending
  bool monotone = false;
};

// Step 1: per-column missingness, distinct response patterns, monotone flag.
ResponsePattern missingness_summary(const RectDataset& d);

// Exhaustive permutation check, exposed for property tests (p <= 6 intended).
bool monotone_by_permutation(const std::vector<std::vector<std::uint8_t>>& col_masks);

struct CrossPatternTable {
  std::vector<std::string> group_names;
  // counts[index]: bit g of index set = all columns of group g observed
  std::vector<std::size_t> counts;
};

// Joint unit-response pattern across instrument groups; a row "responds" to a
// group iff every column in the group is observed.
CrossPatternTable cross_pattern_table(
    const RectDataset& d, const std::vector<std::vector<std::string>>& groups,
    std::vector<std::string> group_names = {});

}  // namespace nrba
