#pragma once

#include <stdexcept>
#include <string>

namespace nrba {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file (ragged rows, bad header).
struct ParseError : Error {
  using Error::Error;
};

// Column/schema mismatches and role violations.
struct SchemaError : Error {
  using Error::Error;
};

// A single cell failed to parse; message carries row/column coordinates.
struct CellError : Error {
  using Error::Error;
};

// Design matrix has fewer usable rows than retained columns.
struct SingularFitError : Error {
  using Error::Error;
};

// Binary response with only one class present.
struct DegenerateResponseError : Error {
  using Error::Error;
};

// Too few observations for the requested estimate.
struct InsufficientDataError : Error {
  using Error::Error;
};

// Proxy with undefined or zero respondent correlation structure.
struct DegenerateProxyError : Error {
  using Error::Error;
};

// rss == 0: the linear-model AIC is -infinity.
struct PerfectFitError : Error {
  using Error::Error;
};

// A categorical level at prediction time that the fit never saw.
struct UnseenLevelError : Error {
  using Error::Error;
};

// Variance cannot be formed (single PSU in a stratum, zero SRS variance).
struct VarianceUndefinedError : Error {
  using Error::Error;
};

// Raking margin category with no positive-weight rows, or empty class.
struct InfeasibleAdjustmentError : Error {
  using Error::Error;
};

}  // namespace nrba
