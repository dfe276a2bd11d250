#pragma once

#include <string>
#include <vector>

namespace nrba::report {

// Shortest round-trip decimal representation; locale-independent and stable
// across runs, which the byte-identical report guarantee relies on.
std::string fmt(double v);

class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> cells);
  std::string to_delimited(char delim = ',') const;
  void write(const std::string& path, char delim = ',') const;

  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

void write_file(const std::string& path, const std::string& content);

}  // namespace nrba::report
