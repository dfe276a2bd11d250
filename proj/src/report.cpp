#include "nrba/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "nrba/errors.hpp"

namespace nrba::report {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

void Table::add_row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) {
    throw Error("table row has " + std::to_string(cells.size()) + " cells, header has " +
                std::to_string(header_.size()));
  }
  rows_.push_back(std::move(cells));
}

std::string Table::to_delimited(char delim) const {
  std::string out;
  auto append = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += delim;
      out += cells[i];
    }
    out += '\n';
  };
  append(header_);
  for (const auto& r : rows_) append(r);
  return out;
}

void Table::write(const std::string& path, char delim) const {
  write_file(path, to_delimited(delim));
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path);
  out << content;
  if (!out) throw Error("write failed: " + path);
}

}  // namespace nrba::report
