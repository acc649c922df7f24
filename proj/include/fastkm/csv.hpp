#pragma once

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fastkm/trace.hpp"

namespace fastkm {

/// All floating output uses 17 significant digits, enough to round-trip
/// IEEE doubles exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// Header: k,residual,velocity,k_times_residual plus per-coordinate columns
/// x0..x{d-1} when dim <= 4 and the trace kept its iterates.
inline void write_trace_csv(std::ostream& os, const Trace& tr) {
  const bool coords = tr.dim <= 4 && tr.has_vectors();
  os << "k,residual,velocity,k_times_residual";
  if (coords) {
    for (std::size_t d = 0; d < tr.dim; ++d) os << ",x" << d;
  }
  os << "\n";
  for (std::size_t k = 0; k < tr.rows(); ++k) {
    os << k << ',' << format_double(tr.residual[k]) << ',' << format_double(tr.velocity[k]) << ','
       << format_double(tr.k_times_residual[k]);
    if (coords) {
      for (std::size_t d = 0; d < tr.dim; ++d) os << ',' << format_double(tr.iterates[k][d]);
    }
    os << "\n";
  }
}

inline Trace read_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("trace csv: missing header");
  const auto header = split_csv_line(line);
  if (header.size() < 4 || header[0] != "k" || header[1] != "residual" ||
      header[2] != "velocity" || header[3] != "k_times_residual") {
    throw std::runtime_error("trace csv: unexpected header '" + line + "'");
  }
  const std::size_t ncoord = header.size() - 4;
  Trace tr;
  tr.dim = ncoord;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error("trace csv: ragged row '" + line + "'");
    }
    tr.residual.push_back(std::stod(cells[1]));
    tr.velocity.push_back(std::stod(cells[2]));
    tr.k_times_residual.push_back(std::stod(cells[3]));
    if (ncoord > 0) {
      Vector x(ncoord);
      for (std::size_t d = 0; d < ncoord; ++d) x[d] = std::stod(cells[4 + d]);
      tr.iterates.push_back(std::move(x));
    }
  }
  if (!tr.residual.empty()) {
    tr.wall_iterations = tr.residual.size() - 1;
    if (ncoord > 0) tr.final_iterate = tr.iterates.back();
  }
  return tr;
}

}  // namespace fastkm
