#pragma once

#include <rejaug/trace.hpp>

#include <Eigen/Core>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rejaug {

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Shortest-width formatting with full round-trip precision; output bytes are
// a pure function of the value, which the reproducibility contract relies on.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const Eigen::MatrixXd& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  for (std::size_t j = 0; j < header.size(); ++j) os << (j ? "," : "") << header[j];
  os << '\n';
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j)
      os << (j ? "," : "") << format_double(rows(i, j));
    os << '\n';
  }
  if (!os) throw IoError("write failed: " + path);
}

// Numeric CSV reader. A leading non-numeric line is treated as the header;
// errors carry 1-based row numbers.
inline Eigen::MatrixXd read_csv(const std::string& path, std::vector<std::string>* header = nullptr) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  Eigen::Index cols = -1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    {
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
    }
    std::vector<double> row;
    bool numeric = true;
    std::string bad;
    for (const auto& cell : cells) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
        if (used != cell.size()) throw std::invalid_argument("trailing");
        row.push_back(v);
      } catch (const std::exception&) {
        numeric = false;
        bad = cell;
        break;
      }
    }
    if (!numeric) {
      if (line_no == 1) {
        if (header) *header = cells;
        continue;
      }
      throw IoError(path + ": row " + std::to_string(line_no) + ": non-numeric value '" + bad +
                    "'");
    }
    if (cols < 0) {
      cols = static_cast<Eigen::Index>(row.size());
    } else if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw IoError(path + ": row " + std::to_string(line_no) + ": expected " +
                    std::to_string(cols) + " columns, got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), std::max<Eigen::Index>(cols, 0));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
  return m;
}

// Trace serialization. Wall-clock timing lives in a sidecar so the trace file
// itself is byte-identical across reruns of the same manifest.
inline void write_trace_csv(const std::string& path, const ChainTrace& trace) {
  trace.check_consistent();
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "iteration";
  for (const auto& l : trace.labels) os << ',' << l;
  os << ",accept,aug_total\n";
  for (Eigen::Index i = 0; i < trace.draws.rows(); ++i) {
    os << i;
    for (Eigen::Index j = 0; j < trace.draws.cols(); ++j) os << ',' << format_double(trace.draws(i, j));
    os << ',' << trace.accepted[static_cast<std::size_t>(i)] << ','
       << trace.aug_sizes[static_cast<std::size_t>(i)] << '\n';
  }
  if (!os) throw IoError("write failed: " + path);
}

inline void write_timing_csv(const std::string& path, const ChainTrace& trace) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "iteration,seconds\n";
  for (std::size_t i = 0; i < trace.seconds.size(); ++i)
    os << i << ',' << format_double(trace.seconds[i]) << '\n';
}

inline ChainTrace read_trace_csv(const std::string& path, const std::string& timing_path = "") {
  std::vector<std::string> header;
  const Eigen::MatrixXd m = read_csv(path, &header);
  if (header.size() < 4 || header.front() != "iteration")
    throw IoError(path + ": not a trace file");
  ChainTrace trace;
  const auto np = static_cast<Eigen::Index>(header.size()) - 3;  // iteration, accept, aug_total
  for (Eigen::Index j = 0; j < np; ++j) trace.labels.push_back(header[static_cast<std::size_t>(j + 1)]);
  trace.draws = m.block(0, 1, m.rows(), np);
  trace.accepted.resize(static_cast<std::size_t>(m.rows()));
  trace.aug_sizes.resize(static_cast<std::size_t>(m.rows()));
  trace.seconds.assign(static_cast<std::size_t>(m.rows()), 0.0);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    trace.accepted[static_cast<std::size_t>(i)] = static_cast<int>(m(i, np + 1));
    trace.aug_sizes[static_cast<std::size_t>(i)] = static_cast<int>(m(i, np + 2));
  }
  if (!timing_path.empty()) {
    const Eigen::MatrixXd t = read_csv(timing_path);
    if (t.rows() != m.rows()) throw IoError(timing_path + ": timing rows do not match trace");
    for (Eigen::Index i = 0; i < t.rows(); ++i)
      trace.seconds[static_cast<std::size_t>(i)] = t(i, 1);
  }
  return trace;
}

}  // namespace rejaug
