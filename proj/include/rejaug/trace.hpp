#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

namespace rejaug {

// Iteration-ordered parameter draws with per-iteration metadata. The draws
// matrix is (iterations x parameters); meta columns are kept parallel.
struct ChainTrace {
  std::vector<std::string> labels;
  Eigen::MatrixXd draws;
  std::vector<double> seconds;
  std::vector<int> accepted;
  std::vector<int> aug_sizes;

  [[nodiscard]] Eigen::Index iterations() const { return draws.rows(); }

  [[nodiscard]] Eigen::VectorXd column(const std::string& label) const {
    for (std::size_t j = 0; j < labels.size(); ++j)
      if (labels[j] == label) return draws.col(static_cast<Eigen::Index>(j));
    throw std::invalid_argument("ChainTrace: no parameter named " + label);
  }

  [[nodiscard]] double total_seconds() const {
    double s = 0.0;
    for (double v : seconds) s += v;
    return s;
  }

  void check_consistent() const {
    const auto n = static_cast<std::size_t>(draws.rows());
    if (labels.size() != static_cast<std::size_t>(draws.cols()))
      throw std::invalid_argument("ChainTrace: label/draw column mismatch");
    if (seconds.size() != n || accepted.size() != n || aug_sizes.size() != n)
      throw std::invalid_argument("ChainTrace: metadata length mismatch");
    for (double s : seconds)
      if (s < 0.0) throw std::invalid_argument("ChainTrace: negative seconds");
  }
};

}  // namespace rejaug
