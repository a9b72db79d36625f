#pragma once

#include <rejaug/trace.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

// Chain post-processing: effective sample size via the initial monotone
// sequence estimator, and cross-sampler comparison tables.

namespace rejaug {

struct EssResult {
  double ess = 0.0;
  bool degenerate = false;  // zero-variance series
};

inline EssResult effective_sample_size(const Eigen::VectorXd& series) {
  const auto n = series.size();
  if (n < 10) throw std::invalid_argument("effective_sample_size: need at least 10 draws");
  const double mean = series.mean();
  const Eigen::ArrayXd centered = series.array() - mean;
  const double gamma0 = centered.square().sum() / static_cast<double>(n);
  if (!(gamma0 > 0.0)) return {static_cast<double>(n), true};

  const auto autocov = [&](Eigen::Index lag) {
    double s = 0.0;
    for (Eigen::Index t = 0; t + lag < n; ++t) s += centered[t] * centered[t + lag];
    return s / static_cast<double>(n);
  };

  // Sum lag pairs while positive, enforcing monotone nonincreasing pair sums.
  double pair_sum = 0.0;
  double prev_pair = std::numeric_limits<double>::max();
  for (Eigen::Index m = 0; 2 * m + 1 < n; ++m) {
    double pair = autocov(2 * m) + autocov(2 * m + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    pair_sum += pair;
    prev_pair = pair;
  }
  const double asym_var = -gamma0 + 2.0 * pair_sum;
  if (!(asym_var > 0.0)) return {static_cast<double>(n), false};
  const double ess = std::clamp(static_cast<double>(n) * gamma0 / asym_var, 1.0,
                                static_cast<double>(n));
  return {ess, false};
}

struct LabeledTrace {
  std::string name;
  const ChainTrace* trace = nullptr;
};

// Per-sampler, per-parameter summary built from equally parameterized traces.
struct SamplerComparison {
  std::vector<std::string> samplers;
  std::vector<std::string> parameters;
  Eigen::MatrixXd ess;          // samplers x parameters
  Eigen::MatrixXd ess_per_sec;  // samplers x parameters
  Eigen::MatrixXd means;
  Eigen::MatrixXd mcse;         // sd / sqrt(ess)
  Eigen::VectorXd median_ess_per_sec;  // per sampler, across parameters

  double pairwise_z(Eigen::Index sampler_a, Eigen::Index sampler_b, Eigen::Index param) const {
    const double se = std::sqrt(mcse(sampler_a, param) * mcse(sampler_a, param) +
                                mcse(sampler_b, param) * mcse(sampler_b, param));
    return (means(sampler_a, param) - means(sampler_b, param)) / se;
  }

  void to_csv(std::ostream& os) const {
    os << "sampler,parameter,ess,ess_per_sec,mean,mcse\n";
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(samplers.size()); ++i)
      for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(parameters.size()); ++j)
        os << samplers[static_cast<std::size_t>(i)] << ',' << parameters[static_cast<std::size_t>(j)]
           << ',' << ess(i, j) << ',' << ess_per_sec(i, j) << ',' << means(i, j) << ','
           << mcse(i, j) << '\n';
  }

  void to_markdown(std::ostream& os) const {
    os << "| sampler | median ESS/sec |";
    for (const auto& p : parameters) os << " mean " << p << " |";
    os << "\n|---|---|";
    for (std::size_t j = 0; j < parameters.size(); ++j) os << "---|";
    os << '\n';
    for (std::size_t i = 0; i < samplers.size(); ++i) {
      os << "| " << samplers[i] << " | " << median_ess_per_sec(static_cast<Eigen::Index>(i)) << " |";
      for (std::size_t j = 0; j < parameters.size(); ++j)
        os << ' ' << means(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) << " |";
      os << '\n';
    }
  }
};

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

// `param_count` restricts the comparison to the leading columns (e.g. the
// kappa block of a langevin trace); 0 means all columns.
inline SamplerComparison compare_samplers(const std::vector<LabeledTrace>& traces,
                                          Eigen::Index param_count = 0) {
  if (traces.size() < 2) throw std::invalid_argument("compare_samplers: need at least 2 traces");
  const ChainTrace& first = *traces.front().trace;
  const Eigen::Index np = param_count > 0 ? param_count : first.draws.cols();
  for (const auto& lt : traces) {
    if (lt.trace->draws.cols() < np)
      throw std::invalid_argument("compare_samplers: trace has too few parameters");
    for (Eigen::Index j = 0; j < np; ++j)
      if (lt.trace->labels[static_cast<std::size_t>(j)] != first.labels[static_cast<std::size_t>(j)])
        throw std::invalid_argument("compare_samplers: parameter labels disagree");
  }

  SamplerComparison cmp;
  for (const auto& lt : traces) cmp.samplers.push_back(lt.name);
  for (Eigen::Index j = 0; j < np; ++j) cmp.parameters.push_back(first.labels[static_cast<std::size_t>(j)]);
  const auto ns = static_cast<Eigen::Index>(traces.size());
  cmp.ess.resize(ns, np);
  cmp.ess_per_sec.resize(ns, np);
  cmp.means.resize(ns, np);
  cmp.mcse.resize(ns, np);
  cmp.median_ess_per_sec.resize(ns);

  for (Eigen::Index i = 0; i < ns; ++i) {
    const ChainTrace& tr = *traces[static_cast<std::size_t>(i)].trace;
    const double secs = std::max(tr.total_seconds(), 1e-12);
    std::vector<double> rates;
    for (Eigen::Index j = 0; j < np; ++j) {
      const Eigen::VectorXd col = tr.draws.col(j);
      const auto er = effective_sample_size(col);
      const double sd = std::sqrt((col.array() - col.mean()).square().sum() /
                                  static_cast<double>(col.size() - 1));
      cmp.ess(i, j) = er.ess;
      cmp.ess_per_sec(i, j) = er.ess / secs;
      cmp.means(i, j) = col.mean();
      cmp.mcse(i, j) = sd / std::sqrt(er.ess);
      rates.push_back(cmp.ess_per_sec(i, j));
    }
    cmp.median_ess_per_sec(i) = detail::median(rates);
  }
  return cmp;
}

}  // namespace rejaug
