#pragma once

// Small enumerable rejection-sampled models used by the unit and acceptance
// suites. Everything here is exact: posteriors, conditionals, and one-step
// transition kernels are computed by enumeration, so they can serve as
// oracles for the Monte Carlo machinery.

#include <rejaug/rejection.hpp>
#include <rejaug/rng.hpp>

#include <Eigen/Core>

#include <cmath>
#include <vector>

namespace toy {

struct DiscreteRejectionModel {
  using Point = int;
  std::vector<double> f;  // unnormalized target mass per atom
  std::vector<double> q;  // proposal probability per atom
  double envelope = 1.0;  // M

  double log_f(int x) const { return std::log(f[static_cast<std::size_t>(x)]); }
  double log_q(int x) const { return std::log(q[static_cast<std::size_t>(x)]); }
  double log_envelope() const { return std::log(envelope); }

  int propose(rejaug::RngStream& rng) const {
    double u = rng.uniform();
    for (std::size_t i = 0; i + 1 < q.size(); ++i) {
      if (u < q[i]) return static_cast<int>(i);
      u -= q[i];
    }
    return static_cast<int>(q.size()) - 1;
  }

  double z() const {
    double s = 0.0;
    for (double v : f) s += v;
    return s;
  }
};

// Two atoms {0,1} with a tilt parameter on a finite grid:
//   f(0,theta) = 1 + theta,  f(1,theta) = 2 - theta,  q = (1/2, 1/2),  M = 4.
// Z(theta) = 3 for every theta, so the exact posterior over the grid is
// proportional to prod_i f(x_i, theta). Uniform ergodicity constants are
// available in closed form: f in [1,2], q = 1/2, slack r = 1 - 2/12 = 5/6,
// acceptance R = 3/4.
struct TwoAtomGridToy {
  std::vector<double> grid;  // theta values, all inside (0,1)
  static constexpr double kEnvelope = 4.0;

  DiscreteRejectionModel model_at(double theta) const {
    return {{1.0 + theta, 2.0 - theta}, {0.5, 0.5}, kEnvelope};
  }

  static double atom_mass(int x, double theta) { return x == 0 ? 1.0 + theta : 2.0 - theta; }

  std::vector<double> exact_posterior(const std::vector<int>& obs) const {
    std::vector<double> post(grid.size(), 0.0);
    double total = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      double lp = 0.0;
      for (int x : obs) lp += std::log(atom_mass(x, grid[g]));
      post[g] = std::exp(lp);
      total += post[g];
    }
    for (double& v : post) v /= total;
    return post;
  }

  // p(theta | X, rejected counts): rejected proposals at atom 0 contribute
  // (1-theta)/4 each and at atom 1 theta/4 each.
  std::vector<double> conditional_given_counts(const std::vector<int>& obs, long r0, long r1) const {
    std::vector<double> post(grid.size(), 0.0);
    double max_lp = -1e300;
    std::vector<double> lps(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const double th = grid[g];
      double lp = 0.0;
      for (int x : obs) lp += std::log(atom_mass(x, th));
      lp += r0 * std::log1p(-th) + r1 * std::log(th);
      lps[g] = lp;
      max_lp = std::max(max_lp, lp);
    }
    double total = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      post[g] = std::exp(lps[g] - max_lp);
      total += post[g];
    }
    for (double& v : post) v /= total;
    return post;
  }

  // Exact one-step kernel of the data-augmentation chain on the grid,
  // enumerating the total rejected count R ~ NegBin(n, 3/4) and the split of
  // rejections between atoms. The tail beyond rmax is below (1/4)^rmax times
  // a polynomial and is ignored.
  Eigen::MatrixXd exact_da_kernel(const std::vector<int>& obs, int rmax = 80) const {
    const int m = static_cast<int>(grid.size());
    const auto n = static_cast<double>(obs.size());
    Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(m, m);
    for (int gi = 0; gi < m; ++gi) {
      const double th = grid[static_cast<std::size_t>(gi)];
      for (int r = 0; r <= rmax; ++r) {
        const double log_nb = std::lgamma(n + r) - std::lgamma(n) - std::lgamma(r + 1.0) +
                              n * std::log(0.75) + r * std::log(0.25);
        for (int r0 = 0; r0 <= r; ++r0) {
          const int r1 = r - r0;
          const double log_split = std::lgamma(r + 1.0) - std::lgamma(r0 + 1.0) -
                                   std::lgamma(r1 + 1.0) + r0 * std::log1p(-th) +
                                   r1 * std::log(th);
          const double w = std::exp(log_nb + log_split);
          const auto cond = conditional_given_counts(obs, r0, r1);
          for (int gj = 0; gj < m; ++gj) kernel(gi, gj) += w * cond[static_cast<std::size_t>(gj)];
        }
      }
    }
    return kernel;  // rows sum to ~1 up to the truncated tail
  }
};

inline double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  double tv = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) tv += std::abs(a[i] - b[i]);
  return 0.5 * tv;
}

}  // namespace toy
