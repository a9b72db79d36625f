#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

// Log-space special functions. Everything dealing with modified Bessel
// functions is kept in log space: the concentration parameters this library
// sees (kappa up to a few hundred) overflow I_nu long before they stress
// log I_nu.

namespace rejaug {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(e^a + e^b)
inline double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// log(e^a - e^b) for a > b; -inf when a == b, domain error when a < b.
inline double log_diff_exp(double a, double b) {
  if (b == kNegInf) return a;
  if (a == b) return kNegInf;
  if (a < b) throw std::domain_error("log_diff_exp: requires a >= b");
  return a + std::log1p(-std::exp(b - a));
}

namespace detail {

// log{ Gamma(nu+1) sum_{k>=0} (x^2/4)^k / (k! Gamma(nu+k+1)) } - log Gamma(nu+1):
// all terms positive, so a linear-space recurrence with explicit rescaling is
// both fast and stable; the peak term (near k ~ x/2) can reach e^700, hence
// the scaling ledger.
inline double log_bessel_series_scaled(double nu, double x) {
  if (x == 0.0) return -std::lgamma(nu + 1.0);
  const double q = 0.25 * x * x;
  double term = 1.0;
  double sum = 1.0;
  double log_scale = 0.0;
  for (int k = 1; k < 100000; ++k) {
    const double ratio = q / (k * (nu + k));
    term *= ratio;
    sum += term;
    if (sum > 1e280) {
      sum *= 1e-280;
      term *= 1e-280;
      log_scale += 280.0 * std::numbers::ln10;
    }
    if (ratio < 0.9 && term < sum * 1e-17) break;
  }
  return std::log(sum) + log_scale - std::lgamma(nu + 1.0);
}

// Hankel large-argument expansion of log I_nu(x); valid when x dominates
// nu^2 (selection handled by the caller). Truncated at the smallest term.
inline double log_bessel_asymptotic(double nu, double x) {
  const double mu = 4.0 * nu * nu;
  double term = 1.0;
  double sum = 1.0;
  double prev = std::numeric_limits<double>::max();
  for (int k = 1; k <= 40; ++k) {
    const double f = 2.0 * k - 1.0;
    term *= -(mu - f * f) / (8.0 * x * k);
    if (std::abs(term) >= prev) break;  // divergent tail reached
    sum += term;
    prev = std::abs(term);
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return x - 0.5 * std::log(2.0 * std::numbers::pi * x) + std::log(sum);
}

inline bool use_asymptotic(double nu, double x) {
  return x >= 30.0 && std::abs(4.0 * nu * nu - 1.0) <= 0.8 * x;
}

inline void check_bessel_domain(double nu, double x) {
  if (!std::isfinite(nu) || !std::isfinite(x)) throw std::domain_error("bessel: non-finite input");
  if (nu < -0.5) throw std::domain_error("bessel: order must be >= -1/2");
  if (x < 0.0) throw std::domain_error("bessel: argument must be >= 0");
}

}  // namespace detail

// log I_nu(x) for nu >= -1/2, x >= 0.
inline double log_bessel_i(double nu, double x) {
  detail::check_bessel_domain(nu, x);
  if (x == 0.0) {
    if (nu == 0.0) return 0.0;
    return nu > 0.0 ? kNegInf : std::numeric_limits<double>::infinity();
  }
  if (detail::use_asymptotic(nu, x)) return detail::log_bessel_asymptotic(nu, x);
  return nu * std::log(0.5 * x) + detail::log_bessel_series_scaled(nu, x);
}

// log{ I_nu(x) / (x/2)^nu }: smooth down to x = 0 where it equals
// -log Gamma(nu+1).
inline double log_bessel_i_scaled(double nu, double x) {
  detail::check_bessel_domain(nu, x);
  if (detail::use_asymptotic(nu, x))
    return detail::log_bessel_asymptotic(nu, x) - nu * std::log(0.5 * x);
  return detail::log_bessel_series_scaled(nu, x);
}

// log{ Gamma(nu+1) I_nu(x) (x/2)^{-nu} }: the normalizing constant of a
// von Mises-Fisher density with concentration x on the sphere S^{2nu+1},
// taken against the uniform probability measure. Increasing in x, and 0 at
// x = 0. The matrix-Langevin envelope constants are sums of these.
inline double log_vmf_normalizer(double nu, double x) {
  return std::lgamma(nu + 1.0) + log_bessel_i_scaled(nu, x);
}

// I_{nu+1}(x) / I_nu(x), in [0, 1) for finite x >= 0. Backward recurrence on
// the ratio; large arguments switch to the asymptotic expansion so the cost
// stays bounded and x near the overflow range is harmless.
inline double bessel_ratio(double nu, double x) {
  detail::check_bessel_domain(nu, x);
  if (x == 0.0) return 0.0;
  if (x > 1e4) {
    const double mu = 4.0 * nu * nu;
    return 1.0 - (2.0 * nu + 1.0) / (2.0 * x) + (mu - 1.0) / (8.0 * x * x);
  }
  const int depth = 32 + static_cast<int>(1.5 * x);
  double r = x / (2.0 * (nu + depth + 1.0));
  for (int j = depth - 1; j >= 0; --j) r = 1.0 / (2.0 * (nu + j + 1.0) / x + r);
  return r;
}

// Large-concentration approximation to the matrix-Langevin normalizing
// constant Z(kappa) on the Stiefel manifold of d x p frames, as a log.
inline double log_z_asymptotic(const Eigen::VectorXd& kappa, int d) {
  const int p = static_cast<int>(kappa.size());
  if (p < 1 || d < p) throw std::domain_error("log_z_asymptotic: need d >= p >= 1");
  for (int i = 0; i < p; ++i) {
    if (!(kappa[i] > 0.0) || !std::isfinite(kappa[i]))
      throw std::domain_error("log_z_asymptotic: kappa entries must be positive");
  }
  double lz = (-0.25 * p * (p + 5.0) + 0.5 * p * d) * std::numbers::ln2 -
              0.5 * p * std::log(std::numbers::pi);
  lz += kappa.sum();
  for (int j = 1; j <= p; ++j) lz += std::lgamma(0.5 * (d - j + 1));
  for (int j = 1; j < p; ++j)
    for (int i = 0; i < j; ++i) lz -= 0.5 * std::log(kappa[i] + kappa[j]);
  lz -= 0.5 * (d - p) * kappa.array().log().sum();
  return lz;
}

}  // namespace rejaug
