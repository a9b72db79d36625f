#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <rejaug/specfun.hpp>

#include <cmath>
#include <vector>

#include "stat_test_utils.hpp"

using rejaug::bessel_ratio;
using rejaug::log_bessel_i;
using rejaug::log_bessel_i_scaled;
using rejaug::log_vmf_normalizer;
using rejaug::log_z_asymptotic;

namespace {

// Oracle: plain 50-term power series for I_nu(x), evaluated in linear space.
// Independent of the library path (no log-space summation, no asymptotics).
double bessel_i_series_oracle(double nu, double x, int terms = 50) {
  double sum = 0.0;
  for (int k = 0; k < terms; ++k) {
    sum += std::pow(0.25 * x * x, k) / (std::tgamma(k + 1.0) * std::tgamma(nu + k + 1.0));
  }
  return std::pow(0.5 * x, nu) * sum;
}

}  // namespace

TEST_CASE("log_bessel_i at x = 0") {
  CHECK(log_bessel_i(0.0, 0.0) == 0.0);
  CHECK(log_bessel_i(1.0, 0.0) == rejaug::kNegInf);
  CHECK(log_bessel_i(2.5, 0.0) == rejaug::kNegInf);
}

TEST_CASE("log_bessel_i domain errors") {
  CHECK_THROWS_AS(log_bessel_i(-0.6, 1.0), std::domain_error);
  CHECK_THROWS_AS(log_bessel_i(0.0, -1.0), std::domain_error);
  CHECK_THROWS_AS(log_bessel_i(std::nan(""), 1.0), std::domain_error);
}

TEST_CASE("log_bessel_i half-order closed form") {
  // I_{1/2}(x) = sqrt(2/(pi x)) sinh(x); at x = 2 this is sinh(2)/sqrt(pi).
  const double expected = std::log(std::sinh(2.0) / std::sqrt(std::numbers::pi));
  CHECK(log_bessel_i(0.5, 2.0) == doctest::Approx(expected).epsilon(1e-12));
  // cosh form at nu = -1/2
  const double expected_m = std::log(std::sqrt(2.0 / (std::numbers::pi * 3.0)) * std::cosh(3.0));
  CHECK(log_bessel_i(-0.5, 3.0) == doctest::Approx(expected_m).epsilon(1e-12));
}

TEST_CASE("log_bessel_i matches 50-term series oracle on [0,10] x [-1/2,10]") {
  for (double nu : {-0.5, 0.0, 0.5, 1.0, 2.0, 3.5, 5.0, 7.5, 10.0}) {
    for (double x : {1e-3, 0.1, 0.5, 1.0, 2.0, 4.0, 7.0, 10.0}) {
      const double expected = std::log(bessel_i_series_oracle(nu, x));
      const double got = log_bessel_i(nu, x);
      CHECK(got == doctest::Approx(expected).epsilon(1e-10));
    }
  }
}

TEST_CASE("log_bessel_i series/asymptotic seam is consistent") {
  // Evaluate both internal branches near the switchover and require agreement.
  for (double nu : {-0.5, 0.0, 0.5, 1.0, 2.0}) {
    for (double x : {30.0, 35.0, 50.0, 80.0}) {
      const double series = nu * std::log(0.5 * x) + rejaug::detail::log_bessel_series_scaled(nu, x);
      const double asym = rejaug::detail::log_bessel_asymptotic(nu, x);
      CHECK(series == doctest::Approx(asym).epsilon(1e-12));
    }
  }
}

TEST_CASE("log_bessel_i finite across the large-parameter range") {
  for (double nu : {-0.5, 0.0, 10.0, 50.0, 100.0, 200.0}) {
    for (double x : {0.0, 1.0, 10.0, 100.0, 350.0, 700.0}) {
      const double v = log_bessel_i(nu, x);
      const bool ok = std::isfinite(v) || (x == 0.0 && nu != 0.0);
      CHECK(ok);
    }
  }
  // Monotone ratio bound: I_{nu+1}/I_nu in (0,1) for x > 0.
  for (double nu : {0.0, 1.0, 25.0, 100.0}) {
    for (double x : {0.5, 10.0, 300.0, 700.0}) {
      const double r = std::exp(log_bessel_i(nu + 1.0, x) - log_bessel_i(nu, x));
      CHECK(r > 0.0);
      CHECK(r < 1.0);
    }
  }
}

TEST_CASE("bessel_ratio closed form at nu = 1/2") {
  // I_{3/2}/I_{1/2}(x) = coth(x) - 1/x
  const double x = 3.0;
  const double expected = 1.0 / std::tanh(x) - 1.0 / x;
  CHECK(bessel_ratio(0.5, x) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("bessel_ratio limits and range") {
  CHECK(bessel_ratio(0.0, 0.0) == 0.0);
  CHECK(bessel_ratio(3.0, 0.0) == 0.0);
  const double big = bessel_ratio(0.0, 1000.0);
  CHECK(big > 0.999);
  CHECK(big < 1.0);
}

TEST_CASE("bessel_ratio asymptotic branch agrees at the seam and stays bounded") {
  // Compare the recurrence (used below the seam) against the large-argument
  // expansion at the same point.
  for (double nu : {-0.5, 0.0, 1.0, 4.0}) {
    const double x = 9.99e3;  // recurrence path
    const double mu = 4.0 * nu * nu;
    const double expansion = 1.0 - (2.0 * nu + 1.0) / (2.0 * x) + (mu - 1.0) / (8.0 * x * x);
    CHECK(bessel_ratio(nu, x) == doctest::Approx(expansion).epsilon(1e-10));
  }
  const double huge = bessel_ratio(2.0, 1e120);
  CHECK(huge > 0.0);
  CHECK(huge <= 1.0);
}

TEST_CASE("bessel_ratio agrees with log-space evaluation") {
  for (double nu : {-0.5, 0.0, 0.5, 1.5, 4.0, 10.0}) {
    for (double x : {0.01, 0.3, 1.0, 5.0, 20.0, 75.0, 300.0}) {
      const double via_logs = std::exp(log_bessel_i(nu + 1.0, x) - log_bessel_i(nu, x));
      CHECK(bessel_ratio(nu, x) == doctest::Approx(via_logs).epsilon(1e-11));
    }
  }
}

TEST_CASE("bessel_ratio strictly increasing in x") {
  for (double nu : {0.0, 0.5, 2.0, 8.0}) {
    double prev = bessel_ratio(nu, 1e-4);
    for (double x = 0.5; x <= 100.0; x += 0.5) {
      const double cur = bessel_ratio(nu, x);
      CHECK(cur > prev);
      prev = cur;
    }
  }
}

TEST_CASE("log_vmf_normalizer small-argument limit") {
  // Gamma(nu+1) I_nu(x) / (x/2)^nu -> 1 as x -> 0.
  for (double nu : {-0.5, 0.0, 0.5, 2.0, 7.0}) {
    CHECK(log_vmf_normalizer(nu, 0.0) == 0.0);
    CHECK(log_vmf_normalizer(nu, 1e-8) == doctest::Approx(0.0).epsilon(1e-12));
  }
  // Increasing in x (bound-tightness property used by the envelope).
  for (double nu : {0.0, 0.5, 3.0}) {
    double prev = 0.0;
    for (double x = 0.25; x < 60.0; x += 0.25) {
      const double cur = log_vmf_normalizer(nu, x);
      CHECK(cur > prev);
      prev = cur;
    }
  }
}

TEST_CASE("log_z_asymptotic term count and symmetry") {
  // p = 3 has exactly 3 pairwise terms: perturbing each pair sum must move
  // the result through the 3 (kappa_i + kappa_j) factors only.
  Eigen::VectorXd kappa(3);
  kappa << 1.0, 5.0, 10.0;
  const double base = log_z_asymptotic(kappa, 5);
  CHECK(std::isfinite(base));

  // Permutation symmetry.
  Eigen::VectorXd perm(3);
  perm << 10.0, 1.0, 5.0;
  CHECK(log_z_asymptotic(perm, 5) == doctest::Approx(base).epsilon(1e-13));

  // Pairwise-term count: reconstruct the formula by hand and compare.
  double manual = (-0.25 * 3 * 8 + 0.5 * 3 * 5) * std::numbers::ln2 -
                  1.5 * std::log(std::numbers::pi) + kappa.sum();
  for (int j = 1; j <= 3; ++j) manual += std::lgamma(0.5 * (5 - j + 1));
  int pair_terms = 0;
  for (int j = 1; j < 3; ++j)
    for (int i = 0; i < j; ++i) {
      manual -= 0.5 * std::log(kappa[i] + kappa[j]);
      ++pair_terms;
    }
  manual -= 0.5 * (5 - 3) * kappa.array().log().sum();
  CHECK(pair_terms == 3);
  CHECK(base == doctest::Approx(manual).epsilon(1e-13));
}

TEST_CASE("log_z_asymptotic exact closed form at p = 1") {
  // For p = 1, d = 3 the true normalizer is sinh(kappa)/kappa; the asymptotic
  // form drops the e^{-2 kappa} piece, so at kappa = 10 the two agree to
  // ~2e-9 in log. Well within the 2% accuracy the approximation claims.
  Eigen::VectorXd kappa(1);
  kappa << 10.0;
  const double exact = std::log(std::sinh(10.0) / 10.0);
  const double approx = log_z_asymptotic(kappa, 3);
  CHECK(std::abs(approx - exact) / std::abs(exact) < 0.02);
}

TEST_CASE("log_z_asymptotic monotone in each kappa above threshold") {
  Eigen::VectorXd kappa(3);
  kappa << 4.0, 6.0, 9.0;
  const double base = log_z_asymptotic(kappa, 5);
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXd bumped = kappa;
    bumped[i] += 1e-4;
    CHECK(log_z_asymptotic(bumped, 5) > base);
  }
}

TEST_CASE("log_z_asymptotic rejects nonpositive kappa") {
  Eigen::VectorXd kappa(2);
  kappa << 1.0, 0.0;
  CHECK_THROWS_AS(log_z_asymptotic(kappa, 4), std::domain_error);
  kappa << -1.0, 2.0;
  CHECK_THROWS_AS(log_z_asymptotic(kappa, 4), std::domain_error);
}
