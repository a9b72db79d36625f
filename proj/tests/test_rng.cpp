#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <rejaug/rng.hpp>

#include <cmath>
#include <vector>

#include "stat_test_utils.hpp"

using rejaug::RngStream;

TEST_CASE("identical seeds give identical sequences") {
  RngStream a(12345), b(12345);
  for (int i = 0; i < 1000; ++i) CHECK(a() == b());
}

TEST_CASE("substreams are position independent") {
  RngStream a(7), b(7);
  for (int i = 0; i < 64; ++i) (void)a();  // consume parent a only
  RngStream ca = a.substream(3);
  RngStream cb = b.substream(3);
  for (int i = 0; i < 100; ++i) CHECK(ca() == cb());
}

TEST_CASE("distinct substreams differ") {
  RngStream root(99);
  RngStream s0 = root.substream(0);
  RngStream s1 = root.substream(1);
  int same = 0;
  for (int i = 0; i < 64; ++i)
    if (s0() == s1()) ++same;
  CHECK(same == 0);
}

TEST_CASE("uniform is uniform") {
  RngStream rng(2024);
  const int bins = 20;
  std::vector<double> counts(bins, 0.0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    counts[static_cast<int>(u * bins)] += 1.0;
  }
  std::vector<double> probs(bins, 1.0 / bins);
  CHECK(testutil::chi2_gof_pvalue(counts, probs) > 0.001);
}

TEST_CASE("normal moments") {
  RngStream rng(5);
  std::vector<double> xs(200000);
  for (double& x : xs) x = rng.normal();
  const double m = testutil::mean(xs);
  const double v = testutil::variance(xs);
  CHECK(std::abs(m) < 3.0 / std::sqrt(200000.0));
  CHECK(v == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("gamma moments") {
  RngStream rng(6);
  const double shape = 2.5, rate = 0.5;
  std::vector<double> xs(200000);
  for (double& x : xs) x = rng.gamma(shape, rate);
  CHECK(testutil::mean(xs) == doctest::Approx(shape / rate).epsilon(0.02));
  CHECK(testutil::variance(xs) == doctest::Approx(shape / (rate * rate)).epsilon(0.05));

  // Sub-unit shape goes through the boosting branch.
  for (double& x : xs) x = rng.gamma(0.4, 1.0);
  CHECK(testutil::mean(xs) == doctest::Approx(0.4).epsilon(0.03));
}

TEST_CASE("gamma distribution matches CDF") {
  RngStream rng(7);
  std::vector<double> xs(20000);
  for (double& x : xs) x = rng.gamma(3.0, 2.0);
  const double p = testutil::ks_test_pvalue(xs, [](double x) {
    return x <= 0.0 ? 0.0 : testutil::gamma_p(3.0, 2.0 * x);
  });
  CHECK(p > 0.001);
}

TEST_CASE("beta moments") {
  RngStream rng(8);
  const double a = 2.0, b = 5.0;
  std::vector<double> xs(100000);
  for (double& x : xs) x = rng.beta(a, b);
  CHECK(testutil::mean(xs) == doctest::Approx(a / (a + b)).epsilon(0.02));
}

TEST_CASE("uniform_int is unbiased") {
  RngStream rng(9);
  std::vector<double> counts(7, 0.0);
  for (int i = 0; i < 140000; ++i) counts[rng.uniform_int(7)] += 1.0;
  std::vector<double> probs(7, 1.0 / 7.0);
  CHECK(testutil::chi2_gof_pvalue(counts, probs) > 0.001);
}
