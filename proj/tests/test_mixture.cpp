#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <rejaug/diagnostics.hpp>
#include <rejaug/mixture.hpp>

#include <cmath>
#include <vector>

#include "stat_test_utils.hpp"

using rejaug::GaussianComponent;
using rejaug::MixtureDensity;
using rejaug::NormalInverseWishart;
using rejaug::RngStream;
using rejaug::StickBreakingState;
using rejaug::TruncationRegion;

namespace {

Eigen::VectorXd vec1(double x) {
  Eigen::VectorXd v(1);
  v << x;
  return v;
}

StickBreakingState single_gaussian_state(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  StickBreakingState st;
  const auto d = mean.size();
  st.weights = Eigen::VectorXd::Ones(1);
  st.components.push_back({mean, cov});
  st.alpha = 1.0;
  st.base.mu0 = mean;
  st.base.psi = Eigen::MatrixXd::Identity(d, d);
  st.base.nu = d + 2.0;
  return st;
}

}  // namespace

TEST_CASE("half-space truncation accepts half the proposals") {
  RngStream rng(71);
  auto st = single_gaussian_state(vec1(0.0), Eigen::MatrixXd::Identity(1, 1));
  TruncationRegion region{vec1(0.0), vec1(std::numeric_limits<double>::infinity())};
  const auto model = rejaug::truncated_mixture_model(st, region);
  const int n = 100000;
  int rejected = 0;
  for (int i = 0; i < n; ++i)
    rejected += static_cast<int>(rejaug::sample_with_rejections(model, rng).rejected.size());
  // Geometric with success probability 1/2: E[rejected per acceptance] = 1.
  const double mean_rej = static_cast<double>(rejected) / n;
  CHECK(std::abs(mean_rej - 1.0) < 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("mixture well inside the region never rejects") {
  RngStream rng(72);
  auto st = single_gaussian_state(vec1(0.0), 0.25 * Eigen::MatrixXd::Identity(1, 1));
  TruncationRegion region{vec1(-100.0), vec1(100.0)};
  const auto model = rejaug::truncated_mixture_model(st, region);
  for (int i = 0; i < 10000; ++i)
    CHECK(rejaug::sample_with_rejections(model, rng).rejected.empty());
}

TEST_CASE("acceptance rate matches the quadrature mass of the region") {
  RngStream rng(73);
  StickBreakingState st;
  st.weights = Eigen::VectorXd(2);
  st.weights << 0.3, 0.7;
  st.components.push_back({vec1(-0.4), 0.09 * Eigen::MatrixXd::Identity(1, 1)});
  st.components.push_back({vec1(0.8), 0.25 * Eigen::MatrixXd::Identity(1, 1)});
  st.alpha = 1.0;
  st.base.mu0 = vec1(0.0);
  st.base.psi = Eigen::MatrixXd::Identity(1, 1);
  st.base.nu = 3.0;
  TruncationRegion region{vec1(-0.5), vec1(1.0)};
  const auto model = rejaug::truncated_mixture_model(st, region);

  const MixtureDensity dens(st);
  const double mass = testutil::simpson(
      [&](double x) { return std::exp(dens.log_density(vec1(x))); }, -0.5, 1.0, 4000);

  RngStream rng2(74);
  const int n = 100000;
  std::uint64_t proposals = 0;
  for (int i = 0; i < n; ++i)
    proposals += rejaug::sample_with_rejections(model, rng2).rejected.size() + 1;
  const double acc = static_cast<double>(n) / static_cast<double>(proposals);
  const double se = std::sqrt(mass * (1.0 - mass) / static_cast<double>(proposals));
  CHECK(std::abs(acc - mass) < 3.0 * se);
}

TEST_CASE("inverse Wishart mean") {
  RngStream rng(75);
  Eigen::MatrixXd psi(2, 2);
  psi << 2.0, 0.3, 0.3, 1.0;
  const double nu = 7.0;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(2, 2);
  const int n = 20000;
  for (int i = 0; i < n; ++i) sum += rejaug::sample_inverse_wishart(psi, nu, rng);
  const Eigen::MatrixXd expected = psi / (nu - 2.0 - 1.0);  // psi / (nu - d - 1)
  CHECK(((sum / n) - expected).cwiseAbs().maxCoeff() < 0.05);
  CHECK_THROWS_AS(rejaug::sample_inverse_wishart(psi, 0.5, rng), std::domain_error);
}

TEST_CASE("empty sweep draws from the prior") {
  RngStream rng(76);
  NormalInverseWishart base;
  base.mu0 = Eigen::VectorXd::Zero(2);
  base.lambda0 = 1.0;
  base.psi = Eigen::MatrixXd::Identity(2, 2);
  base.nu = 5.0;
  auto state = rejaug::sample_stick_breaking_prior(10, 1.0, base, rng);

  const int sweeps = 4000;
  double w1 = 0.0;
  Eigen::VectorXd mean_sum = Eigen::VectorXd::Zero(2);
  for (int s = 0; s < sweeps; ++s) {
    state = rejaug::blocked_gibbs_sweep(state, {}, rng);
    w1 += state.weights[0];
    mean_sum += state.components[0].mean;
    CHECK(std::abs(state.weights.sum() - 1.0) < 1e-12);
  }
  // First stick is Beta(1, alpha): mean 1/2 at alpha = 1.
  CHECK(w1 / sweeps == doctest::Approx(0.5).epsilon(0.05));
  // Component means are centered at mu0 = 0; var = E[cov]/lambda0 per axis.
  CHECK((mean_sum / sweeps).cwiseAbs().maxCoeff() < 0.1);
}

TEST_CASE("allocation probabilities are a simplex") {
  RngStream rng(77);
  NormalInverseWishart base;
  base.mu0 = Eigen::VectorXd::Zero(2);
  base.lambda0 = 0.5;
  base.psi = Eigen::MatrixXd::Identity(2, 2);
  base.nu = 5.0;
  const auto state = rejaug::sample_stick_breaking_prior(15, 1.0, base, rng);
  const MixtureDensity dens(state);
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd x(2);
    x << rng.normal(), rng.normal();
    const Eigen::VectorXd p = rejaug::allocation_probs(dens, x);
    CHECK(p.minCoeff() >= 0.0);
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("heavily occupied component follows its conjugate conditional") {
  // Truncation level 1 forces every point into one component, exposing the
  // normal-inverse-Wishart update directly.
  RngStream rng(78);
  NormalInverseWishart base;
  base.mu0 = Eigen::VectorXd::Zero(2);
  base.lambda0 = 0.01;
  base.psi = 0.1 * Eigen::MatrixXd::Identity(2, 2);
  base.nu = 4.0;

  Eigen::VectorXd truth(2);
  truth << 1.5, -0.5;
  std::vector<Eigen::VectorXd> data;
  Eigen::VectorXd xbar = Eigen::VectorXd::Zero(2);
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x(2);
    x << truth[0] + 0.3 * rng.normal(), truth[1] + 0.3 * rng.normal();
    data.push_back(x);
    xbar += x / n;
  }

  auto state = rejaug::sample_stick_breaking_prior(1, 1.0, base, rng);
  rejaug::SweepInfo info;
  Eigen::VectorXd mean_of_means = Eigen::VectorXd::Zero(2);
  double cov00 = 0.0;
  const int sweeps = 200;
  for (int s = 0; s < sweeps; ++s) {
    state = rejaug::blocked_gibbs_sweep(state, data, rng, &info);
    mean_of_means += state.components[0].mean / sweeps;
    cov00 += state.components[0].cov(0, 0) / sweeps;
    Eigen::LLT<Eigen::MatrixXd> llt(state.components[0].cov);
    CHECK(llt.info() == Eigen::Success);
  }
  CHECK(info.counts[0] == n);
  // Posterior mean of the component mean is (lambda0 mu0 + n xbar)/(lambda0+n),
  // within a few posterior standard deviations ~ 0.3/sqrt(n).
  const Eigen::VectorXd post_mean = (base.lambda0 * base.mu0 + n * xbar) / (base.lambda0 + n);
  CHECK((mean_of_means - post_mean).norm() < 3.0 * 0.3 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(cov00 - 0.09) < 0.02);
}

TEST_CASE("observations plus rejections complete the untruncated mixture") {
  // At fixed parameters, X union Y is a sample from the untruncated mixture:
  // first and second moments of the completed data match it.
  RngStream rng(82);
  StickBreakingState st;
  st.weights = Eigen::VectorXd(2);
  st.weights << 0.6, 0.4;
  st.components.push_back({vec1(0.2), 0.09 * Eigen::MatrixXd::Identity(1, 1)});
  st.components.push_back({vec1(0.9), 0.04 * Eigen::MatrixXd::Identity(1, 1)});
  st.alpha = 1.0;
  st.base.mu0 = vec1(0.5);
  st.base.psi = Eigen::MatrixXd::Identity(1, 1);
  st.base.nu = 3.0;
  TruncationRegion region{vec1(0.0), vec1(1.0)};
  const auto model = rejaug::truncated_mixture_model(st, region);

  // Observations from the truncated law, rejected sets refreshed repeatedly.
  std::vector<Eigen::VectorXd> obs;
  while (obs.size() < 200) {
    const auto draw = rejaug::sample_with_rejections(model, rng);
    obs.push_back(draw.accepted);
  }
  double sum = 0.0, sum2 = 0.0;
  std::size_t count = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const auto sets = rejaug::resample_rejected(model, obs.size(), rng);
    for (const auto& x : obs) {
      sum += x[0];
      sum2 += x[0] * x[0];
    }
    for (const auto& batch : sets)
      for (const auto& y : batch) {
        sum += y[0];
        sum2 += y[0] * y[0];
      }
    count += obs.size();
    for (const auto& batch : sets) count += batch.size();
  }
  const double mean = sum / static_cast<double>(count);
  const double second = sum2 / static_cast<double>(count);
  // Untruncated mixture moments.
  const double m_true = 0.6 * 0.2 + 0.4 * 0.9;
  const double s_true = 0.6 * (0.09 + 0.04) + 0.4 * (0.04 + 0.81);
  CHECK(mean == doctest::Approx(m_true).epsilon(0.02));
  CHECK(second == doctest::Approx(s_true).epsilon(0.03));
}

TEST_CASE("whole-space region reduces to standard blocked Gibbs") {
  RngStream rng(79);
  NormalInverseWishart base;
  base.mu0 = Eigen::VectorXd::Zero(1);
  base.lambda0 = 0.01;
  base.psi = 0.1 * Eigen::MatrixXd::Identity(1, 1);
  base.nu = 3.0;

  std::vector<Eigen::VectorXd> data;
  for (int i = 0; i < 100; ++i) data.push_back(vec1(0.3 * rng.normal()));

  rejaug::MixtureFitConfig config;
  config.iterations = 100;
  config.burn_in = 20;
  config.truncation = 10;
  config.base = base;
  config.grid_size = 0;
  auto result =
      rejaug::fit_truncated_dpmm(data, TruncationRegion::whole_space(1), config, rng);
  for (int v : result.trace.aug_sizes) CHECK(v == 0);
}

TEST_CASE("augmentation count is stationary after burn-in") {
  RngStream rng(80);
  std::vector<Eigen::VectorXd> data;
  // Mass near the left edge of [0,1] so rejections actually occur.
  while (data.size() < 120) {
    const double x = 0.08 + 0.1 * rng.normal();
    if (x >= 0.0 && x <= 1.0) data.push_back(vec1(x));
  }
  rejaug::MixtureFitConfig config;
  config.iterations = 400;
  config.burn_in = 100;
  config.truncation = 15;
  config.grid_size = 0;
  TruncationRegion region{vec1(0.0), vec1(1.0)};
  auto result = rejaug::fit_truncated_dpmm(data, region, config, rng);

  // Geweke-style half comparison on the post-burn-in augmentation counts.
  const int start = config.burn_in;
  const int half = (config.iterations - start) / 2;
  Eigen::VectorXd first(half), second(half);
  for (int i = 0; i < half; ++i) {
    first[i] = result.trace.aug_sizes[static_cast<std::size_t>(start + i)];
    second[i] = result.trace.aug_sizes[static_cast<std::size_t>(start + half + i)];
  }
  const double e1 = rejaug::effective_sample_size(first).ess;
  const double e2 = rejaug::effective_sample_size(second).ess;
  const double v1 = (first.array() - first.mean()).square().sum() / (half - 1);
  const double v2 = (second.array() - second.mean()).square().sum() / (half - 1);
  const double z = (first.mean() - second.mean()) / std::sqrt(v1 / e1 + v2 / e2);
  CHECK(std::abs(z) < 3.0);
  // Rejections are actually happening in this configuration.
  CHECK(first.mean() > 1.0);
}

TEST_CASE("fit validates inputs") {
  RngStream rng(81);
  TruncationRegion region{vec1(0.0), vec1(1.0)};
  rejaug::MixtureFitConfig config;
  CHECK_THROWS_AS(rejaug::fit_truncated_dpmm({}, region, config, rng), std::invalid_argument);
  CHECK_THROWS_AS(rejaug::fit_truncated_dpmm({vec1(2.0)}, region, config, rng),
                  std::invalid_argument);
  // Unbounded region without an explicit base is rejected.
  CHECK_THROWS_AS(
      rejaug::fit_truncated_dpmm({vec1(0.5)}, TruncationRegion::whole_space(1), config, rng),
      std::invalid_argument);
}
