#pragma once

#include <rejaug/rejection.hpp>
#include <rejaug/rng.hpp>
#include <rejaug/trace.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

// Gaussian process density sampler: the random density is proportional to
// g0(x) sigma(f(x)) with f drawn from a GP. Generation is rejection sampling
// from g0 with acceptance sigma(f), evaluating f retrospectively; inference
// augments the observations with the rejected proposals, turning the f-update
// into a GP classification problem.

namespace rejaug {

struct SquaredExponentialKernel {
  double variance = 1.0;
  double length_scale = 1.0;

  double operator()(double a, double b) const {
    const double r = (a - b) / length_scale;
    return variance * std::exp(-0.5 * r * r);
  }
};

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double log_logistic(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

// Scalar-input Gaussian process evaluated lazily at a growing set of
// locations, with an incrementally extended Cholesky factor. Locations closer
// than 1e-9 are coalesced to keep the factor well conditioned.
class GpSurface {
public:
  explicit GpSurface(SquaredExponentialKernel kernel, double mean = 0.0, double jitter = 1e-8)
      : kernel_(kernel), mean_(mean), jitter_(jitter) {}

  static GpSurface build(SquaredExponentialKernel kernel, double mean,
                         const std::vector<double>& locations, const Eigen::VectorXd& values,
                         double jitter = 1e-8) {
    if (static_cast<Eigen::Index>(locations.size()) != values.size())
      throw std::invalid_argument("GpSurface::build: location/value mismatch");
    GpSurface s(kernel, mean, jitter);
    const auto n = static_cast<Eigen::Index>(locations.size());
    if (n == 0) return s;
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j <= i; ++j)
        k(i, j) = k(j, i) = kernel(locations[static_cast<std::size_t>(i)],
                                   locations[static_cast<std::size_t>(j)]);
    k.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() != Eigen::Success)
      throw NumericalError("GpSurface: kernel matrix not positive definite after jitter");
    s.xs_ = locations;
    s.values_ = values;
    s.chol_ = Eigen::MatrixXd::Zero(n, n);
    s.chol_ = llt.matrixL();
    s.size_ = n;
    s.whitened_ = Eigen::VectorXd::Zero(n);
    s.whitened_dirty_ = true;
    return s;
  }

  Eigen::Index size() const { return size_; }
  const std::vector<double>& locations() const { return xs_; }
  Eigen::VectorXd values() const { return values_.head(size_); }
  const SquaredExponentialKernel& kernel() const { return kernel_; }
  double mean_function() const { return mean_; }

  struct Conditional {
    double mean = 0.0;
    double variance = 0.0;
    Eigen::Index duplicate_of = -1;  // >= 0 when x coincides with a stored location
  };

  Conditional conditional(double x) const {
    for (std::size_t i = 0; i < xs_.size(); ++i)
      if (std::abs(x - xs_[i]) < 1e-9)
        return {values_[static_cast<Eigen::Index>(i)], 0.0, static_cast<Eigen::Index>(i)};
    if (size_ == 0) return {mean_, kernel_(x, x), -1};
    refresh_whitened();
    const Eigen::VectorXd l = solve_lower(cross_covariance(x));
    const double var = std::max(0.0, kernel_(x, x) + jitter_ - l.squaredNorm());
    return {mean_ + l.dot(whitened_.head(size_)), var, -1};
  }

  // Joint conditional over a batch of new points (duplicates not handled;
  // callers pass fresh grids).
  void conditional_joint(const Eigen::VectorXd& points, Eigen::VectorXd* mean_out,
                         Eigen::MatrixXd* cov_out) const {
    const auto m = points.size();
    Eigen::MatrixXd kgg(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j <= i; ++j)
        kgg(i, j) = kgg(j, i) = kernel_(points[i], points[j]);
    if (size_ == 0) {
      *mean_out = Eigen::VectorXd::Constant(m, mean_);
      *cov_out = kgg;
      return;
    }
    refresh_whitened();
    Eigen::MatrixXd kxg(size_, m);
    for (Eigen::Index i = 0; i < size_; ++i)
      for (Eigen::Index j = 0; j < m; ++j)
        kxg(i, j) = kernel_(xs_[static_cast<std::size_t>(i)], points[j]);
    const Eigen::MatrixXd v = solve_lower_matrix(kxg);
    *mean_out = Eigen::VectorXd::Constant(m, mean_) + v.transpose() * whitened_.head(size_);
    *cov_out = kgg - v.transpose() * v;
  }

  // Draw f(x) given all current evaluations and remember it. One triangular
  // solve covers mean, variance, the new factor row, and the whitened-value
  // extension, so retrospective generation costs one O(n^2) pass per
  // proposal.
  double sample_value(double x, RngStream& rng) {
    for (std::size_t i = 0; i < xs_.size(); ++i)
      if (std::abs(x - xs_[i]) < 1e-9) return values_[static_cast<Eigen::Index>(i)];
    refresh_whitened();
    double mean = mean_;
    double var = kernel_(x, x) + jitter_;
    Eigen::VectorXd l;
    if (size_ > 0) {
      l = solve_lower(cross_covariance(x));
      mean += l.dot(whitened_.head(size_));
      var = std::max(0.0, var - l.squaredNorm());
    }
    const double value = mean + std::sqrt(var) * rng.normal();
    append_factored(x, value, l, var);
    return value;
  }

  void append(double x, double value) {
    refresh_whitened();
    Eigen::VectorXd l;
    double resid = kernel_(x, x) + jitter_;
    if (size_ > 0) {
      l = solve_lower(cross_covariance(x));
      resid -= l.squaredNorm();
    }
    append_factored(x, value, l, std::max(resid, 0.0));
  }

  void set_values(const Eigen::VectorXd& v) {
    if (v.size() != size_) throw std::invalid_argument("GpSurface::set_values: length mismatch");
    values_.head(size_) = v;
    whitened_dirty_ = true;
  }

  Eigen::VectorXd prior_draw(RngStream& rng) const {
    Eigen::VectorXd z(size_);
    for (Eigen::Index i = 0; i < size_; ++i) z[i] = rng.normal();
    return Eigen::VectorXd::Constant(size_, mean_) +
           chol_.topLeftCorner(size_, size_).triangularView<Eigen::Lower>() * z;
  }

  Eigen::MatrixXd chol_lower() const { return chol_.topLeftCorner(size_, size_); }

  double log_prior(const Eigen::VectorXd& v) const {
    const Eigen::VectorXd z = solve_lower(v - Eigen::VectorXd::Constant(size_, mean_));
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < size_; ++i) log_det += std::log(chol_(i, i));
    return -0.5 * z.squaredNorm() - log_det - 0.5 * size_ * std::log(2.0 * std::numbers::pi);
  }

private:
  Eigen::VectorXd solve_lower(const Eigen::VectorXd& b) const {
    return chol_.topLeftCorner(size_, size_).triangularView<Eigen::Lower>().solve(b);
  }

  Eigen::MatrixXd solve_lower_matrix(const Eigen::MatrixXd& b) const {
    return chol_.topLeftCorner(size_, size_).triangularView<Eigen::Lower>().solve(b);
  }

  Eigen::VectorXd cross_covariance(double x) const {
    Eigen::VectorXd k(size_);
    for (Eigen::Index i = 0; i < size_; ++i) k[i] = kernel_(xs_[static_cast<std::size_t>(i)], x);
    return k;
  }

  void ensure_capacity(Eigen::Index n) {
    if (chol_.rows() >= n) return;
    const Eigen::Index cap = std::max<Eigen::Index>(n, chol_.rows() * 3 / 2 + 16);
    Eigen::MatrixXd grown = Eigen::MatrixXd::Zero(cap, cap);
    grown.topLeftCorner(size_, size_) = chol_.topLeftCorner(size_, size_);
    chol_.swap(grown);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(cap);
    v.head(size_) = values_.head(size_);
    values_.swap(v);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(cap);
    w.head(size_) = whitened_.head(size_);
    whitened_.swap(w);
  }

  // Extend factor, values, and whitened vector with a point whose solved
  // cross term l and residual variance are already known.
  void append_factored(double x, double value, const Eigen::VectorXd& l, double resid) {
    ensure_capacity(size_ + 1);
    const double diag = std::sqrt(std::max(resid, 1e-12));
    double proj = 0.0;
    if (size_ > 0) {
      chol_.block(size_, 0, 1, size_) = l.transpose();
      proj = l.dot(whitened_.head(size_));
    }
    chol_(size_, size_) = diag;
    xs_.push_back(x);
    values_[size_] = value;
    whitened_[size_] = (value - mean_ - proj) / diag;
    ++size_;
  }

  void refresh_whitened() const {
    if (!whitened_dirty_) return;
    whitened_.conservativeResize(std::max<Eigen::Index>(values_.size(), size_));
    whitened_.head(size_) =
        solve_lower(values_.head(size_) - Eigen::VectorXd::Constant(size_, mean_));
    whitened_dirty_ = false;
  }

  SquaredExponentialKernel kernel_;
  double mean_ = 0.0;
  double jitter_ = 1e-8;
  std::vector<double> xs_;
  Eigen::VectorXd values_;
  Eigen::MatrixXd chol_;
  Eigen::Index size_ = 0;
  mutable Eigen::VectorXd whitened_;  // L^{-1}(values - mean)
  mutable bool whitened_dirty_ = true;
};

struct GpdsGenerateResult {
  std::vector<double> accepted;
  std::vector<double> rejected;
  Eigen::VectorXd f_accepted;
  Eigen::VectorXd f_rejected;
  std::uint64_t proposals = 0;
};

// Rejection-sample n points from the density proportional to
// g0(x) sigma(f(x)): propose from g0 = N(g0_mean, g0_sd^2), evaluate f
// retrospectively, accept with sigma(f). Matches the generic contract with
// q = g0 and envelope M = 1.
inline GpdsGenerateResult gpds_generate(GpSurface& surface, double g0_mean, double g0_sd, int n,
                                        RngStream& rng,
                                        std::uint64_t max_attempts = kDefaultMaxAttempts) {
  if (n < 1) throw std::invalid_argument("gpds_generate: need n >= 1");
  GpdsGenerateResult out;
  std::vector<double> fa, fr;
  for (std::uint64_t attempt = 0; static_cast<int>(out.accepted.size()) < n; ++attempt) {
    if (attempt >= max_attempts) throw MaxAttemptsError(max_attempts);
    const double y = g0_mean + g0_sd * rng.normal();
    const double fy = surface.sample_value(y, rng);
    ++out.proposals;
    if (std::log(rng.uniform_pos()) < log_logistic(fy)) {
      out.accepted.push_back(y);
      fa.push_back(fy);
    } else {
      out.rejected.push_back(y);
      fr.push_back(fy);
    }
  }
  out.f_accepted = Eigen::Map<const Eigen::VectorXd>(fa.data(), static_cast<Eigen::Index>(fa.size()));
  out.f_rejected = Eigen::Map<const Eigen::VectorXd>(fr.data(), static_cast<Eigen::Index>(fr.size()));
  return out;
}

// Classification log likelihood: the first n_accepted surface values carry
// sigma(f), the remainder 1 - sigma(f).
inline double classification_loglik(const Eigen::VectorXd& f, Eigen::Index n_accepted) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i)
    total += i < n_accepted ? log_logistic(f[i]) : log_logistic(-f[i]);
  return total;
}

// One elliptical slice transition targeting exp(loglik) against the GP prior
// over the surface's current locations. Always moves to an accepted point.
template <class LogLik>
void elliptical_slice_update(GpSurface& surface, const LogLik& loglik, RngStream& rng) {
  const Eigen::VectorXd f = surface.values();
  const Eigen::VectorXd nu = surface.prior_draw(rng);
  const Eigen::VectorXd mean = Eigen::VectorXd::Constant(f.size(), surface.mean_function());
  const double log_y = loglik(f) + std::log(rng.uniform_pos());
  double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
  double lo = theta - 2.0 * std::numbers::pi;
  double hi = theta;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::VectorXd proposal =
        mean + (f - mean) * std::cos(theta) + (nu - mean) * std::sin(theta);
    if (loglik(proposal) > log_y) {
      surface.set_values(proposal);
      return;
    }
    (theta < 0.0 ? lo : hi) = theta;
    theta = rng.uniform(lo, hi);
  }
  throw NumericalError("elliptical_slice_update: bracket failed to shrink");
}

inline void update_latent_f(GpSurface& surface, Eigen::Index n_accepted, RngStream& rng) {
  elliptical_slice_update(
      surface, [n_accepted](const Eigen::VectorXd& f) { return classification_loglik(f, n_accepted); },
      rng);
}

// Hamiltonian alternative to the slice update, run in whitened coordinates
// u = L^{-1}(f - m) so the prior is unit normal. Kept behind configuration.
inline bool hmc_update_latent_f(GpSurface& surface, Eigen::Index n_accepted, double step_size,
                                int leapfrog_steps, RngStream& rng) {
  const Eigen::Index n = surface.size();
  const Eigen::MatrixXd l = surface.chol_lower();
  const Eigen::VectorXd mean = Eigen::VectorXd::Constant(n, surface.mean_function());
  const auto to_f = [&](const Eigen::VectorXd& u) -> Eigen::VectorXd { return mean + l * u; };
  const auto grad_loglik = [&](const Eigen::VectorXd& f) {
    Eigen::VectorXd g(n);
    for (Eigen::Index i = 0; i < n; ++i)
      g[i] = i < n_accepted ? logistic(-f[i]) : -logistic(f[i]);
    return g;
  };
  const auto potential = [&](const Eigen::VectorXd& u) {
    return 0.5 * u.squaredNorm() - classification_loglik(to_f(u), n_accepted);
  };
  const auto grad_potential = [&](const Eigen::VectorXd& u) -> Eigen::VectorXd {
    return u - l.transpose() * grad_loglik(to_f(u));
  };

  Eigen::VectorXd u =
      l.triangularView<Eigen::Lower>().solve(surface.values() - mean);
  Eigen::VectorXd p(n);
  for (Eigen::Index i = 0; i < n; ++i) p[i] = rng.normal();
  const double h0 = potential(u) + 0.5 * p.squaredNorm();
  p -= 0.5 * step_size * grad_potential(u);
  for (int lf = 1; lf <= leapfrog_steps; ++lf) {
    u += step_size * p;
    p -= (lf == leapfrog_steps ? 0.5 : 1.0) * step_size * grad_potential(u);
  }
  const double h1 = potential(u) + 0.5 * p.squaredNorm();
  if (std::isfinite(h1) && std::log(rng.uniform_pos()) < h0 - h1) {
    surface.set_values(to_f(u));
    return true;
  }
  return false;
}

struct GpdsConfig {
  int iterations = 2000;
  int burn_in = 500;
  SquaredExponentialKernel kernel{1.0, 1.0};
  // Normal-inverse-gamma prior on (mu, sigma^2) of the base density,
  // parametrized (mean, precision scale, shape, scale).
  double nig_m = 0.0;
  double nig_lambda = 0.1;
  double nig_a = 1.0;
  double nig_b = 10.0;
  bool update_base_hypers = true;
  double init_mu = std::numeric_limits<double>::quiet_NaN();      // default: data mean
  double init_sigma2 = std::numeric_limits<double>::quiet_NaN();  // default: data variance
  int f_sweeps = 3;              // slice (or HMC) transitions per iteration
  bool use_hmc_f = false;
  double f_step_size = 0.1;
  int f_leapfrog = 10;
  double hyper_proposal_sd = 0.25;  // random walk on (mu, log sigma^2)
  bool update_gp_hypers = false;
  double gp_hyper_sd = 0.3;         // random walk on (log variance, log length-scale)
  int grid_size = 1024;
  int tail_points = 160;  // normalization support on each side of the grid
  int snapshot_every = 10;
  std::uint64_t max_attempts = kDefaultMaxAttempts;
};

struct GpdsFitResult {
  ChainTrace trace;          // mu, sigma2, gp_variance, gp_length_scale
  Eigen::VectorXd grid;      // reporting grid
  Eigen::MatrixXd density_snapshots;  // snapshots x grid, each normalized
  Eigen::MatrixXd f_snapshots;        // latent-function draws on the grid
  Eigen::VectorXd mean_density;
  Eigen::VectorXd density_q10, density_q50, density_q90;
};

namespace detail {

inline double log_nig_prior(double mu, double sigma2, const GpdsConfig& c) {
  if (!(sigma2 > 0.0)) return kNegInf;
  const double inv_gamma = c.nig_a * std::log(c.nig_b) - std::lgamma(c.nig_a) -
                           (c.nig_a + 1.0) * std::log(sigma2) - c.nig_b / sigma2;
  const double normal = -0.5 * std::log(2.0 * std::numbers::pi * sigma2 / c.nig_lambda) -
                        0.5 * c.nig_lambda * (mu - c.nig_m) * (mu - c.nig_m) / sigma2;
  return inv_gamma + normal;
}

inline double log_normal_sum(const std::vector<double>& xs, double mu, double sigma2) {
  const double c = -0.5 * std::log(2.0 * std::numbers::pi * sigma2);
  double total = 0.0;
  for (double x : xs) total += c - 0.5 * (x - mu) * (x - mu) / sigma2;
  return total;
}

inline Eigen::VectorXd column_quantile(const Eigen::MatrixXd& m, double q) {
  Eigen::VectorXd out(m.cols());
  std::vector<double> buf(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) buf[static_cast<std::size_t>(i)] = m(i, j);
    std::sort(buf.begin(), buf.end());
    const double pos = q * (static_cast<double>(buf.size()) - 1.0);
    const auto leftIdx = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(leftIdx);
    out[j] = leftIdx + 1 < buf.size() ? (1.0 - frac) * buf[leftIdx] + frac * buf[leftIdx + 1]
                                      : buf[leftIdx];
  }
  return out;
}

}  // namespace detail

// One Markov chain iteration per the augmented scheme: regenerate the
// rejected proposals retrospectively, refresh the latent function on
// observations plus rejections, then move the base-density and (optionally)
// kernel hyperparameters.
inline GpdsFitResult fit_gpds(const std::vector<double>& observations, const GpdsConfig& config,
                              RngStream& rng) {
  if (observations.empty()) throw std::invalid_argument("fit_gpds: no observations");
  const auto n = static_cast<Eigen::Index>(observations.size());

  double data_mean = 0.0, data_sq = 0.0;
  double lo = observations.front(), hi = observations.front();
  for (double x : observations) {
    data_mean += x;
    data_sq += x * x;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  data_mean /= static_cast<double>(n);
  const double data_sd =
      std::sqrt(std::max(1e-12, data_sq / static_cast<double>(n) - data_mean * data_mean));

  double mu = std::isnan(config.init_mu) ? data_mean : config.init_mu;
  double sigma2 = std::isnan(config.init_sigma2) ? data_sd * data_sd : config.init_sigma2;
  SquaredExponentialKernel kernel = config.kernel;

  // Reporting grid: data range padded by three base standard deviations;
  // extra tail points extend the quadrature support for the normalizer.
  const Eigen::Index g = config.grid_size;
  const double pad = 3.0 * data_sd;
  Eigen::VectorXd grid(g);
  for (Eigen::Index i = 0; i < g; ++i)
    grid[i] = (lo - pad) + (hi + pad - (lo - pad)) * static_cast<double>(i) / (g - 1.0);
  const Eigen::Index t = config.tail_points;
  Eigen::VectorXd extended(g + 2 * t);
  const double far = 8.0 * data_sd;
  for (Eigen::Index i = 0; i < t; ++i) {
    extended[i] = (lo - pad - far) + far * static_cast<double>(i) / static_cast<double>(t);
    extended[g + t + i] = (hi + pad) + far * static_cast<double>(i + 1) / static_cast<double>(t);
  }
  extended.segment(t, g) = grid;

  GpdsFitResult result;
  result.grid = grid;
  result.trace.labels = {"mu", "sigma2", "gp_variance", "gp_length_scale"};
  result.trace.draws.resize(config.iterations, 4);
  result.trace.seconds.resize(static_cast<std::size_t>(config.iterations));
  result.trace.accepted.resize(static_cast<std::size_t>(config.iterations));
  result.trace.aug_sizes.resize(static_cast<std::size_t>(config.iterations));

  // Latent state: rejected locations and the function values at X then Y.
  std::vector<double> rejected;
  RngStream init_rng = rng.substream(0x6D5);
  GpSurface surface = GpSurface::build(kernel, 0.0, observations,
                                       Eigen::VectorXd::Zero(n), 1e-8);
  surface.set_values(surface.prior_draw(init_rng));

  std::vector<Eigen::VectorXd> density_rows, f_rows;

  for (int iter = 0; iter < config.iterations; ++iter) {
    RngStream iter_rng = rng.substream(static_cast<std::uint64_t>(iter) + 1);
    const auto t0 = std::chrono::steady_clock::now();

    // (1) Regenerate the rejected proposals, conditioning on the current
    // evaluations at X and the previous Y.
    const Eigen::VectorXd f_current = surface.values();
    GpdsGenerateResult gen =
        gpds_generate(surface, mu, std::sqrt(sigma2), static_cast<int>(n), iter_rng,
                      config.max_attempts);
    rejected = gen.rejected;

    // (2) Keep only X and the fresh Y; evaluations at pseudo-accepted points
    // and the old Y are discarded with their rows of the factor.
    std::vector<double> active = observations;
    active.insert(active.end(), rejected.begin(), rejected.end());
    Eigen::VectorXd values(active.size());
    values.head(n) = f_current.head(n);
    values.tail(static_cast<Eigen::Index>(rejected.size())) = gen.f_rejected;
    surface = GpSurface::build(kernel, 0.0, active, values, 1e-8);

    // (3) Latent-function transitions.
    for (int s = 0; s < config.f_sweeps; ++s) {
      if (config.use_hmc_f)
        hmc_update_latent_f(surface, n, config.f_step_size, config.f_leapfrog, iter_rng);
      else
        update_latent_f(surface, n, iter_rng);
    }

    // (4) Hyperparameters. Base density first: random walk on (mu, log s2)
    // against the augmented likelihood of all proposals, accepted or not.
    bool hyper_accepted = false;
    if (config.update_base_hypers) {
      const double mu_prop = mu + config.hyper_proposal_sd * iter_rng.normal();
      const double s2_prop = sigma2 * std::exp(config.hyper_proposal_sd * iter_rng.normal());
      double log_ratio = detail::log_nig_prior(mu_prop, s2_prop, config) -
                         detail::log_nig_prior(mu, sigma2, config) +
                         std::log(s2_prop) - std::log(sigma2);  // Jacobian of log scale
      log_ratio += detail::log_normal_sum(active, mu_prop, s2_prop) -
                   detail::log_normal_sum(active, mu, sigma2);
      if (std::log(iter_rng.uniform_pos()) < log_ratio) {
        mu = mu_prop;
        sigma2 = s2_prop;
        hyper_accepted = true;
      }
    }
    if (config.update_gp_hypers) {
      SquaredExponentialKernel prop = kernel;
      prop.variance = kernel.variance * std::exp(config.gp_hyper_sd * iter_rng.normal());
      prop.length_scale = kernel.length_scale * std::exp(config.gp_hyper_sd * iter_rng.normal());
      const GpSurface proposed =
          GpSurface::build(prop, 0.0, surface.locations(), surface.values(), 1e-8);
      // Weak lognormal priors centered at the configured kernel.
      const auto log_prior = [&](const SquaredExponentialKernel& k) {
        const double a = std::log(k.variance / config.kernel.variance);
        const double b = std::log(k.length_scale / config.kernel.length_scale);
        return -0.5 * (a * a + b * b) / (1.5 * 1.5);
      };
      const double log_ratio = proposed.log_prior(surface.values()) + log_prior(prop) -
                               (surface.log_prior(surface.values()) + log_prior(kernel));
      if (std::log(iter_rng.uniform_pos()) < log_ratio) {
        kernel = prop;
        surface = proposed;
      }
    }

    const auto t1 = std::chrono::steady_clock::now();
    result.trace.draws(iter, 0) = mu;
    result.trace.draws(iter, 1) = sigma2;
    result.trace.draws(iter, 2) = kernel.variance;
    result.trace.draws(iter, 3) = kernel.length_scale;
    result.trace.seconds[static_cast<std::size_t>(iter)] =
        std::chrono::duration<double>(t1 - t0).count();
    result.trace.accepted[static_cast<std::size_t>(iter)] = hyper_accepted ? 1 : 0;
    result.trace.aug_sizes[static_cast<std::size_t>(iter)] = static_cast<int>(rejected.size());

    // (5) Predictive snapshot: joint conditional draw of f on the extended
    // grid, then quadrature-normalized g0 sigma(f).
    if (iter >= config.burn_in && config.snapshot_every > 0 &&
        (iter - config.burn_in) % config.snapshot_every == 0) {
      Eigen::VectorXd fmean;
      Eigen::MatrixXd fcov;
      surface.conditional_joint(extended, &fmean, &fcov);
      fcov.diagonal().array() += 1e-8;
      Eigen::LLT<Eigen::MatrixXd> llt(fcov);
      if (llt.info() != Eigen::Success) throw NumericalError("fit_gpds: snapshot covariance");
      Eigen::VectorXd z(extended.size());
      for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = iter_rng.normal();
      const Eigen::VectorXd f_grid = fmean + Eigen::MatrixXd(llt.matrixL()) * z;

      Eigen::VectorXd unnorm(extended.size());
      for (Eigen::Index i = 0; i < extended.size(); ++i) {
        const double gx = std::exp(-0.5 * (extended[i] - mu) * (extended[i] - mu) / sigma2) /
                          std::sqrt(2.0 * std::numbers::pi * sigma2);
        unnorm[i] = gx * logistic(f_grid[i]);
      }
      double z_total = 0.0;
      for (Eigen::Index i = 0; i + 1 < extended.size(); ++i)
        z_total += 0.5 * (unnorm[i] + unnorm[i + 1]) * (extended[i + 1] - extended[i]);
      density_rows.push_back(unnorm.segment(t, g) / z_total);
      f_rows.push_back(f_grid.segment(t, g));
    }
  }

  const auto s = static_cast<Eigen::Index>(density_rows.size());
  result.density_snapshots.resize(s, g);
  result.f_snapshots.resize(s, g);
  for (Eigen::Index i = 0; i < s; ++i) {
    result.density_snapshots.row(i) = density_rows[static_cast<std::size_t>(i)].transpose();
    result.f_snapshots.row(i) = f_rows[static_cast<std::size_t>(i)].transpose();
  }
  if (s > 0) {
    result.mean_density = result.density_snapshots.colwise().mean();
    result.density_q10 = detail::column_quantile(result.density_snapshots, 0.10);
    result.density_q50 = detail::column_quantile(result.density_snapshots, 0.50);
    result.density_q90 = detail::column_quantile(result.density_snapshots, 0.90);
  }
  return result;
}

}  // namespace rejaug
