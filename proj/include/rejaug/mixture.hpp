#pragma once

#include <rejaug/rejection.hpp>
#include <rejaug/rng.hpp>
#include <rejaug/trace.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

// Dirichlet-process mixture of Gaussians truncated to a box, fit by blocked
// stick-breaking Gibbs on the completed data: the observations plus the
// rejected proposals of the truncation sampler (draw from the untruncated
// mixture, reject outside the box, envelope constant M = 1).

namespace rejaug {

struct NormalInverseWishart {
  Eigen::VectorXd mu0;
  double lambda0 = 0.01;
  Eigen::MatrixXd psi;
  double nu = 0.0;

  void validate(int d) const {
    if (mu0.size() != d || psi.rows() != d || psi.cols() != d)
      throw std::invalid_argument("NormalInverseWishart: dimension mismatch");
    if (!(lambda0 > 0.0)) throw std::invalid_argument("NormalInverseWishart: lambda0 must be > 0");
    if (!(nu > d - 1.0)) throw std::invalid_argument("NormalInverseWishart: need nu > d - 1");
  }
};

struct GaussianComponent {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

struct StickBreakingState {
  Eigen::VectorXd weights;  // truncation-level simplex
  std::vector<GaussianComponent> components;
  double alpha = 1.0;
  NormalInverseWishart base;

  int truncation() const { return static_cast<int>(weights.size()); }
  int dim() const { return static_cast<int>(base.mu0.size()); }
};

struct TruncationRegion {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  bool contains(const Eigen::VectorXd& x) const {
    return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
  }
  bool finite() const { return lower.allFinite() && upper.allFinite(); }
  Eigen::VectorXd center() const { return 0.5 * (lower + upper); }

  void validate(int d) const {
    if (lower.size() != d || upper.size() != d)
      throw std::invalid_argument("TruncationRegion: dimension mismatch");
    if (!(lower.array() < upper.array()).all())
      throw std::invalid_argument("TruncationRegion: lower must be below upper componentwise");
  }

  static TruncationRegion whole_space(int d) {
    const double inf = std::numeric_limits<double>::infinity();
    return {Eigen::VectorXd::Constant(d, -inf), Eigen::VectorXd::Constant(d, inf)};
  }
};

namespace detail {

struct CholeskyGaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd chol;  // lower factor of cov (+jitter if needed)
  double log_norm = 0.0;

  double log_density(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd z = chol.triangularView<Eigen::Lower>().solve(x - mean);
    return log_norm - 0.5 * z.squaredNorm();
  }
};

inline CholeskyGaussian make_chol_gaussian(const GaussianComponent& c, int* jitter_events) {
  const auto d = c.mean.size();
  Eigen::LLT<Eigen::MatrixXd> llt(c.cov);
  if (llt.info() != Eigen::Success) {
    llt.compute(c.cov + 1e-8 * Eigen::MatrixXd::Identity(d, d));
    if (jitter_events) ++*jitter_events;
    if (llt.info() != Eigen::Success)
      throw NumericalError("mixture component covariance is not positive definite");
  }
  CholeskyGaussian out;
  out.mean = c.mean;
  out.chol = llt.matrixL();
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) log_det += std::log(out.chol(i, i));
  out.log_norm = -0.5 * d * std::log(2.0 * std::numbers::pi) - log_det;
  return out;
}

}  // namespace detail

// Mixture density with per-component Cholesky factors cached.
class MixtureDensity {
public:
  explicit MixtureDensity(const StickBreakingState& state, int* jitter_events = nullptr) {
    log_weights_.resize(state.weights.size());
    for (Eigen::Index k = 0; k < state.weights.size(); ++k)
      log_weights_[k] = state.weights[k] > 0.0 ? std::log(state.weights[k]) : kNegInf;
    for (const auto& c : state.components)
      gaussians_.push_back(detail::make_chol_gaussian(c, jitter_events));
  }

  Eigen::VectorXd component_log_densities(const Eigen::VectorXd& x) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(gaussians_.size()));
    for (std::size_t k = 0; k < gaussians_.size(); ++k)
      out[static_cast<Eigen::Index>(k)] = gaussians_[k].log_density(x);
    return out;
  }

  // log density of the untruncated mixture.
  double log_density(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd comp = component_log_densities(x);
    double total = kNegInf;
    for (Eigen::Index k = 0; k < comp.size(); ++k)
      total = log_add_exp(total, log_weights_[k] + comp[k]);
    return total;
  }

  const Eigen::VectorXd& log_weights() const { return log_weights_; }
  const detail::CholeskyGaussian& gaussian(std::size_t k) const { return gaussians_[k]; }

private:
  Eigen::VectorXd log_weights_;
  std::vector<detail::CholeskyGaussian> gaussians_;
};

// The truncated mixture expressed through the generic rejection contract:
// target f = mixture * indicator(box), proposal q = untruncated mixture,
// envelope M = 1, so the acceptance probability is exactly the indicator.
struct TruncatedMixtureModel {
  using Point = Eigen::VectorXd;

  Eigen::VectorXd weights;
  MixtureDensity density;
  TruncationRegion region;

  double log_f(const Eigen::VectorXd& x) const {
    return region.contains(x) ? density.log_density(x) : kNegInf;
  }
  double log_q(const Eigen::VectorXd& x) const { return density.log_density(x); }
  double log_envelope() const { return 0.0; }

  Eigen::VectorXd propose(RngStream& rng) const {
    double u = rng.uniform();
    Eigen::Index k = weights.size() - 1;
    for (Eigen::Index j = 0; j < weights.size(); ++j) {
      if (u < weights[j]) {
        k = j;
        break;
      }
      u -= weights[j];
    }
    const auto& g = density.gaussian(static_cast<std::size_t>(k));
    Eigen::VectorXd z(g.mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    return g.mean + g.chol.triangularView<Eigen::Lower>() * z;
  }
};

inline TruncatedMixtureModel truncated_mixture_model(const StickBreakingState& state,
                                                     const TruncationRegion& region) {
  region.validate(state.dim());
  return {state.weights, MixtureDensity(state), region};
}

// Bartlett draw: Sigma^{-1} ~ Wishart(psi^{-1}, nu), returned as Sigma.
inline Eigen::MatrixXd sample_inverse_wishart(const Eigen::MatrixXd& psi, double nu,
                                              RngStream& rng) {
  const auto d = psi.rows();
  if (!(nu > d - 1.0)) throw std::domain_error("sample_inverse_wishart: need nu > d - 1");
  Eigen::LLT<Eigen::MatrixXd> llt(psi.inverse());
  if (llt.info() != Eigen::Success)
    throw NumericalError("sample_inverse_wishart: psi is not positive definite");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    a(i, i) = std::sqrt(rng.chi_squared(nu - static_cast<double>(i)));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  const Eigen::MatrixXd m = llt.matrixL() * a;  // W = m m^T ~ Wishart(psi^{-1}, nu)
  const Eigen::MatrixXd minv =
      m.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(d, d));
  return minv.transpose() * minv;  // (m m^T)^{-1}
}

inline GaussianComponent sample_niw(const NormalInverseWishart& base, RngStream& rng) {
  GaussianComponent c;
  c.cov = sample_inverse_wishart(base.psi, base.nu, rng);
  Eigen::LLT<Eigen::MatrixXd> llt(c.cov);
  Eigen::VectorXd z(base.mu0.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  c.mean = base.mu0 + Eigen::MatrixXd(llt.matrixL()) * z / std::sqrt(base.lambda0);
  return c;
}

// Stick-breaking prior draw at truncation level K.
inline StickBreakingState sample_stick_breaking_prior(int truncation, double alpha,
                                                      const NormalInverseWishart& base,
                                                      RngStream& rng) {
  StickBreakingState state;
  state.alpha = alpha;
  state.base = base;
  state.weights.resize(truncation);
  double remaining = 1.0;
  for (int k = 0; k < truncation; ++k) {
    const double v = (k + 1 == truncation) ? 1.0 : rng.beta(1.0, alpha);
    state.weights[k] = v * remaining;
    remaining *= (1.0 - v);
    state.components.push_back(sample_niw(base, rng));
  }
  return state;
}

// Normalized allocation probabilities of one point (exposed for testing).
inline Eigen::VectorXd allocation_probs(const MixtureDensity& density, const Eigen::VectorXd& x) {
  Eigen::VectorXd lp = density.log_weights() + density.component_log_densities(x);
  const double m = lp.maxCoeff();
  Eigen::VectorXd p = (lp.array() - m).exp();
  return p / p.sum();
}

struct SweepInfo {
  Eigen::VectorXi counts;  // allocation counts per component
  int jitter_events = 0;
};

// One sweep of the blocked sampler on completed (untruncated) data:
// allocations given (weights, components); stick fractions
// Beta(1 + n_k, alpha + n_{>k}); components from normal-inverse-Wishart
// conditionals.
inline StickBreakingState blocked_gibbs_sweep(const StickBreakingState& state,
                                              const std::vector<Eigen::VectorXd>& completed,
                                              RngStream& rng, SweepInfo* info = nullptr) {
  const int K = state.truncation();
  const int d = state.dim();
  state.base.validate(d);

  int jitter_events = 0;
  const MixtureDensity density(state, &jitter_events);

  // Allocations.
  std::vector<int> counts(static_cast<std::size_t>(K), 0);
  std::vector<Eigen::VectorXd> sums(static_cast<std::size_t>(K), Eigen::VectorXd::Zero(d));
  std::vector<Eigen::MatrixXd> scatters(static_cast<std::size_t>(K), Eigen::MatrixXd::Zero(d, d));
  for (const auto& x : completed) {
    const Eigen::VectorXd probs = allocation_probs(density, x);
    double u = rng.uniform();
    int k = K - 1;
    for (int j = 0; j < K; ++j) {
      if (u < probs[j]) {
        k = j;
        break;
      }
      u -= probs[j];
    }
    counts[static_cast<std::size_t>(k)] += 1;
    sums[static_cast<std::size_t>(k)] += x;
    scatters[static_cast<std::size_t>(k)] += x * x.transpose();
  }

  StickBreakingState next = state;

  // Stick weights.
  double remaining = 1.0;
  int tail = 0;
  for (int k = 0; k < K; ++k) tail += counts[static_cast<std::size_t>(k)];
  for (int k = 0; k < K; ++k) {
    tail -= counts[static_cast<std::size_t>(k)];
    const double v = (k + 1 == K)
                         ? 1.0
                         : rng.beta(1.0 + counts[static_cast<std::size_t>(k)], state.alpha + tail);
    next.weights[k] = v * remaining;
    remaining *= (1.0 - v);
  }

  // Components.
  for (int k = 0; k < K; ++k) {
    const int m = counts[static_cast<std::size_t>(k)];
    if (m == 0) {
      next.components[static_cast<std::size_t>(k)] = sample_niw(state.base, rng);
      continue;
    }
    const Eigen::VectorXd xbar = sums[static_cast<std::size_t>(k)] / m;
    const Eigen::MatrixXd centered_scatter =
        scatters[static_cast<std::size_t>(k)] - m * xbar * xbar.transpose();
    const auto& b = state.base;
    NormalInverseWishart post;
    post.lambda0 = b.lambda0 + m;
    post.mu0 = (b.lambda0 * b.mu0 + m * xbar) / post.lambda0;
    post.nu = b.nu + m;
    const Eigen::VectorXd dev = xbar - b.mu0;
    post.psi = b.psi + centered_scatter + (b.lambda0 * m / post.lambda0) * dev * dev.transpose();
    next.components[static_cast<std::size_t>(k)] = sample_niw(post, rng);
  }

  if (info) {
    info->counts = Eigen::Map<const Eigen::VectorXi>(counts.data(), K);
    info->jitter_events = jitter_events;
  }
  return next;
}

struct MixtureFitConfig {
  int iterations = 1000;
  int burn_in = 200;  // excluded from the density average, included in the trace
  int truncation = 50;
  double alpha = 1.0;
  NormalInverseWishart base;  // empty mu0 = derive from the region
  int grid_size = 100;        // per-axis density grid (d <= 2), 0 disables
  Eigen::VectorXd grid_lower;  // empty = region bounds
  Eigen::VectorXd grid_upper;
  std::uint64_t max_attempts = kDefaultMaxAttempts;
};

struct MixtureFitResult {
  ChainTrace trace;             // columns: occupied, weight_1..weight_K
  Eigen::MatrixXd grid_points;  // (grid_size^d) x d
  Eigen::VectorXd mean_density;      // posterior mean of the mixture density
  Eigen::VectorXd mean_log_density;  // posterior mean of the log density
  int averaged_iterations = 0;
};

inline NormalInverseWishart default_niw_base(const TruncationRegion& region, int d) {
  if (!region.finite())
    throw std::invalid_argument(
        "fit_truncated_dpmm: supply a NIW base explicitly when the region is unbounded");
  NormalInverseWishart base;
  base.mu0 = region.center();
  base.lambda0 = 0.01;
  base.psi = 0.1 * Eigen::MatrixXd::Identity(d, d);
  base.nu = d + 2.0;
  return base;
}

// Alternate (1) conditional resampling of the rejected proposals under the
// current mixture with (2) a blocked sweep on observations plus rejections.
inline MixtureFitResult fit_truncated_dpmm(const std::vector<Eigen::VectorXd>& observations,
                                           const TruncationRegion& region,
                                           const MixtureFitConfig& config, RngStream& rng) {
  if (observations.empty()) throw std::invalid_argument("fit_truncated_dpmm: no observations");
  const int d = static_cast<int>(observations.front().size());
  region.validate(d);
  for (const auto& x : observations)
    if (!region.contains(x))
      throw std::invalid_argument("fit_truncated_dpmm: observation outside the truncation region");

  const NormalInverseWishart base =
      config.base.mu0.size() ? config.base : default_niw_base(region, d);
  base.validate(d);

  RngStream init_rng = rng.substream(0xA110C);
  StickBreakingState state =
      sample_stick_breaking_prior(config.truncation, config.alpha, base, init_rng);
  // One data-only sweep pulls the prior-drawn components toward the
  // observations; a raw prior draw can put almost no mass inside the region
  // and stall the first augmentation.
  state = blocked_gibbs_sweep(state, observations, init_rng);

  MixtureFitResult result;
  const int K = config.truncation;
  result.trace.labels.push_back("occupied");
  for (int k = 0; k < K; ++k) result.trace.labels.push_back("weight_" + std::to_string(k + 1));
  result.trace.draws.resize(config.iterations, 1 + K);
  result.trace.seconds.resize(static_cast<std::size_t>(config.iterations));
  result.trace.accepted.assign(static_cast<std::size_t>(config.iterations), 1);
  result.trace.aug_sizes.resize(static_cast<std::size_t>(config.iterations));

  const Eigen::VectorXd grid_lo = config.grid_lower.size() ? config.grid_lower : region.lower;
  const Eigen::VectorXd grid_hi = config.grid_upper.size() ? config.grid_upper : region.upper;
  const bool want_grid = config.grid_size > 0 && d <= 2 && grid_lo.allFinite() && grid_hi.allFinite();
  if (want_grid) {
    const int g = config.grid_size;
    const int total = d == 1 ? g : g * g;
    result.grid_points.resize(total, d);
    for (int i = 0; i < g; ++i) {
      const double x0 = grid_lo[0] + (grid_hi[0] - grid_lo[0]) * (i + 0.5) / g;
      if (d == 1) {
        result.grid_points(i, 0) = x0;
      } else {
        for (int j = 0; j < g; ++j) {
          const double x1 = grid_lo[1] + (grid_hi[1] - grid_lo[1]) * (j + 0.5) / g;
          result.grid_points(i * g + j, 0) = x0;
          result.grid_points(i * g + j, 1) = x1;
        }
      }
    }
    result.mean_density = Eigen::VectorXd::Zero(result.grid_points.rows());
    result.mean_log_density = Eigen::VectorXd::Zero(result.grid_points.rows());
  }

  for (int iter = 0; iter < config.iterations; ++iter) {
    // Augmentation and parameter sweep draw from separate keyed streams, so
    // with a region covering the whole space the parameter chain coincides
    // bit for bit with a plain blocked Gibbs run on the observations.
    RngStream iter_rng = rng.substream(static_cast<std::uint64_t>(iter) + 1);
    RngStream aug_rng = iter_rng.substream(1);
    RngStream sweep_rng = iter_rng.substream(2);
    const auto t0 = std::chrono::steady_clock::now();

    const auto model = truncated_mixture_model(state, region);
    const auto rejected_sets =
        resample_rejected(model, observations.size(), aug_rng, config.max_attempts);
    std::vector<Eigen::VectorXd> completed = observations;
    std::size_t aug_total = 0;
    for (const auto& batch : rejected_sets) {
      aug_total += batch.size();
      completed.insert(completed.end(), batch.begin(), batch.end());
    }

    SweepInfo info;
    state = blocked_gibbs_sweep(state, completed, sweep_rng, &info);

    const auto t1 = std::chrono::steady_clock::now();
    result.trace.draws(iter, 0) = static_cast<double>((info.counts.array() > 0).count());
    result.trace.draws.block(iter, 1, 1, K) = state.weights.transpose();
    result.trace.seconds[static_cast<std::size_t>(iter)] =
        std::chrono::duration<double>(t1 - t0).count();
    result.trace.aug_sizes[static_cast<std::size_t>(iter)] = static_cast<int>(aug_total);

    if (want_grid && iter >= config.burn_in) {
      const MixtureDensity density(state);
      for (Eigen::Index i = 0; i < result.grid_points.rows(); ++i) {
        const double ld = density.log_density(result.grid_points.row(i).transpose());
        result.mean_density[i] += std::exp(ld);
        result.mean_log_density[i] += ld;
      }
      ++result.averaged_iterations;
    }
  }
  if (result.averaged_iterations > 0) {
    result.mean_density /= result.averaged_iterations;
    result.mean_log_density /= result.averaged_iterations;
  }
  return result;
}

}  // namespace rejaug
