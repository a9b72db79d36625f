#pragma once

#include <rejaug/rng.hpp>
#include <rejaug/specfun.hpp>

#include <cmath>
#include <concepts>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

// Generic machinery for models whose generative process is a rejection
// sampler: a model exposes an unnormalized target f, a normalized proposal q
// with envelope constant M such that f(x) <= M q(x), and a way to propose.
// Everything else here -- instantiating the rejected proposals behind each
// observation, the augmented joint density, the two-block Gibbs driver, and
// the uniform-ergodicity bound -- is model agnostic.

namespace rejaug {

class MaxAttemptsError : public std::runtime_error {
public:
  explicit MaxAttemptsError(std::uint64_t attempts)
      : std::runtime_error("rejection sampler exceeded " + std::to_string(attempts) +
                           " proposals without acceptance; check the envelope") {}
};

class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kDefaultMaxAttempts = 1'000'000;

template <typename M>
concept RejectionSampled = requires(const M& m, const typename M::Point& x, RngStream& rng) {
  typename M::Point;
  { m.log_f(x) } -> std::convertible_to<double>;       // unnormalized target log density
  { m.log_q(x) } -> std::convertible_to<double>;       // proposal log density (normalized)
  { m.log_envelope() } -> std::convertible_to<double>; // log M
  { m.propose(rng) } -> std::convertible_to<typename M::Point>;
};

// Observations paired with the rejected proposals preceding each of them.
template <typename Point>
struct AugmentedDataset {
  std::vector<Point> observations;
  std::vector<std::vector<Point>> rejected_sets;

  [[nodiscard]] std::size_t total_count() const {
    std::size_t n = observations.size();
    for (const auto& batch : rejected_sets) n += batch.size();
    return n;
  }

  void check_aligned() const {
    if (observations.size() != rejected_sets.size())
      throw std::invalid_argument("AugmentedDataset: one rejected set per observation required");
  }
};

template <RejectionSampled M>
struct RejectionDraw {
  typename M::Point accepted;
  std::vector<typename M::Point> rejected;
};

// Run the rejection sampler once, keeping the rejected proposals. The pair
// (rejected, accepted) is one draw from the joint over the sampler's whole
// trajectory; the accepted point is marginally f/Z.
template <RejectionSampled M>
RejectionDraw<M> sample_with_rejections(const M& model, RngStream& rng,
                                        std::uint64_t max_attempts = kDefaultMaxAttempts) {
  RejectionDraw<M> draw;
  const double log_m = model.log_envelope();
  for (std::uint64_t attempt = 0; attempt < max_attempts; ++attempt) {
    auto y = model.propose(rng);
    const double log_accept = model.log_f(y) - log_m - model.log_q(y);
    if (std::log(rng.uniform_pos()) < log_accept) {
      draw.accepted = std::move(y);
      return draw;
    }
    draw.rejected.push_back(std::move(y));
  }
  throw MaxAttemptsError(max_attempts);
}

// Conditional draw of the rejected sets behind n observations. The sets are
// independent of the observed values, so this just runs the sampler to n
// acceptances and discards the accepted points.
template <RejectionSampled M>
std::vector<std::vector<typename M::Point>> resample_rejected(
    const M& model, std::size_t n, RngStream& rng,
    std::uint64_t max_attempts = kDefaultMaxAttempts) {
  std::vector<std::vector<typename M::Point>> sets;
  sets.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    sets.push_back(sample_with_rejections(model, rng, max_attempts).rejected);
  return sets;
}

// Log density of the augmented configuration:
//   sum_i [ log f(x_i) - log M + sum_j log{ q(y_ij) - f(y_ij)/M } ].
// The inner difference is evaluated as log(e^a - e^b) with the larger
// exponent factored out; a configuration with q <= f/M at any rejected point
// has probability zero and returns -inf.
template <RejectionSampled M>
double log_joint_augmented(const M& model, const AugmentedDataset<typename M::Point>& data) {
  data.check_aligned();
  const double log_m = model.log_envelope();
  double total = 0.0;
  for (std::size_t i = 0; i < data.observations.size(); ++i) {
    total += model.log_f(data.observations[i]) - log_m;
    for (const auto& y : data.rejected_sets[i]) {
      const double lq = model.log_q(y);
      const double lfm = model.log_f(y) - log_m;
      if (!(lfm < lq)) return kNegInf;
      total += log_diff_exp(lq, lfm);
    }
  }
  return total;
}

struct GibbsStepInfo {
  std::size_t augmentation_total = 0;
};

// One iteration of the two-block Markov chain: (1) draw the rejected sets at
// the current parameter, (2) apply the caller's kernel for the intractable
// block given the augmented data, (3) discard the rejected sets, (4) draw the
// tractable block from its exact conditional given observations only.
//
// update_theta2: (Theta, observations, rejected_sets, rng) -> Theta, must
//   leave p(theta2 | X, Y, theta1) invariant.
// update_theta1: (Theta, observations, rng) -> Theta, must sample exactly
//   from p(theta1 | X, theta2).
template <class Theta, class Point, class ModelFactory, class Theta2Kernel, class Theta1Sampler>
Theta gibbs_iteration(const ModelFactory& model_at, const std::vector<Point>& observations,
                      const Theta2Kernel& update_theta2, const Theta1Sampler& update_theta1,
                      Theta theta, RngStream& rng, GibbsStepInfo* info = nullptr,
                      std::uint64_t max_attempts = kDefaultMaxAttempts) {
  const auto model = model_at(theta);
  auto rejected = resample_rejected(model, observations.size(), rng, max_attempts);
  if (info) {
    info->augmentation_total = 0;
    for (const auto& batch : rejected) info->augmentation_total += batch.size();
  }
  theta = update_theta2(std::move(theta), observations, rejected, rng);
  rejected.clear();  // discard before the tractable-block draw
  return update_theta1(std::move(theta), observations, rng);
}

// Inputs for the uniform-ergodicity bound of the data-augmentation chain.
// slack_min is the minimum over the state space of 1 - f/(M Z); accept_min is
// the minimum of Z/M, the marginal acceptance rate. Whether the minima are
// taken over x alone or over (x, theta) jointly is the caller's modelling
// choice; the bound is valid for any uniform lower bounds.
struct ErgodicityInputs {
  double f_min = 0.0;      // b_f
  double f_max = 0.0;      // B_f
  double q_min = 0.0;      // b_q
  double q_max = 0.0;      // B_q
  double slack_min = 0.0;  // r
  double accept_min = 0.0; // R
  int n_obs = 0;
};

struct MixingBound {
  double delta;      // minorization constant
  double rho_bound;  // 1 - delta, upper bound on the mixing rate
};

inline MixingBound theorem1_bound(const ErgodicityInputs& in) {
  if (!(in.f_min > 0.0 && in.f_min <= in.f_max)) throw std::domain_error("theorem1_bound: need 0 < f_min <= f_max");
  if (!(in.q_min > 0.0 && in.q_min <= in.q_max)) throw std::domain_error("theorem1_bound: need 0 < q_min <= q_max");
  if (!(in.slack_min > 0.0 && in.slack_min <= 1.0)) throw std::domain_error("theorem1_bound: need slack_min in (0,1]");
  if (!(in.accept_min > 0.0 && in.accept_min <= 1.0)) throw std::domain_error("theorem1_bound: need accept_min in (0,1]");
  if (in.n_obs < 1) throw std::domain_error("theorem1_bound: need n_obs >= 1");
  const double beta = in.q_min * in.slack_min / in.q_max;
  const double delta = std::pow(in.f_min / (in.f_max * (beta + 1.0 / in.accept_min)),
                                static_cast<double>(in.n_obs));
  if (!(delta > 0.0 && delta <= 1.0))
    throw std::domain_error("theorem1_bound: inconsistent bounds, delta outside (0,1]");
  return {delta, 1.0 - delta};
}

}  // namespace rejaug
