#pragma once

#include <rejaug/rejection.hpp>
#include <rejaug/rng.hpp>
#include <rejaug/specfun.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>

// Geometry and simulation on the Stiefel manifold V_{p,d} of d x p frames:
// Haar and von Mises-Fisher draws, the sequential column-wise proposal
// density for the matrix Langevin distribution together with its computable
// envelope constants, and the exact rejection sampler built from them.

namespace rejaug {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline double orthonormality_error(const Matrix& m) {
  return (m.transpose() * m - Matrix::Identity(m.cols(), m.cols())).cwiseAbs().maxCoeff();
}

// QR-based orthonormalization with the R-diagonal sign fix; maps a Gaussian
// matrix to a Haar frame and is (numerically) the identity on frames.
inline Matrix orthonormalize(const Matrix& m) {
  const auto d = m.rows();
  const auto p = m.cols();
  if (d < p || p < 1) throw std::invalid_argument("orthonormalize: need d >= p >= 1");
  Eigen::HouseholderQR<Matrix> qr(m);
  Matrix q = qr.householderQ() * Matrix::Identity(d, p);
  const Matrix r = qr.matrixQR().topRows(p);
  for (Eigen::Index j = 0; j < p; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

// A d x p matrix with orthonormal columns. Construction re-orthonormalizes
// when the input drifts beyond 1e-12 and guarantees 1e-10.
class StiefelMatrix {
public:
  StiefelMatrix() = default;
  explicit StiefelMatrix(Matrix m) : m_(std::move(m)) {
    if (m_.rows() < m_.cols() || m_.cols() < 1)
      throw std::invalid_argument("StiefelMatrix: need d >= p >= 1");
    if (orthonormality_error(m_) > 1e-12) m_ = orthonormalize(m_);
    if (orthonormality_error(m_) > 1e-10)
      throw NumericalError("StiefelMatrix: orthonormalization failed");
  }

  const Matrix& matrix() const { return m_; }
  Eigen::Index rows() const { return m_.rows(); }
  Eigen::Index cols() const { return m_.cols(); }

private:
  Matrix m_;
};

// (G, kappa, H) parametrization of the exponent matrix F = G kappa H^T.
struct LangevinParams {
  StiefelMatrix g;  // d x p orientation
  Vector kappa;     // p nonnegative concentrations
  Matrix h;         // p x p orthogonal rotation

  LangevinParams() = default;
  LangevinParams(StiefelMatrix g_in, Vector kappa_in)
      : g(std::move(g_in)), kappa(std::move(kappa_in)),
        h(Matrix::Identity(kappa.size(), kappa.size())) {
    validate();
  }
  LangevinParams(StiefelMatrix g_in, Vector kappa_in, Matrix h_in)
      : g(std::move(g_in)), kappa(std::move(kappa_in)), h(std::move(h_in)) {
    validate();
  }

  Matrix exponent() const { return g.matrix() * kappa.asDiagonal() * h.transpose(); }

private:
  void validate() const {
    if (kappa.size() != g.cols()) throw std::invalid_argument("LangevinParams: kappa length != p");
    if (kappa.minCoeff() < 0.0) throw std::invalid_argument("LangevinParams: kappa must be >= 0");
    if (h.rows() != g.cols() || h.cols() != g.cols())
      throw std::invalid_argument("LangevinParams: H must be p x p");
    if (orthonormality_error(h) > 1e-8) throw std::invalid_argument("LangevinParams: H not orthogonal");
  }
};

// Per-draw certificate of the sequential proposal: its log density, the
// draw-specific constant D(X, kappa, G), the uniform bound D(kappa), and the
// per-column nullspace projections ||N_r^T G_r||.
struct SeqProposalCert {
  double log_density = 0.0;
  double log_d_x = 0.0;
  double log_d_kappa = 0.0;
  Vector nullspace_projections;
};

// log D(kappa) = sum_r log{ Gamma((d-r+1)/2) I_{(d-r-1)/2}(kappa_r)
//                            (kappa_r/2)^{-(d-r-1)/2} }.
inline double log_d_bound(const Vector& kappa, int d) {
  double total = 0.0;
  for (Eigen::Index r = 0; r < kappa.size(); ++r)
    total += log_vmf_normalizer(0.5 * (d - static_cast<double>(r) - 2.0), kappa[r]);
  return total;
}

namespace detail {

// Orthonormal basis of the orthogonal complement of the (orthonormal)
// columns of `b`.
inline Matrix complement_basis(const Matrix& b) {
  const auto d = b.rows();
  const auto k = b.cols();
  Eigen::HouseholderQR<Matrix> qr(b);
  Matrix full = qr.householderQ();
  Matrix n = full.rightCols(d - k);
  if ((n.transpose() * b).cwiseAbs().maxCoeff() > 1e-8)
    throw NumericalError("complement_basis: lost orthogonality, input near rank deficient");
  return n;
}

}  // namespace detail

// Draw from the density proportional to exp(conc * mu^T x) on the unit
// sphere S^{d-1}, d >= 2 (beta-envelope rejection scheme of Wood 1994).
inline Vector sample_vmf(const Vector& mean_direction, double concentration, RngStream& rng) {
  const auto d = mean_direction.size();
  if (d < 2) throw std::invalid_argument("sample_vmf: dimension must be >= 2");
  if (!(concentration >= 0.0)) throw std::domain_error("sample_vmf: concentration must be >= 0");

  if (concentration < 1e-12) {
    for (;;) {
      Vector g(d);
      for (Eigen::Index i = 0; i < d; ++i) g[i] = rng.normal();
      const double nrm = g.norm();
      if (nrm > 1e-12) return g / nrm;
    }
  }

  const double nrm = mean_direction.norm();
  if (std::abs(nrm - 1.0) > 1e-8) throw std::invalid_argument("sample_vmf: mean direction not unit");
  const Vector mu = mean_direction / nrm;

  const double dm1 = static_cast<double>(d) - 1.0;
  const double b = dm1 / (2.0 * concentration + std::sqrt(4.0 * concentration * concentration + dm1 * dm1));
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = concentration * x0 + dm1 * std::log(1.0 - x0 * x0);

  double w = 0.0;
  for (int attempt = 0;; ++attempt) {
    if (attempt > 1000000) throw MaxAttemptsError(1000000);
    const double z = rng.beta(0.5 * dm1, 0.5 * dm1);
    w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
    const double u = rng.uniform_pos();
    if (concentration * w + dm1 * std::log(1.0 - x0 * w) - c >= std::log(u)) break;
  }

  Vector tangent(d);
  for (;;) {
    Vector g(d);
    for (Eigen::Index i = 0; i < d; ++i) g[i] = rng.normal();
    tangent = g - mu.dot(g) * mu;
    const double tn = tangent.norm();
    if (tn > 1e-12) {
      tangent /= tn;
      break;
    }
  }
  return w * mu + std::sqrt(std::max(0.0, 1.0 - w * w)) * tangent;
}

// Uniform (Haar) draw on V_{p,d}.
inline Matrix sample_haar_uniform(int d, int p, RngStream& rng) {
  if (d < p || p < 1) throw std::invalid_argument("sample_haar_uniform: need d >= p >= 1");
  Matrix g(d, p);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < d; ++i) g(i, j) = rng.normal();
  return orthonormalize(g);
}

namespace detail {

// Column r (0-based) lives on the unit sphere of the (d - r)-dimensional
// complement; the two-point sphere S^0 is handled inline.
inline Vector sample_subsphere_vmf(const Vector& projected_mean, double kappa_r, RngStream& rng) {
  const auto m = projected_mean.size();
  if (m == 1) {
    const double logit = 2.0 * kappa_r * projected_mean[0];
    const double p_plus = 1.0 / (1.0 + std::exp(-logit));
    Vector z(1);
    z[0] = rng.uniform() < p_plus ? 1.0 : -1.0;
    return z;
  }
  const double proj = projected_mean.norm();
  if (kappa_r * proj < 1e-12) return sample_vmf(Vector::Unit(m, 0), 0.0, rng);
  return sample_vmf(projected_mean / proj, kappa_r * proj, rng);
}

}  // namespace detail

// One draw from the sequential proposal together with its certificate.
inline std::pair<Matrix, SeqProposalCert> propose_pseq(const StiefelMatrix& g, const Vector& kappa,
                                                       RngStream& rng) {
  const auto d = g.rows();
  const auto p = g.cols();
  if (kappa.size() != p) throw std::invalid_argument("propose_pseq: kappa length != p");
  if (p > 0 && kappa.minCoeff() < 0.0) throw std::domain_error("propose_pseq: kappa must be >= 0");

  Matrix x(d, p);
  SeqProposalCert cert;
  cert.nullspace_projections = Vector::Zero(p);
  for (Eigen::Index r = 0; r < p; ++r) {
    const Matrix basis = (r == 0) ? Matrix(Matrix::Identity(d, d))
                                  : detail::complement_basis(x.leftCols(r));
    const Vector w = basis.transpose() * g.matrix().col(r);
    const double proj = std::min(w.norm(), 1.0 + 1e-10);
    const Vector z = detail::sample_subsphere_vmf(w, kappa[r], rng);
    x.col(r) = basis * z;
    x.col(r) /= x.col(r).norm();

    const double nu = 0.5 * (d - static_cast<double>(r) - 2.0);
    cert.nullspace_projections[r] = proj;
    cert.log_d_x += log_vmf_normalizer(nu, kappa[r] * proj);
    cert.log_d_kappa += log_vmf_normalizer(nu, kappa[r]);
  }
  cert.log_density = (kappa.asDiagonal() * (g.matrix().transpose() * x)).trace() - cert.log_d_x;
  return {std::move(x), cert};
}

// Certificate (density, envelope constants, projections) of an arbitrary
// frame under the sequential proposal. The projections depend only on the
// subspaces spanned by X's leading columns, not on any basis choice.
inline SeqProposalCert pseq_certificate(const StiefelMatrix& g, const Vector& kappa, const Matrix& x) {
  const auto d = g.rows();
  const auto p = g.cols();
  if (x.rows() != d || x.cols() != p) throw std::invalid_argument("pseq_certificate: shape mismatch");
  SeqProposalCert cert;
  cert.nullspace_projections = Vector::Zero(p);
  for (Eigen::Index r = 0; r < p; ++r) {
    const double proj =
        (r == 0) ? 1.0
                 : std::min((detail::complement_basis(x.leftCols(r)).transpose() * g.matrix().col(r)).norm(),
                            1.0 + 1e-10);
    const double nu = 0.5 * (d - static_cast<double>(r) - 2.0);
    cert.nullspace_projections[r] = proj;
    cert.log_d_x += log_vmf_normalizer(nu, kappa[r] * proj);
    cert.log_d_kappa += log_vmf_normalizer(nu, kappa[r]);
  }
  cert.log_density = (kappa.asDiagonal() * (g.matrix().transpose() * x)).trace() - cert.log_d_x;
  return cert;
}

// log etr(F^T X) = trace(H kappa G^T X).
inline double log_dml_unnormalized(const Matrix& x, const LangevinParams& params) {
  if (x.rows() != params.g.rows() || x.cols() != params.g.cols())
    throw std::invalid_argument("log_dml_unnormalized: shape mismatch");
  return (params.h * params.kappa.asDiagonal() * params.g.matrix().transpose() * x).trace();
}

// Exact draw from the matrix Langevin distribution: propose from the
// sequential density, accept with probability D(X, kappa, G)/D(kappa), and
// rotate the accepted frame so its law has exponent G kappa H^T.
inline Matrix sample_matrix_langevin(const LangevinParams& params, RngStream& rng,
                                     std::uint64_t max_attempts = kDefaultMaxAttempts,
                                     std::uint64_t* proposals = nullptr) {
  for (std::uint64_t attempt = 1; attempt <= max_attempts; ++attempt) {
    auto [x, cert] = propose_pseq(params.g, params.kappa, rng);
    if (std::log(rng.uniform_pos()) < cert.log_d_x - cert.log_d_kappa) {
      if (proposals) *proposals = attempt;
      return x * params.h.transpose();
    }
  }
  throw MaxAttemptsError(max_attempts);
}

struct LogZEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

// Monte Carlo estimate of log Z(kappa): Z is the Haar average of
// etr(kappa G^T X), independent of G, estimated with G the standard frame.
// Used as an oracle for the asymptotic formula; exact samplers never need it.
inline LogZEstimate mc_log_z(const Vector& kappa, int d, int p, int n_samples, RngStream& rng) {
  if (n_samples < 1) throw std::invalid_argument("mc_log_z: need n_samples >= 1");
  if (kappa.size() != p) throw std::invalid_argument("mc_log_z: kappa length != p");
  Vector logw(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    const Matrix x = sample_haar_uniform(d, p, rng);
    double t = 0.0;
    for (int r = 0; r < p; ++r) t += kappa[r] * x(r, r);
    logw[i] = t;
  }
  const double m = logw.maxCoeff();
  const Eigen::ArrayXd a = (logw.array() - m).exp();
  const double mean = a.mean();
  const double var = (a - mean).square().sum() / std::max(1, n_samples - 1);
  LogZEstimate est;
  est.value = m + std::log(mean);
  est.std_error = std::sqrt(var / n_samples) / mean;
  return est;
}

// Principal angles between the column spans of two frames.
inline Vector principal_angles(const Matrix& a, const Matrix& b) {
  Eigen::JacobiSVD<Matrix> svd(a.transpose() * b);
  Vector sv = svd.singularValues();
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    sv[i] = std::acos(std::clamp(sv[i], -1.0, 1.0));
  return sv;
}

// The matrix Langevin distribution (H = I) expressed through the generic
// rejection-sampled contract, with proposal p_seq and envelope D(kappa).
struct MatrixLangevinRejectionModel {
  using Point = Matrix;
  StiefelMatrix g;
  Vector kappa;

  double log_f(const Matrix& x) const {
    return (kappa.asDiagonal() * (g.matrix().transpose() * x)).trace();
  }
  double log_q(const Matrix& x) const { return pseq_certificate(g, kappa, x).log_density; }
  double log_envelope() const { return log_d_bound(kappa, static_cast<int>(g.rows())); }
  Matrix propose(RngStream& rng) const { return propose_pseq(g, kappa, rng).first; }
};

}  // namespace rejaug
