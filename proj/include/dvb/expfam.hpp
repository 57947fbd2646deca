#pragma once

// Natural-parameter representation of the Dirichlet x normal-Wishart family
// used as the global variational posterior of a Bayesian GMM.
//
// Flattened layout of a GlobalNaturalParams (fixed, used for every linear
// operation and for CSV dumps):
//
//   [eta_1 .. eta_K]  then for each component k = 1..K:
//   [a, upper triangle of B (row-major, i <= j), c_1 .. c_D, d]
//
// with eta = alpha - 1, a = (nu - D)/2, B = -W^{-1}/2 - (beta/2) m m^T,
// c = beta m and d = -beta/2.

#include "dvb/core.hpp"
#include "dvb/special_functions.hpp"

#include <Eigen/Eigenvalues>

#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace dvb {

struct DirichletNat {
  Vector eta;

  [[nodiscard]] Eigen::Index size() const { return eta.size(); }
  [[nodiscard]] Vector alpha() const { return eta.array() + 1.0; }
};

struct NormalWishartNat {
  double a = 0.0;
  Matrix B;
  Vector c;
  double d = 0.0;

  [[nodiscard]] Eigen::Index dim() const { return c.size(); }
};

/// Hyperparameters (beta, m, W, nu) of a single normal-Wishart block.
struct NwHyper {
  double beta = 1.0;
  Vector m;
  Matrix W;
  double nu = 1.0;
};

struct GlobalNaturalParams {
  DirichletNat dirichlet;
  std::vector<NormalWishartNat> components;

  [[nodiscard]] int K() const { return static_cast<int>(components.size()); }
  [[nodiscard]] int D() const {
    return components.empty() ? 0 : static_cast<int>(components.front().dim());
  }
};

struct GmmHyperParams {
  Vector alpha;
  std::vector<Vector> m;
  Vector beta;
  std::vector<Matrix> W;
  Vector nu;

  [[nodiscard]] int K() const { return static_cast<int>(alpha.size()); }
  [[nodiscard]] int D() const { return m.empty() ? 0 : static_cast<int>(m.front().size()); }

  [[nodiscard]] NwHyper component(int k) const { return {beta(k), m[k], W[k], nu(k)}; }
};

struct NwExpectedStats {
  double e_logdet_lambda = 0.0;
  Matrix e_lambda;
  Vector e_lambda_mu;
  double e_mu_lambda_mu = 0.0;
};

// ---------------------------------------------------------------------------
// Flattened layout

inline std::size_t nw_block_size(int dim) {
  const auto d = static_cast<std::size_t>(dim);
  return 1 + d * (d + 1) / 2 + d + 1;
}

inline std::size_t flat_size(int k, int dim) {
  return static_cast<std::size_t>(k) + static_cast<std::size_t>(k) * nw_block_size(dim);
}

inline Vector flatten(const GlobalNaturalParams& phi) {
  const int k_count = phi.K();
  const int dim = phi.D();
  Vector out(static_cast<Eigen::Index>(flat_size(k_count, dim)));
  Eigen::Index p = 0;
  for (Eigen::Index k = 0; k < phi.dirichlet.size(); ++k) out(p++) = phi.dirichlet.eta(k);
  for (const auto& nw : phi.components) {
    out(p++) = nw.a;
    for (int i = 0; i < dim; ++i)
      for (int j = i; j < dim; ++j) out(p++) = nw.B(i, j);
    for (int i = 0; i < dim; ++i) out(p++) = nw.c(i);
    out(p++) = nw.d;
  }
  return out;
}

inline GlobalNaturalParams unflatten(std::span<const double> flat, int k_count, int dim) {
  detail::require_shape(k_count >= 1 && dim >= 1, "unflatten: K and D must be >= 1");
  detail::require_shape(flat.size() == flat_size(k_count, dim),
                        "unflatten: vector length does not match K/D layout");
  GlobalNaturalParams phi;
  std::size_t p = 0;
  phi.dirichlet.eta.resize(k_count);
  for (int k = 0; k < k_count; ++k) phi.dirichlet.eta(k) = flat[p++];
  phi.components.resize(static_cast<std::size_t>(k_count));
  for (auto& nw : phi.components) {
    nw.a = flat[p++];
    nw.B.resize(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = i; j < dim; ++j) nw.B(i, j) = nw.B(j, i) = flat[p++];
    nw.c.resize(dim);
    for (int i = 0; i < dim; ++i) nw.c(i) = flat[p++];
    nw.d = flat[p++];
  }
  return phi;
}

inline GlobalNaturalParams unflatten(const Vector& flat, int k_count, int dim) {
  return unflatten(std::span<const double>(flat.data(), static_cast<std::size_t>(flat.size())),
                   k_count, dim);
}

inline void require_same_shape(const GlobalNaturalParams& p, const GlobalNaturalParams& q,
                               const char* what) {
  detail::require_shape(p.K() == q.K() && p.D() == q.D() &&
                            p.dirichlet.size() == q.dirichlet.size(),
                        std::string(what) + ": K/D mismatch");
}

// ---------------------------------------------------------------------------
// Hyperparameter <-> natural parameter maps

inline NormalWishartNat nw_from_inverse_scale(double beta, const Vector& m, const Matrix& w_inv,
                                              double nu) {
  const auto dim = static_cast<double>(m.size());
  NormalWishartNat nw;
  nw.a = 0.5 * (nu - dim);
  nw.B = -0.5 * w_inv - 0.5 * beta * (m * m.transpose());
  nw.B = detail::symmetrize(nw.B);
  nw.c = beta * m;
  nw.d = -0.5 * beta;
  return nw;
}

inline void validate_nw_hyper(const NwHyper& h, int k) {
  const auto dim = static_cast<double>(h.m.size());
  const std::string where = " (component " + std::to_string(k) + ")";
  detail::require_shape(h.m.size() >= 1 && h.W.rows() == h.m.size() && h.W.cols() == h.m.size(),
                        "normal-Wishart hyperparameters: W must be DxD" + where);
  detail::require_domain(std::isfinite(h.beta) && h.beta > 0.0, "beta nonpositive" + where);
  detail::require_domain(std::isfinite(h.nu) && h.nu > dim - 1.0, "nu must exceed D-1" + where);
  detail::require_domain(h.m.allFinite(), "m not finite" + where);
  detail::require_domain(detail::is_spd(h.W), "W not symmetric positive definite" + where);
}

inline NormalWishartNat nw_hyper_to_natural(const NwHyper& h) {
  validate_nw_hyper(h, 0);
  Eigen::LLT<Matrix> llt(detail::symmetrize(h.W));
  return nw_from_inverse_scale(h.beta, h.m, detail::inverse_spd(llt, h.W.rows()), h.nu);
}

inline GlobalNaturalParams hyper_to_natural(const GmmHyperParams& h) {
  const int k_count = h.K();
  detail::require_shape(k_count >= 1, "hyper_to_natural: K must be >= 1");
  detail::require_shape(static_cast<int>(h.m.size()) == k_count &&
                            h.beta.size() == k_count &&
                            static_cast<int>(h.W.size()) == k_count && h.nu.size() == k_count,
                        "hyper_to_natural: per-component field counts differ");
  const int dim = h.D();
  GlobalNaturalParams phi;
  phi.dirichlet.eta.resize(k_count);
  for (int k = 0; k < k_count; ++k) {
    detail::require_domain(std::isfinite(h.alpha(k)) && h.alpha(k) > 0.0,
                           "alpha nonpositive (component " + std::to_string(k) + ")");
    phi.dirichlet.eta(k) = h.alpha(k) - 1.0;
  }
  phi.components.reserve(static_cast<std::size_t>(k_count));
  for (int k = 0; k < k_count; ++k) {
    const NwHyper c = h.component(k);
    detail::require_shape(c.m.size() == dim, "hyper_to_natural: components differ in D");
    validate_nw_hyper(c, k);
    Eigen::LLT<Matrix> llt(detail::symmetrize(c.W));
    phi.components.push_back(
        nw_from_inverse_scale(c.beta, c.m, detail::inverse_spd(llt, dim), c.nu));
  }
  return phi;
}

/// Hyperparameters recovered from a normal-Wishart block, keeping the
/// Cholesky factor of W^{-1} for the moment computations.
struct NwRecovered {
  double beta;
  double nu;
  Vector m;
  Matrix w_inv;
  Eigen::LLT<Matrix> w_inv_llt;
};

inline NwRecovered recover_nw(const NormalWishartNat& nw, int k = 0) {
  const auto dim = static_cast<double>(nw.dim());
  const std::string where = " (component " + std::to_string(k) + ")";
  detail::require_shape(nw.B.rows() == nw.dim() && nw.B.cols() == nw.dim(),
                        "normal-Wishart block: B must be DxD" + where);
  const double beta = -2.0 * nw.d;
  detail::require_domain(std::isfinite(beta) && beta > 0.0, "beta nonpositive" + where);
  const double nu = 2.0 * nw.a + dim;
  detail::require_domain(std::isfinite(nu) && nu > dim - 1.0, "nu must exceed D-1" + where);
  detail::require_domain(nw.c.allFinite() && nw.B.allFinite(), "non-finite block" + where);
  Matrix w_inv = detail::symmetrize(-2.0 * nw.B - (nw.c * nw.c.transpose()) / beta);
  Eigen::LLT<Matrix> llt(w_inv);
  detail::require_domain(llt.info() == Eigen::Success,
                         "recovered W^{-1} not positive definite" + where);
  return {beta, nu, nw.c / beta, std::move(w_inv), std::move(llt)};
}

inline NwHyper nw_natural_to_hyper(const NormalWishartNat& nw) {
  NwRecovered r = recover_nw(nw);
  return {r.beta, r.m, detail::inverse_spd(r.w_inv_llt, nw.dim()), r.nu};
}

inline GmmHyperParams natural_to_hyper(const GlobalNaturalParams& phi) {
  const int k_count = phi.K();
  detail::require_shape(k_count >= 1 && phi.dirichlet.size() == k_count,
                        "natural_to_hyper: Dirichlet length must equal K");
  GmmHyperParams h;
  h.alpha = phi.dirichlet.alpha();
  for (int k = 0; k < k_count; ++k) {
    detail::require_domain(std::isfinite(h.alpha(k)) && h.alpha(k) > 0.0,
                           "alpha nonpositive (component " + std::to_string(k) + ")");
  }
  h.beta.resize(k_count);
  h.nu.resize(k_count);
  for (int k = 0; k < k_count; ++k) {
    const auto& nw = phi.components[static_cast<std::size_t>(k)];
    detail::require_shape(nw.dim() == phi.D(), "natural_to_hyper: components differ in D");
    NwRecovered r = recover_nw(nw, k);
    h.beta(k) = r.beta;
    h.nu(k) = r.nu;
    h.m.push_back(r.m);
    h.W.push_back(detail::inverse_spd(r.w_inv_llt, nw.dim()));
  }
  return h;
}

// ---------------------------------------------------------------------------
// Log-partition functions and expected sufficient statistics

inline void require_dirichlet_domain(const DirichletNat& dn) {
  detail::require_shape(dn.size() >= 1, "Dirichlet block must be non-empty");
  for (Eigen::Index k = 0; k < dn.size(); ++k) {
    detail::require_domain(std::isfinite(dn.eta(k)) && dn.eta(k) > -1.0,
                           "alpha nonpositive (component " + std::to_string(k) + ")");
  }
}

/// ln B(alpha) = sum_k lnGamma(alpha_k) - lnGamma(sum_k alpha_k).
inline double dirichlet_log_partition(const DirichletNat& dn) {
  require_dirichlet_domain(dn);
  const Vector alpha = dn.alpha();
  double s = 0.0;
  for (Eigen::Index k = 0; k < alpha.size(); ++k) s += log_gamma(alpha(k));
  return s - log_gamma(alpha.sum());
}

inline Vector dirichlet_expected_log_pi(const DirichletNat& dn) {
  require_dirichlet_domain(dn);
  const Vector alpha = dn.alpha();
  const double psi_total = digamma(alpha.sum());
  Vector out(alpha.size());
  for (Eigen::Index k = 0; k < alpha.size(); ++k) out(k) = digamma(alpha(k)) - psi_total;
  return out;
}

// The additive constant D(D-1)/4 ln(pi) of the multivariate gamma function is
// omitted; it cancels in every KL divergence.
inline double nw_log_partition_recovered(const NwRecovered& r, Eigen::Index dim) {
  const auto d = static_cast<double>(dim);
  const double log_det_w = -detail::log_det_spd(r.w_inv_llt);
  double s = -0.5 * d * std::log(r.beta) + 0.5 * r.nu * log_det_w +
             0.5 * r.nu * d * std::numbers::ln2;
  for (Eigen::Index j = 1; j <= dim; ++j) s += log_gamma(0.5 * (r.nu + 1.0 - static_cast<double>(j)));
  return s;
}

inline double nw_log_partition(const NormalWishartNat& nw) {
  return nw_log_partition_recovered(recover_nw(nw), nw.dim());
}

/// E[ln|Lambda|] = sum_j psi((nu+1-j)/2) + D ln 2 + ln|W|.
inline double nw_expected_logdet(const NwRecovered& r, Eigen::Index dim) {
  double s = static_cast<double>(dim) * std::numbers::ln2 - detail::log_det_spd(r.w_inv_llt);
  for (Eigen::Index j = 1; j <= dim; ++j) s += digamma(0.5 * (r.nu + 1.0 - static_cast<double>(j)));
  return s;
}

inline NwExpectedStats nw_expected_stats(const NormalWishartNat& nw) {
  const NwRecovered r = recover_nw(nw);
  const Eigen::Index dim = nw.dim();
  const Matrix w = detail::inverse_spd(r.w_inv_llt, dim);
  NwExpectedStats s;
  s.e_logdet_lambda = nw_expected_logdet(r, dim);
  s.e_lambda = r.nu * w;
  s.e_lambda_mu = s.e_lambda * r.m;
  s.e_mu_lambda_mu = static_cast<double>(dim) / r.beta + r.nu * r.m.dot(w * r.m);
  return s;
}

// ---------------------------------------------------------------------------
// KL divergences

inline double kl_dirichlet(const DirichletNat& p, const DirichletNat& q) {
  detail::require_shape(p.size() == q.size(), "kl_dirichlet: dimension mismatch");
  const Vector e_log_pi = dirichlet_expected_log_pi(p);
  const double lin = (p.eta - q.eta).dot(e_log_pi);
  return lin - dirichlet_log_partition(p) + dirichlet_log_partition(q);
}

/// <phi_p - phi_q, E_p[u]> - A(phi_p) + A(phi_q), with the matrix block
/// paired through the Frobenius inner product.
inline double kl_normal_wishart(const NormalWishartNat& p, const NormalWishartNat& q) {
  detail::require_shape(p.dim() == q.dim(), "kl_normal_wishart: dimension mismatch");
  const NwRecovered rp = recover_nw(p);
  const NwRecovered rq = recover_nw(q);
  const NwExpectedStats e = nw_expected_stats(p);
  const double lin = (p.a - q.a) * e.e_logdet_lambda +
                     (p.B - q.B).cwiseProduct(e.e_lambda).sum() +
                     (p.c - q.c).dot(e.e_lambda_mu) + (p.d - q.d) * e.e_mu_lambda_mu;
  return lin - nw_log_partition_recovered(rp, p.dim()) + nw_log_partition_recovered(rq, q.dim());
}

inline double kl_global(const GlobalNaturalParams& p, const GlobalNaturalParams& q) {
  require_same_shape(p, q, "kl_global");
  double s = kl_dirichlet(p.dirichlet, q.dirichlet);
  for (std::size_t k = 0; k < p.components.size(); ++k)
    s += kl_normal_wishart(p.components[k], q.components[k]);
  return s;
}

// ---------------------------------------------------------------------------
// Domain membership and projection

inline bool nw_in_domain(const NormalWishartNat& nw) {
  const auto dim = static_cast<double>(nw.dim());
  if (nw.B.rows() != nw.dim() || nw.B.cols() != nw.dim()) return false;
  if (!std::isfinite(nw.a) || !std::isfinite(nw.d) || !nw.B.allFinite() || !nw.c.allFinite())
    return false;
  if (!(nw.d < 0.0)) return false;
  if (!(2.0 * nw.a + dim > dim - 1.0)) return false;
  const double beta = -2.0 * nw.d;
  return detail::is_spd(detail::symmetrize(-2.0 * nw.B - (nw.c * nw.c.transpose()) / beta));
}

inline bool dirichlet_in_domain(const DirichletNat& dn) {
  if (dn.size() < 1) return false;
  for (Eigen::Index k = 0; k < dn.size(); ++k)
    if (!std::isfinite(dn.eta(k)) || !(dn.eta(k) > -1.0)) return false;
  return true;
}

inline bool in_domain(const GlobalNaturalParams& phi) {
  if (phi.K() < 1 || phi.dirichlet.size() != phi.K()) return false;
  if (!dirichlet_in_domain(phi.dirichlet)) return false;
  for (const auto& nw : phi.components)
    if (nw.dim() != phi.D() || !nw_in_domain(nw)) return false;
  return true;
}

/// Interior margins used by project_to_domain.
struct ProjectionMargins {
  double alpha = 1e-6;
  double beta = 1e-8;
  double nu = 1e-6;
  double w_inv_eig = 1e-8;
};

namespace detail {

inline DirichletNat repair_dirichlet(const DirichletNat& dn, double eps) {
  DirichletNat out = dn;
  for (Eigen::Index k = 0; k < out.size(); ++k) {
    const double alpha = std::isfinite(dn.eta(k)) ? dn.eta(k) + 1.0 : eps;
    out.eta(k) = std::max(alpha, eps) - 1.0;
  }
  return out;
}

// Per-field repair of an invalid block: beta and nu are clipped from below,
// W^{-1} is symmetrized and its spectrum clipped; c is kept.
inline NormalWishartNat repair_nw(const NormalWishartNat& nw, const ProjectionMargins& eps) {
  const Eigen::Index dim = nw.dim();
  const auto d = static_cast<double>(dim);
  NormalWishartNat out;
  out.c = nw.c.allFinite() ? nw.c : Vector(nw.c.unaryExpr([](double v) {
    return std::isfinite(v) ? v : 0.0;
  }));
  const double beta_raw = std::isfinite(nw.d) ? -2.0 * nw.d : eps.beta;
  const double beta = std::max(beta_raw, eps.beta);
  out.d = -0.5 * beta;
  const double nu_raw = std::isfinite(nw.a) ? 2.0 * nw.a + d : d - 1.0 + eps.nu;
  out.a = 0.5 * (std::max(nu_raw, d - 1.0 + eps.nu) - d);

  const Matrix cc = out.c * out.c.transpose();
  Matrix w_inv;
  if (nw.B.allFinite()) {
    w_inv = symmetrize(-2.0 * nw.B - cc / beta);
  } else {
    w_inv = Matrix::Identity(dim, dim) * eps.w_inv_eig;
  }
  // B = -(W^{-1} + cc'/beta)/2 is stored, so an eigenvalue far below the
  // magnitude of cc'/beta would not survive the round trip.
  const double scale = std::max(w_inv.cwiseAbs().maxCoeff(), (cc / beta).cwiseAbs().maxCoeff());
  double floor = std::max(eps.w_inv_eig, 1e-12 * scale);
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(w_inv);
    Vector ev = es.eigenvalues().cwiseMax(floor);
    Matrix clipped = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    out.B = symmetrize(-0.5 * (symmetrize(clipped) + cc / beta));
    if (nw_in_domain(out)) return out;
    // Rounding in B can undo a clip that sits right at the margin.
    floor *= 10.0;
  }
  return out;
}

}  // namespace detail

/// Identity on Omega; otherwise repairs each invalid block so that the
/// result lies strictly inside Omega. This is a per-field/spectral surrogate,
/// not the exact Frobenius-nearest point.
inline GlobalNaturalParams project_to_domain(const GlobalNaturalParams& phi,
                                             const ProjectionMargins& eps = {}) {
  if (in_domain(phi)) return phi;
  GlobalNaturalParams out = phi;
  if (!dirichlet_in_domain(out.dirichlet))
    out.dirichlet = detail::repair_dirichlet(out.dirichlet, eps.alpha);
  for (auto& nw : out.components)
    if (!nw_in_domain(nw)) nw = detail::repair_nw(nw, eps);
  return out;
}

// ---------------------------------------------------------------------------

/// Reorders components (Dirichlet entries and normal-Wishart blocks) so that
/// result component k is input component perm[k].
inline GlobalNaturalParams permute_components(const GlobalNaturalParams& phi,
                                              std::span<const int> perm) {
  detail::require_shape(static_cast<int>(perm.size()) == phi.K(),
                        "permute_components: permutation length must equal K");
  GlobalNaturalParams out = phi;
  for (std::size_t k = 0; k < perm.size(); ++k) {
    out.dirichlet.eta(static_cast<Eigen::Index>(k)) = phi.dirichlet.eta(perm[k]);
    out.components[k] = phi.components[static_cast<std::size_t>(perm[k])];
  }
  return out;
}

}  // namespace dvb
