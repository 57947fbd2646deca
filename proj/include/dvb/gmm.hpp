#pragma once

// Per-node computations for the Bayesian Gaussian mixture: the VBE step
// (responsibilities) and the local VBM optimum with the N-fold replication
// of the node's data.

#include "dvb/expfam.hpp"

#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace dvb {

/// Scalar prior settings shared by all K components.
struct GmmPrior {
  double alpha0 = 1.0;
  std::optional<Vector> mu0;      // default: zero vector
  double beta0 = 1.0;
  std::optional<Matrix> W0;       // default: I / D
  std::optional<double> nu0;      // default: D
};

class GmmModelConfig {
 public:
  GmmModelConfig(int k, int dim, int node_count, const GmmPrior& prior = {})
      : k_(k), dim_(dim), node_count_(node_count) {
    detail::require_shape(k >= 1, "GmmModelConfig: K must be >= 1");
    detail::require_shape(dim >= 1, "GmmModelConfig: D must be >= 1");
    detail::require_shape(node_count >= 1, "GmmModelConfig: N must be >= 1");
    alpha0_ = prior.alpha0;
    mu0_ = prior.mu0.value_or(Vector::Zero(dim));
    beta0_ = prior.beta0;
    W0_ = prior.W0.value_or(Matrix::Identity(dim, dim) / static_cast<double>(dim));
    nu0_ = prior.nu0.value_or(static_cast<double>(dim));
    detail::require_shape(mu0_.size() == dim, "GmmModelConfig: mu0 must have length D");
    detail::require_shape(W0_.rows() == dim && W0_.cols() == dim,
                          "GmmModelConfig: W0 must be DxD");
    detail::require_domain(alpha0_ > 0.0, "GmmModelConfig: alpha0 nonpositive");
    NwHyper h{beta0_, mu0_, W0_, nu0_};
    validate_nw_hyper(h, 0);
    Eigen::LLT<Matrix> llt(W0_);
    W0_inv_ = detail::inverse_spd(llt, dim);
  }

  [[nodiscard]] int K() const { return k_; }
  [[nodiscard]] int D() const { return dim_; }
  [[nodiscard]] int N() const { return node_count_; }
  [[nodiscard]] double alpha0() const { return alpha0_; }
  [[nodiscard]] const Vector& mu0() const { return mu0_; }
  [[nodiscard]] double beta0() const { return beta0_; }
  [[nodiscard]] const Matrix& W0() const { return W0_; }
  [[nodiscard]] const Matrix& W0_inv() const { return W0_inv_; }
  [[nodiscard]] double nu0() const { return nu0_; }

  [[nodiscard]] GmmModelConfig with_replication(int node_count) const {
    GmmModelConfig c = *this;
    detail::require_shape(node_count >= 1, "GmmModelConfig: N must be >= 1");
    c.node_count_ = node_count;
    return c;
  }

  [[nodiscard]] GmmHyperParams prior_hyper() const {
    GmmHyperParams h;
    h.alpha = Vector::Constant(k_, alpha0_);
    h.beta = Vector::Constant(k_, beta0_);
    h.nu = Vector::Constant(k_, nu0_);
    h.m.assign(static_cast<std::size_t>(k_), mu0_);
    h.W.assign(static_cast<std::size_t>(k_), W0_);
    return h;
  }

  [[nodiscard]] GlobalNaturalParams prior_natural() const { return hyper_to_natural(prior_hyper()); }

 private:
  int k_;
  int dim_;
  int node_count_;
  double alpha0_;
  Vector mu0_;
  double beta0_;
  Matrix W0_;
  Matrix W0_inv_;
  double nu0_;
};

struct NodeDataset {
  Matrix points;  // N_i x D
  int node_id = 0;

  [[nodiscard]] Eigen::Index size() const { return points.rows(); }
};

/// N_i x K row-stochastic matrix.
struct Responsibilities {
  Matrix r;
};

inline Responsibilities vbe_step(const NodeDataset& data, const GlobalNaturalParams& phi,
                                 const GmmModelConfig& cfg) {
  const int k_count = cfg.K();
  const int dim = cfg.D();
  detail::require_shape(phi.K() == k_count && phi.D() == dim, "vbe_step: phi shape != model");
  detail::require_shape(data.points.cols() == dim || data.points.rows() == 0,
                        "vbe_step: data dimension != D");
  detail::require_domain(data.points.allFinite(), "vbe_step: non-finite data at node " +
                                                      std::to_string(data.node_id));

  const Vector e_log_pi = dirichlet_expected_log_pi(phi.dirichlet);
  // Per-component constant part of ln rho and the quadratic-form ingredients.
  std::vector<double> offset(static_cast<std::size_t>(k_count));
  std::vector<double> nu(static_cast<std::size_t>(k_count));
  std::vector<Vector> mean(static_cast<std::size_t>(k_count));
  std::vector<Eigen::LLT<Matrix>> w_inv_chol(static_cast<std::size_t>(k_count));
  const double log_two_pi = std::log(2.0 * std::numbers::pi);
  for (int k = 0; k < k_count; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    NwRecovered r = recover_nw(phi.components[uk], k);
    offset[uk] = e_log_pi(k) + 0.5 * nw_expected_logdet(r, dim) - 0.5 * dim * log_two_pi -
                 0.5 * static_cast<double>(dim) / r.beta;
    nu[uk] = r.nu;
    mean[uk] = std::move(r.m);
    w_inv_chol[uk] = std::move(r.w_inv_llt);
  }

  const Eigen::Index n = data.points.rows();
  Responsibilities out{Matrix(n, k_count)};
  Vector log_rho(k_count);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Vector x = data.points.row(j).transpose();
    for (int k = 0; k < k_count; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      // (x-m)^T W (x-m) with W = (L L^T)^{-1}: solve L y = x - m.
      const Vector y = w_inv_chol[uk].matrixL().solve(x - mean[uk]);
      log_rho(k) = offset[uk] - 0.5 * nu[uk] * y.squaredNorm();
    }
    const double mx = log_rho.maxCoeff();
    detail::require_domain(std::isfinite(mx), "vbe_step: non-finite log responsibilities");
    Vector w = (log_rho.array() - mx).exp();
    out.r.row(j) = (w / w.sum()).transpose();
  }
  return out;
}

/// Weighted sufficient statistics of one component at one node, before
/// replication.
struct ComponentStats {
  double weight = 0.0;  // sum_j r_jk
  Vector mean;          // sum_j r_jk x_j / weight
  Matrix scatter;       // sum_j r_jk (x_j - mean)(x_j - mean)^T / weight
};

inline ComponentStats component_stats(const Matrix& points, const Eigen::VectorXd& r_col) {
  const Eigen::Index dim = points.cols();
  ComponentStats s{r_col.sum(), Vector::Zero(dim), Matrix::Zero(dim, dim)};
  if (!(s.weight > 0.0)) return s;
  s.mean = (points.transpose() * r_col) / s.weight;
  const Matrix centered = points.rowwise() - s.mean.transpose();
  s.scatter = (centered.transpose() * r_col.asDiagonal() * centered) / s.weight;
  s.scatter = detail::symmetrize(s.scatter);
  return s;
}

/// Conjugate update of all K blocks with the node's data replicated N times.
inline GlobalNaturalParams local_vbm_optimum(const NodeDataset& data, const Responsibilities& r,
                                             const GmmModelConfig& cfg) {
  const int k_count = cfg.K();
  const int dim = cfg.D();
  const Eigen::Index n = data.points.rows();
  detail::require_shape(r.r.rows() == n && (r.r.cols() == k_count || n == 0),
                        "local_vbm_optimum: responsibilities shape != N_i x K");
  detail::require_shape(data.points.cols() == dim || n == 0,
                        "local_vbm_optimum: data dimension != D");
  const auto replication = static_cast<double>(cfg.N());

  GmmHyperParams h;
  h.alpha.resize(k_count);
  h.beta.resize(k_count);
  h.nu.resize(k_count);
  std::vector<Matrix> w_inv(static_cast<std::size_t>(k_count));
  for (int k = 0; k < k_count; ++k) {
    ComponentStats s;
    if (n > 0) {
      s = component_stats(data.points, r.r.col(k));
    } else {
      s = {0.0, Vector::Zero(dim), Matrix::Zero(dim, dim)};
    }
    const double big_r = replication * s.weight;
    h.alpha(k) = cfg.alpha0() + big_r;
    h.beta(k) = cfg.beta0() + big_r;
    h.nu(k) = cfg.nu0() + big_r;
    h.m.push_back((cfg.beta0() * cfg.mu0() + big_r * s.mean) / h.beta(k));
    const Vector dev = s.mean - cfg.mu0();
    Matrix wi = cfg.W0_inv();
    if (big_r > 0.0) {
      wi += big_r * s.scatter +
            (cfg.beta0() * big_r / (cfg.beta0() + big_r)) * (dev * dev.transpose());
    }
    w_inv[static_cast<std::size_t>(k)] = detail::symmetrize(wi);
  }

  GlobalNaturalParams phi;
  phi.dirichlet.eta = h.alpha.array() - 1.0;
  for (int k = 0; k < k_count; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    phi.components.push_back(nw_from_inverse_scale(h.beta(k), h.m[uk], w_inv[uk], h.nu(k)));
  }
  return phi;
}

}  // namespace dvb
