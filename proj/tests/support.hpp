#pragma once

// Shared fixtures and independent oracles for the test suite.

#include "dvb/dvb.hpp"

#include <cmath>
#include <random>

namespace dvb::testing {

inline Matrix random_spd(int dim, std::mt19937_64& rng, double jitter = 0.5) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix a(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) a(i, j) = g(rng);
  return a * a.transpose() / dim + jitter * Matrix::Identity(dim, dim);
}

inline NwHyper random_nw_hyper(int dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  NwHyper h;
  h.beta = 0.5 + 4.0 * u(rng);
  h.m = Vector(dim);
  for (int i = 0; i < dim; ++i) h.m(i) = g(rng);
  h.W = random_spd(dim, rng);
  h.nu = dim + 0.5 + 6.0 * u(rng);
  return h;
}

inline GmmHyperParams random_hyper(int k_count, int dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GmmHyperParams h;
  h.alpha.resize(k_count);
  h.beta.resize(k_count);
  h.nu.resize(k_count);
  for (int k = 0; k < k_count; ++k) {
    NwHyper c = random_nw_hyper(dim, rng);
    h.alpha(k) = 0.5 + 5.0 * u(rng);
    h.beta(k) = c.beta;
    h.nu(k) = c.nu;
    h.m.push_back(c.m);
    h.W.push_back(c.W);
  }
  return h;
}

inline GlobalNaturalParams random_natural(int k_count, int dim, std::mt19937_64& rng) {
  return hyper_to_natural(random_hyper(k_count, dim, rng));
}

// Textbook hyperparameter-form KL between normal-Wisharts:
// KL(Wishart) + E_Lambda[KL(Gaussians)], using std::lgamma.
inline double oracle_kl_nw(const NwHyper& p, const NwHyper& q) {
  const int dim = static_cast<int>(p.m.size());
  const double dd = dim;
  auto log_multigamma = [&](double a) {
    double s = 0.25 * dd * (dd - 1.0) * std::log(std::numbers::pi);
    for (int j = 1; j <= dim; ++j) s += std::lgamma(a + 0.5 * (1.0 - j));
    return s;
  };
  auto multi_digamma = [&](double a) {
    double s = 0.0;
    for (int j = 1; j <= dim; ++j) s += digamma(a + 0.5 * (1.0 - j));
    return s;
  };
  const double logdet_wp = std::log(p.W.determinant());
  const double logdet_wq = std::log(q.W.determinant());
  const Matrix wq_inv = q.W.inverse();
  const double kl_wishart = 0.5 * (p.nu - q.nu) * multi_digamma(0.5 * p.nu) + log_multigamma(0.5 * q.nu) -
                            log_multigamma(0.5 * p.nu) + 0.5 * q.nu * (logdet_wq - logdet_wp) +
                            0.5 * p.nu * ((wq_inv * p.W).trace() - dd);
  const Vector dm = p.m - q.m;
  const double kl_gauss = 0.5 * (dd * q.beta / p.beta - dd + dd * std::log(p.beta / q.beta) +
                                 q.beta * p.nu * dm.dot(p.W * dm));
  return kl_wishart + kl_gauss;
}

// Bartlett decomposition: Lambda = L A A^T L^T, W = L L^T.
inline Matrix sample_wishart(const Matrix& w, double nu, std::mt19937_64& rng) {
  const Eigen::Index dim = w.rows();
  const Matrix l = Eigen::LLT<Matrix>(w).matrixL();
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix a = Matrix::Zero(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    std::chi_squared_distribution<double> chi(nu - static_cast<double>(i));
    a(i, i) = std::sqrt(chi(rng));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = g(rng);
  }
  const Matrix la = l * a;
  return la * la.transpose();
}

// Full log density of the normal-Wishart at (mu, Lambda).
inline double log_density_nw(const NwHyper& h, const Vector& mu, const Matrix& lambda) {
  const auto dim = static_cast<double>(h.m.size());
  const int di = static_cast<int>(h.m.size());
  double log_multigamma = 0.25 * dim * (dim - 1.0) * std::log(std::numbers::pi);
  for (int j = 1; j <= di; ++j) log_multigamma += std::lgamma(0.5 * (h.nu + 1.0 - j));
  const double logdet_l = std::log(lambda.determinant());
  const double log_wishart = 0.5 * (h.nu - dim - 1.0) * logdet_l - 0.5 * (h.W.inverse() * lambda).trace() -
                             0.5 * h.nu * dim * std::log(2.0) - 0.5 * h.nu * std::log(h.W.determinant()) -
                             log_multigamma;
  const Vector dm = mu - h.m;
  const double log_gauss = -0.5 * dim * std::log(2.0 * std::numbers::pi) + 0.5 * dim * std::log(h.beta) +
                           0.5 * logdet_l - 0.5 * h.beta * dm.dot(lambda * dm);
  return log_wishart + log_gauss;
}

/// Small labeled GMM problem split over a connected geometric graph.
struct SmallProblem {
  Network net;
  LabeledDataset data;
  std::vector<NodeDataset> nodes;
  GmmModelConfig model;
  GlobalNaturalParams truth;
  GlobalNaturalParams init;
};

inline SmallProblem small_problem(int n = 8, int points = 40, std::uint64_t seed = 3) {
  SyntheticSpec spec = imbalanced_reference_spec(n, points, seed);
  LabeledDataset data = generate_synthetic(spec);
  Network net = generate_geometric_graph(n, 1.6, 0.9, seed);
  GmmModelConfig model(3, 2, n);
  GlobalNaturalParams truth = ground_truth_posterior(data, model);
  InitSpec init;
  GlobalNaturalParams phi0 = build_init(data, model, init, seed + 17, n).front();
  auto nodes = data.node_datasets();
  return {std::move(net), std::move(data), std::move(nodes), std::move(model), std::move(truth), std::move(phi0)};
}

}  // namespace dvb::testing
