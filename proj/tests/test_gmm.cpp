#include "support.hpp"

#include <gtest/gtest.h>

using namespace dvb;
using namespace dvb::testing;

namespace {

GlobalNaturalParams two_component_1d(double m1, double m2) {
  GmmHyperParams h{Vector{{1.0, 1.0}},
                   {Vector::Constant(1, m1), Vector::Constant(1, m2)},
                   Vector{{1.0, 1.0}},
                   {Matrix::Identity(1, 1), Matrix::Identity(1, 1)},
                   Vector{{1.0, 1.0}}};
  return hyper_to_natural(h);
}

NodeDataset points_1d(std::initializer_list<double> xs) {
  NodeDataset d;
  d.points.resize(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index r = 0;
  for (double x : xs) d.points(r++, 0) = x;
  return d;
}

}  // namespace

TEST(Gmm, SymmetricComponentsSplitEvenly) {
  const GmmModelConfig cfg(2, 1, 1);
  const auto r = vbe_step(points_1d({0.0}), two_component_1d(-1, 1), cfg);
  EXPECT_NEAR(r.r(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(r.r(0, 1), 0.5, 1e-15);
}

TEST(Gmm, ResponsibilityFollowsNearerMean) {
  const GmmModelConfig cfg(2, 1, 1);
  const auto r = vbe_step(points_1d({1.0}), two_component_1d(-1, 1), cfg);
  EXPECT_GT(r.r(0, 1), 0.5);
  // ln rho_k = E ln pi_k + E ln|Lambda|/2 - D/2 ln 2pi - (D/beta + nu (x-m)^2 W)/2;
  // only the quadratic term differs: 0 vs (1 * 4)/2
  EXPECT_NEAR(r.r(0, 1), 1.0 / (1.0 + std::exp(-2.0)), 1e-14);
}

TEST(Gmm, ResponsibilitiesMatchDirectEvaluation) {
  std::mt19937_64 rng(21);
  const int k_count = 3, dim = 2;
  const GmmHyperParams h = random_hyper(k_count, dim, rng);
  const GlobalNaturalParams phi = hyper_to_natural(h);
  NodeDataset d{Matrix::Random(25, dim) * 3.0, 0};
  const auto r = vbe_step(d, phi, GmmModelConfig(k_count, dim, 4));
  const double a0 = h.alpha.sum();
  for (Eigen::Index j = 0; j < d.size(); ++j) {
    Vector log_rho(k_count);
    for (int k = 0; k < k_count; ++k) {
      double e_logdet = dim * std::log(2.0) + std::log(h.W[k].determinant());
      for (int i = 1; i <= dim; ++i) e_logdet += digamma(0.5 * (h.nu(k) + 1 - i));
      const Vector dx = d.points.row(j).transpose() - h.m[k];
      log_rho(k) = digamma(h.alpha(k)) - digamma(a0) + 0.5 * e_logdet -
                   0.5 * (dim / h.beta(k) + h.nu(k) * dx.dot(h.W[k] * dx));
    }
    const Vector p = (log_rho.array() - log_rho.maxCoeff()).exp();
    for (int k = 0; k < k_count; ++k) EXPECT_NEAR(r.r(j, k), p(k) / p.sum(), 1e-12);
  }
}

TEST(Gmm, ResponsibilitiesAreRowStochastic) {
  std::mt19937_64 rng(22);
  for (int rep = 0; rep < 20; ++rep) {
    const int dim = 1 + rep % 3;
    const GlobalNaturalParams phi = random_natural(4, dim, rng);
    // far-out points exercise the log-sum-exp path
    NodeDataset d{Matrix::Random(40, dim) * 50.0, 0};
    const auto r = vbe_step(d, phi, GmmModelConfig(4, dim, 1));
    ASSERT_TRUE(r.r.allFinite());
    EXPECT_TRUE((r.r.array() >= 0.0).all());
    for (Eigen::Index j = 0; j < r.r.rows(); ++j) EXPECT_NEAR(r.r.row(j).sum(), 1.0, 1e-12);
  }
}

TEST(Gmm, SingleComponentTakesEverything) {
  const GmmModelConfig cfg(1, 2, 1);
  const auto r = vbe_step(NodeDataset{Matrix::Random(7, 2), 0}, cfg.prior_natural(), cfg);
  EXPECT_TRUE((r.r.array() == 1.0).all());
}

TEST(Gmm, IdenticalComponentsGiveUniformResponsibilities) {
  const GmmModelConfig cfg(3, 2, 1);
  const auto r = vbe_step(NodeDataset{Matrix::Random(9, 2) * 4, 0}, cfg.prior_natural(), cfg);
  EXPECT_LT((r.r.array() - 1.0 / 3.0).abs().maxCoeff(), 1e-15);
}

TEST(Gmm, LocalOptimumCountsAreReplicated) {
  const GmmModelConfig cfg(3, 2, 50);
  NodeDataset d{Matrix::Random(100, 2), 0};
  Responsibilities r{Matrix::Zero(100, 3)};
  r.r.col(0).setOnes();
  const GmmHyperParams h = natural_to_hyper(local_vbm_optimum(d, r, cfg));
  EXPECT_NEAR(h.alpha(0), 5001.0, 1e-9);
  EXPECT_NEAR(h.alpha(1), 1.0, 1e-12);
  EXPECT_NEAR(h.beta(0), 5001.0, 1e-9);
  EXPECT_NEAR(h.nu(0), 5002.0, 1e-9);
}

TEST(Gmm, EmptyComponentKeepsPrior) {
  const GmmModelConfig cfg(2, 2, 5);
  NodeDataset d{Matrix::Random(30, 2), 0};
  Responsibilities r{Matrix::Zero(30, 2)};
  r.r.col(0).setOnes();
  const GlobalNaturalParams phi = local_vbm_optimum(d, r, cfg);
  const GlobalNaturalParams prior = cfg.prior_natural();
  EXPECT_EQ(phi.dirichlet.eta(1), prior.dirichlet.eta(1));
  EXPECT_LT((flatten(phi).tail(nw_block_size(2)) - flatten(prior).tail(nw_block_size(2))).norm(), 1e-14);
}

TEST(Gmm, OnePointConjugateUpdate) {
  const GmmModelConfig cfg(1, 2, 1);
  const Vector x{{1.5, -0.8}};
  NodeDataset d{x.transpose(), 0};
  Responsibilities r{Matrix::Ones(1, 1)};
  const GmmHyperParams h = natural_to_hyper(local_vbm_optimum(d, r, cfg));
  // conjugate update with one observation: beta = beta0 + 1,
  // m = (beta0 mu0 + x)/beta, W^{-1} = W0^{-1} + beta0/(beta0+1) x x^T, nu = nu0 + 1
  EXPECT_NEAR(h.beta(0), 2.0, 1e-14);
  EXPECT_LT((h.m[0] - x / 2).norm(), 1e-14);
  EXPECT_NEAR(h.nu(0), 3.0, 1e-14);
  const Matrix w_inv = cfg.W0_inv() + 0.5 * x * x.transpose();
  EXPECT_LT((h.W[0].inverse() - w_inv).norm(), 1e-12);
}

TEST(Gmm, LocalOptimumMatchesWeightedConjugateUpdate) {
  // Soft responsibilities, replication N: every sufficient statistic scales
  // by N. Reference uses the textbook hyperparameter updates.
  std::mt19937_64 rng(23);
  const int n_nodes = 7, dim = 2, k_count = 2;
  GmmPrior prior;
  prior.mu0 = Vector{{0.3, -0.2}};
  prior.beta0 = 0.7;
  prior.nu0 = 3.5;
  prior.W0 = random_spd(dim, rng);
  prior.alpha0 = 0.9;
  const GmmModelConfig cfg(k_count, dim, n_nodes, prior);
  NodeDataset d{Matrix::Random(12, dim) * 2, 0};
  Responsibilities r{Matrix::Random(12, k_count).cwiseAbs()};
  for (Eigen::Index j = 0; j < 12; ++j) r.r.row(j) /= r.r.row(j).sum();
  const GmmHyperParams h = natural_to_hyper(local_vbm_optimum(d, r, cfg));
  for (int k = 0; k < k_count; ++k) {
    const double nk = n_nodes * r.r.col(k).sum();
    Vector xbar = Vector::Zero(dim);
    for (Eigen::Index j = 0; j < 12; ++j) xbar += r.r(j, k) * d.points.row(j).transpose();
    xbar *= n_nodes / nk;
    Matrix s = Matrix::Zero(dim, dim);
    for (Eigen::Index j = 0; j < 12; ++j) {
      const Vector dx = d.points.row(j).transpose() - xbar;
      s += n_nodes * r.r(j, k) * dx * dx.transpose();
    }
    const double beta = prior.beta0 + nk;
    const Vector m = (prior.beta0 * *prior.mu0 + nk * xbar) / beta;
    const Vector dm = xbar - *prior.mu0;
    const Matrix w_inv = prior.W0->inverse() + s + prior.beta0 * nk / beta * dm * dm.transpose();
    EXPECT_NEAR(h.alpha(k), prior.alpha0 + nk, 1e-12 * nk);
    EXPECT_NEAR(h.beta(k), beta, 1e-12 * beta);
    EXPECT_NEAR(h.nu(k), prior.nu0.value() + nk, 1e-12 * nk);
    EXPECT_LT((h.m[k] - m).norm(), 1e-12);
    EXPECT_LT((h.W[k].inverse() - w_inv).norm(), 1e-10 * w_inv.norm());
  }
}

TEST(Gmm, EmptyNodeReturnsPrior) {
  const GmmModelConfig cfg(3, 2, 4);
  NodeDataset empty{Matrix(0, 2), 0};
  const auto r = vbe_step(empty, cfg.prior_natural(), cfg);
  EXPECT_EQ(r.r.rows(), 0);
  EXPECT_EQ(flatten(local_vbm_optimum(empty, r, cfg)), flatten(cfg.prior_natural()));
}

TEST(Gmm, ShapeMismatchesAreRejected) {
  const GmmModelConfig cfg(3, 2, 4);
  EXPECT_THROW(vbe_step(NodeDataset{Matrix::Zero(3, 3), 0}, cfg.prior_natural(), cfg), ShapeError);
  EXPECT_THROW(vbe_step(NodeDataset{Matrix::Zero(3, 2), 0}, GmmModelConfig(2, 2, 1).prior_natural(), cfg),
               ShapeError);
  EXPECT_THROW(GmmModelConfig(0, 2, 1), ShapeError);
  GmmPrior bad;
  bad.nu0 = 0.5;
  EXPECT_THROW(GmmModelConfig(2, 2, 1, bad), DomainError);
}
