#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace dvb;
using namespace dvb::testing;

namespace {

double cost_of(const Matrix& c, const std::vector<int>& col) {
  double s = 0;
  for (std::size_t i = 0; i < col.size(); ++i) s += c(static_cast<Eigen::Index>(i), col[i]);
  return s;
}

double brute_force(const Matrix& c) {
  std::vector<int> p(static_cast<std::size_t>(c.rows()));
  std::iota(p.begin(), p.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do best = std::min(best, cost_of(c, p));
  while (std::next_permutation(p.begin(), p.end()));
  return best;
}

}  // namespace

TEST(Assignment, MatchesBruteForce) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int rep = 0; rep < 300; ++rep) {
    const int n = 1 + rep % 7;
    Matrix c(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c(i, j) = rep % 3 == 0 ? std::round(u(rng)) : u(rng);  // ties too
    const auto col = min_cost_assignment(c);
    std::vector<int> sorted = col;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < n; ++i) ASSERT_EQ(sorted[i], i);
    EXPECT_NEAR(cost_of(c, col), brute_force(c), 1e-12);
  }
}

TEST(Assignment, RejectsBadInput) {
  EXPECT_THROW(min_cost_assignment(Matrix::Zero(2, 3)), ShapeError);
  Matrix c = Matrix::Zero(2, 2);
  c(0, 1) = std::nan("");
  EXPECT_THROW(min_cost_assignment(c), DomainError);
}

TEST(Assignment, AlignmentUndoesRelabeling) {
  std::mt19937_64 rng(32);
  GmmHyperParams h = random_hyper(4, 2, rng);
  for (int k = 0; k < 4; ++k) h.m[k] = Vector{{3.0 * k, -2.0 * k}};
  const GlobalNaturalParams ref = hyper_to_natural(h);
  const std::vector<int> perm{2, 3, 1, 0};
  const GlobalNaturalParams shuffled = permute_components(ref, perm);
  EXPECT_GT(kl_global(shuffled, ref), 1.0);
  EXPECT_NEAR(aligned_kl(shuffled, ref), 0.0, 1e-10);
  EXPECT_EQ(flatten(align_to_reference(shuffled, ref)), flatten(ref));
}
