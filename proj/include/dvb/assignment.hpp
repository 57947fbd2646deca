#pragma once

// Minimum-cost square assignment (Hungarian method with row/column
// potentials, O(n^3)) and label alignment helpers built on it.

#include "dvb/expfam.hpp"

#include <limits>
#include <vector>

namespace dvb {

/// Returns col[r], the column assigned to row r, minimizing sum cost(r, col[r]).
inline std::vector<int> min_cost_assignment(const Matrix& cost) {
  detail::require_shape(cost.rows() == cost.cols(), "min_cost_assignment: cost must be square");
  detail::require_domain(cost.allFinite(), "min_cost_assignment: non-finite cost");
  const int n = static_cast<int>(cost.rows());
  if (n == 0) return {};
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; row 0 / column 0 are sentinels.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> col(n, -1);
  for (int j = 1; j <= n; ++j) col[match[j] - 1] = j - 1;
  return col;
}

/// Posterior mean vectors m_k = c_k / beta_k of every component.
inline std::vector<Vector> component_means(const GlobalNaturalParams& phi) {
  std::vector<Vector> out;
  out.reserve(phi.components.size());
  for (const auto& nw : phi.components) out.push_back(nw.c / (-2.0 * nw.d));
  return out;
}

/// Permutation perm with estimate component perm[k] matched to reference
/// component k, minimizing total Euclidean distance between posterior means.
inline std::vector<int> alignment_permutation(const GlobalNaturalParams& estimate,
                                              const GlobalNaturalParams& reference) {
  require_same_shape(estimate, reference, "alignment_permutation");
  const auto est = component_means(estimate);
  const auto ref = component_means(reference);
  const int k_count = reference.K();
  Matrix cost(k_count, k_count);
  for (int r = 0; r < k_count; ++r)
    for (int e = 0; e < k_count; ++e)
      cost(r, e) = (ref[static_cast<std::size_t>(r)] - est[static_cast<std::size_t>(e)]).norm();
  return min_cost_assignment(cost);
}

inline GlobalNaturalParams align_to_reference(const GlobalNaturalParams& estimate,
                                              const GlobalNaturalParams& reference) {
  return permute_components(estimate, alignment_permutation(estimate, reference));
}

/// KL(estimate || reference) after component alignment.
inline double aligned_kl(const GlobalNaturalParams& estimate, const GlobalNaturalParams& reference) {
  return kl_global(align_to_reference(estimate, reference), reference);
}

}  // namespace dvb
