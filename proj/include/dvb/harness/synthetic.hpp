#pragma once

// Seeded synthetic GMM data distributed over nodes, and the complete-data
// conjugate posterior used as ground truth.

#include "dvb/harness/dataset.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace dvb {

struct SyntheticSpec {
  Vector weights;                      // global mixing weights (simplex)
  std::vector<Vector> means;           // K vectors of length D
  std::vector<Matrix> covariances;     // K SPD DxD matrices
  std::vector<int> node_counts;        // N_i per node
  std::vector<Vector> node_proportions;  // per-node component proportions; empty -> weights
  bool exact_proportions = true;       // exact per-node counts vs i.i.d. label draws
  std::uint64_t seed = 0;

  [[nodiscard]] int K() const { return static_cast<int>(weights.size()); }
  [[nodiscard]] int D() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }
  [[nodiscard]] int nodes() const { return static_cast<int>(node_counts.size()); }

  void validate() const {
    const int k = K();
    detail::require_shape(k >= 1, "synthetic: need at least one component");
    detail::require_shape(static_cast<int>(means.size()) == k && static_cast<int>(covariances.size()) == k,
                          "synthetic: need K means and K covariances");
    detail::require_shape(!node_counts.empty(), "synthetic: need at least one node");
    auto check_simplex = [](const Vector& p, const std::string& what) {
      detail::require_domain((p.array() >= 0.0).all() && std::abs(p.sum() - 1.0) < 1e-9,
                             "synthetic: " + what + " must be a probability vector");
    };
    check_simplex(weights, "weights");
    for (int k2 = 0; k2 < k; ++k2) {
      detail::require_shape(means[static_cast<std::size_t>(k2)].size() == D(), "synthetic: mean dimension mismatch");
      const Matrix& s = covariances[static_cast<std::size_t>(k2)];
      detail::require_shape(s.rows() == D() && s.cols() == D(), "synthetic: covariance must be DxD");
      detail::require_domain(detail::is_spd(s), "synthetic: covariance " + std::to_string(k2) +
                                                    " is not positive definite");
    }
    for (int c : node_counts) detail::require_shape(c >= 0, "synthetic: negative node count");
    if (!node_proportions.empty()) {
      detail::require_shape(node_proportions.size() == node_counts.size(),
                            "synthetic: one proportion row per node required");
      for (const auto& p : node_proportions) {
        detail::require_shape(p.size() == k, "synthetic: proportion row length must be K");
        check_simplex(p, "node proportions");
      }
    }
  }
};

/// Reference setup: K=3 in 2-D, nodes split 30% / 40% / 30% into groups whose
/// local data favors component 1, 2 and 3 respectively.
inline SyntheticSpec imbalanced_reference_spec(int nodes = 50, int points_per_node = 100,
                                               std::uint64_t seed = 1) {
  SyntheticSpec s;
  s.weights = Vector{{0.32, 0.45, 0.23}};
  s.means = {Vector{{1.5, 3.5}}, Vector{{4.0, 4.0}}, Vector{{6.5, 4.5}}};
  Matrix pos{{0.6, 0.4}, {0.4, 0.6}};
  Matrix neg{{0.6, -0.4}, {-0.4, 0.6}};
  s.covariances = {pos, neg, pos};
  s.node_counts.assign(static_cast<std::size_t>(nodes), points_per_node);
  const int g1 = static_cast<int>(std::lround(0.3 * nodes));
  const int g2 = static_cast<int>(std::lround(0.4 * nodes));
  for (int i = 0; i < nodes; ++i) {
    if (i < g1) s.node_proportions.push_back(Vector{{0.8, 0.1, 0.1}});
    else if (i < g1 + g2) s.node_proportions.push_back(Vector{{0.05, 0.9, 0.05}});
    else s.node_proportions.push_back(Vector{{0.2, 0.2, 0.6}});
  }
  s.seed = seed;
  return s;
}

namespace detail {

// Largest-remainder rounding of total * p.
inline std::vector<int> exact_counts(const Vector& p, int total) {
  const auto k = static_cast<std::size_t>(p.size());
  std::vector<int> counts(k);
  std::vector<std::pair<double, std::size_t>> rem;
  int assigned = 0;
  for (std::size_t j = 0; j < k; ++j) {
    const double exact = p(static_cast<Eigen::Index>(j)) * total;
    counts[j] = static_cast<int>(std::floor(exact + 1e-9));
    assigned += counts[j];
    rem.emplace_back(exact - counts[j], j);
  }
  std::stable_sort(rem.begin(), rem.end(), [](auto a, auto b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < total; ++r, ++assigned) ++counts[rem[r % k].second];
  return counts;
}

}  // namespace detail

inline LabeledDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const int k_count = spec.K();
  const int dim = spec.D();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<Matrix> chol;
  for (const auto& s : spec.covariances) chol.push_back(Eigen::LLT<Matrix>(s).matrixL());

  int total = 0;
  for (int c : spec.node_counts) total += c;
  LabeledDataset ds;
  ds.points.resize(total, dim);
  ds.node_count = spec.nodes();
  ds.labels.reserve(static_cast<std::size_t>(total));
  ds.node_of.reserve(static_cast<std::size_t>(total));

  Eigen::Index row = 0;
  for (int i = 0; i < spec.nodes(); ++i) {
    const Vector& p = spec.node_proportions.empty() ? spec.weights
                                                    : spec.node_proportions[static_cast<std::size_t>(i)];
    const int count = spec.node_counts[static_cast<std::size_t>(i)];
    std::vector<int> labels;
    if (spec.exact_proportions) {
      const auto counts = detail::exact_counts(p, count);
      for (int k = 0; k < k_count; ++k) labels.insert(labels.end(), static_cast<std::size_t>(counts[static_cast<std::size_t>(k)]), k);
      std::shuffle(labels.begin(), labels.end(), rng);
    } else {
      std::discrete_distribution<int> pick(p.data(), p.data() + p.size());
      for (int j = 0; j < count; ++j) labels.push_back(pick(rng));
    }
    for (int label : labels) {
      Vector z(dim);
      for (int d = 0; d < dim; ++d) z(d) = gauss(rng);
      const auto ul = static_cast<std::size_t>(label);
      ds.points.row(row++) = (spec.means[ul] + chol[ul] * z).transpose();
      ds.labels.push_back(label);
      ds.node_of.push_back(i);
    }
  }
  return ds;
}

/// Complete-data conjugate posterior: pooled points, one-hot responsibilities
/// from the true labels, no replication.
inline GlobalNaturalParams ground_truth_posterior(const LabeledDataset& data,
                                                  const GmmModelConfig& model) {
  if (!data.has_labels()) throw std::invalid_argument("ground_truth_posterior: dataset has no labels");
  detail::require_shape(data.D() == model.D(), "ground_truth_posterior: data dimension != D");
  Responsibilities r{Matrix::Zero(data.size(), model.K())};
  for (Eigen::Index j = 0; j < data.size(); ++j) {
    const int l = data.labels[static_cast<std::size_t>(j)];
    detail::require_shape(l >= 0 && l < model.K(), "ground_truth_posterior: label out of range");
    r.r(j, l) = 1.0;
  }
  return local_vbm_optimum(NodeDataset{data.points, 0}, r, model.with_replication(1));
}

}  // namespace dvb
