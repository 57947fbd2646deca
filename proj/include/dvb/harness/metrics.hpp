#pragma once

#include "dvb/algorithms.hpp"
#include "dvb/assignment.hpp"

#include <span>
#include <utility>
#include <vector>

namespace dvb {

/// Mean and population standard deviation of the aligned KL cost
/// KL(q(phi_i) || p(truth)) over all nodes.
inline std::pair<double, double> mean_kl_cost(std::span<const NodeState> states,
                                              const GlobalNaturalParams& truth) {
  if (states.empty()) throw std::invalid_argument("mean_kl_cost: no node states");
  std::vector<double> costs;
  costs.reserve(states.size());
  for (const auto& s : states) costs.push_back(aligned_kl(s.phi, truth));
  return mean_and_std(costs);
}

/// Hard assignment: argmax over each row, first index on ties.
inline std::vector<int> hard_assignments(const Responsibilities& r) {
  std::vector<int> out(static_cast<std::size_t>(r.r.rows()));
  for (Eigen::Index j = 0; j < r.r.rows(); ++j) {
    int best = 0;
    for (Eigen::Index k = 1; k < r.r.cols(); ++k)
      if (r.r(j, k) > r.r(j, best)) best = static_cast<int>(k);
    out[static_cast<std::size_t>(j)] = best;
  }
  return out;
}

/// Fraction of points whose hard cluster maps to their true label under the
/// best cluster-to-label matching, pooled over all nodes.
inline double clustering_accuracy(std::span<const Responsibilities> r_all,
                                  std::span<const std::vector<int>> labels) {
  detail::require_shape(r_all.size() == labels.size(), "clustering_accuracy: node count mismatch");
  int clusters = 0;
  int classes = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < r_all.size(); ++i) {
    detail::require_shape(static_cast<std::size_t>(r_all[i].r.rows()) == labels[i].size(),
                          "clustering_accuracy: label count != responsibility rows at node " +
                              std::to_string(i));
    clusters = std::max(clusters, static_cast<int>(r_all[i].r.cols()));
    for (int l : labels[i]) {
      detail::require_shape(l >= 0, "clustering_accuracy: negative label");
      classes = std::max(classes, l + 1);
    }
    total += labels[i].size();
  }
  if (total == 0) throw std::invalid_argument("clustering_accuracy: no points");
  const int size = std::max(clusters, classes);
  Matrix confusion = Matrix::Zero(size, size);
  for (std::size_t i = 0; i < r_all.size(); ++i) {
    const auto hard = hard_assignments(r_all[i]);
    for (std::size_t j = 0; j < hard.size(); ++j) confusion(hard[j], labels[i][j]) += 1.0;
  }
  const auto match = min_cost_assignment(-confusion);
  double correct = 0.0;
  for (int c = 0; c < size; ++c) correct += confusion(c, match[static_cast<std::size_t>(c)]);
  return correct / static_cast<double>(total);
}

}  // namespace dvb
