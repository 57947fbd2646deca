#pragma once

// Undirected sensor-network topologies and diffusion combination weights.

#include "dvb/core.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace dvb {

class Network {
 public:
  Network() = default;

  /// Builds from an edge list; rejects self-loops and out-of-range ids.
  /// Duplicate edges are merged.
  Network(int n, const std::vector<std::pair<int, int>>& edges,
          std::optional<Matrix> positions = std::nullopt)
      : adjacency_(static_cast<std::size_t>(n)), positions_(std::move(positions)) {
    detail::require_shape(n >= 0, "Network: node count must be >= 0");
    for (auto [u, v] : edges) {
      detail::require_shape(u >= 0 && u < n && v >= 0 && v < n,
                            "Network: edge endpoint out of range");
      detail::require_shape(u != v, "Network: self-loop " + std::to_string(u));
      adjacency_[static_cast<std::size_t>(u)].push_back(v);
      adjacency_[static_cast<std::size_t>(v)].push_back(u);
    }
    for (auto& nbrs : adjacency_) {
      std::sort(nbrs.begin(), nbrs.end());
      nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    }
    if (positions_) {
      detail::require_shape(positions_->rows() == n && positions_->cols() == 2,
                            "Network: positions must be n x 2");
    }
  }

  [[nodiscard]] int size() const { return static_cast<int>(adjacency_.size()); }
  [[nodiscard]] const std::vector<int>& neighbors(int i) const {
    return adjacency_[static_cast<std::size_t>(i)];
  }
  [[nodiscard]] int degree(int i) const { return static_cast<int>(neighbors(i).size()); }
  [[nodiscard]] const std::optional<Matrix>& positions() const { return positions_; }

  [[nodiscard]] std::size_t edge_count() const {
    std::size_t s = 0;
    for (const auto& nbrs : adjacency_) s += nbrs.size();
    return s / 2;
  }

  /// Edges (u, v) with u < v in lexicographic order.
  [[nodiscard]] std::vector<std::pair<int, int>> edges() const {
    std::vector<std::pair<int, int>> out;
    for (int u = 0; u < size(); ++u)
      for (int v : neighbors(u))
        if (u < v) out.emplace_back(u, v);
    return out;
  }

  [[nodiscard]] double mean_degree() const {
    return size() == 0 ? 0.0 : 2.0 * static_cast<double>(edge_count()) / size();
  }

 private:
  std::vector<std::vector<int>> adjacency_;
  std::optional<Matrix> positions_;
};

inline bool is_connected(const Network& net) {
  const int n = net.size();
  if (n <= 1) return true;
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int reached = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v : net.neighbors(u)) {
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        ++reached;
        stack.push_back(v);
      }
    }
  }
  return reached == n;
}

inline constexpr int kMaxGraphAttempts = 1000;

/// Uniform placement in a side x side square; edge iff distance <= radius.
/// Redraws all positions from the same RNG stream until connected.
inline Network generate_geometric_graph(int n, double side, double radius, std::uint64_t seed,
                                        int max_attempts = kMaxGraphAttempts) {
  detail::require_shape(n >= 1, "generate_geometric_graph: n must be >= 1");
  detail::require_domain(side > 0.0 && radius > 0.0,
                         "generate_geometric_graph: side and radius must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(0.0, side);
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Matrix pos(n, 2);
    for (int i = 0; i < n; ++i) {
      pos(i, 0) = coord(rng);
      pos(i, 1) = coord(rng);
    }
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if ((pos.row(i) - pos.row(j)).norm() <= radius) edges.emplace_back(i, j);
    Network net(n, edges, pos);
    if (is_connected(net)) return net;
  }
  throw std::runtime_error("could not generate connected graph after " +
                           std::to_string(max_attempts) + " attempts");
}

/// Sparse row-stochastic combination matrix; row i lists (j, w_ij) for j in
/// the closed neighborhood of i, sorted by j.
struct CombinationWeights {
  std::vector<std::vector<std::pair<int, double>>> rows;

  [[nodiscard]] int size() const { return static_cast<int>(rows.size()); }

  [[nodiscard]] double at(int i, int j) const {
    for (auto [col, w] : rows[static_cast<std::size_t>(i)])
      if (col == j) return w;
    return 0.0;
  }

  [[nodiscard]] Matrix dense() const {
    Matrix m = Matrix::Zero(size(), size());
    for (int i = 0; i < size(); ++i)
      for (auto [j, w] : rows[static_cast<std::size_t>(i)]) m(i, j) = w;
    return m;
  }
};

enum class WeightRule { NearestNeighbor, Metropolis };

namespace detail {

inline std::vector<int> closed_neighborhood(const Network& net, int i) {
  std::vector<int> out = net.neighbors(i);
  out.insert(std::lower_bound(out.begin(), out.end(), i), i);
  return out;
}

}  // namespace detail

/// w_ij = 1 / (|N_i| + 1) on the closed neighborhood.
inline CombinationWeights nearest_neighbor_weights(const Network& net) {
  CombinationWeights w;
  w.rows.resize(static_cast<std::size_t>(net.size()));
  for (int i = 0; i < net.size(); ++i) {
    const double v = 1.0 / (net.degree(i) + 1.0);
    for (int j : detail::closed_neighborhood(net, i)) w.rows[static_cast<std::size_t>(i)].emplace_back(j, v);
  }
  return w;
}

/// w_ij = 1 / (1 + max(deg_i, deg_j)) on edges, self weight takes the rest.
inline CombinationWeights metropolis_weights(const Network& net) {
  CombinationWeights w;
  w.rows.resize(static_cast<std::size_t>(net.size()));
  for (int i = 0; i < net.size(); ++i) {
    double off = 0.0;
    auto& row = w.rows[static_cast<std::size_t>(i)];
    for (int j : net.neighbors(i)) {
      const double v = 1.0 / (1.0 + std::max(net.degree(i), net.degree(j)));
      off += v;
      row.emplace_back(j, v);
    }
    row.emplace_back(i, 1.0 - off);
    std::sort(row.begin(), row.end());
  }
  return w;
}

inline CombinationWeights combination_weights(const Network& net, WeightRule rule) {
  return rule == WeightRule::Metropolis ? metropolis_weights(net) : nearest_neighbor_weights(net);
}

// ---------------------------------------------------------------------------
// Edge-list text format:
//
//   # nodes <n>
//   u v          (one undirected edge per line, 0-indexed)
//   ...
//   positions
//   x y          (one line per node, optional section)

inline void write_edge_list(std::ostream& os, const Network& net) {
  os << "# nodes " << net.size() << '\n';
  for (auto [u, v] : net.edges()) os << u << ' ' << v << '\n';
  if (net.positions()) {
    os << "positions\n";
    os.precision(17);
    const Matrix& p = *net.positions();
    for (Eigen::Index i = 0; i < p.rows(); ++i) os << p(i, 0) << ' ' << p(i, 1) << '\n';
  }
}

inline Network read_edge_list(std::istream& is) {
  std::vector<std::pair<int, int>> edges;
  std::vector<std::pair<double, double>> pos;
  int declared = -1;
  int max_id = -1;
  bool in_positions = false;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line[0] == '#') {
      std::string hash, key;
      int n = 0;
      if ((ls >> hash >> key >> n) && key == "nodes") declared = n;
      continue;
    }
    if (line.rfind("positions", 0) == 0) {
      in_positions = true;
      continue;
    }
    if (in_positions) {
      double x = 0, y = 0;
      if (!(ls >> x >> y)) throw std::runtime_error("edge list line " + std::to_string(line_no) + ": expected 'x y'");
      pos.emplace_back(x, y);
    } else {
      int u = 0, v = 0;
      if (!(ls >> u >> v)) throw std::runtime_error("edge list line " + std::to_string(line_no) + ": expected 'u v'");
      edges.emplace_back(u, v);
      max_id = std::max({max_id, u, v});
    }
  }
  int n = declared >= 0 ? declared : std::max(max_id + 1, static_cast<int>(pos.size()));
  std::optional<Matrix> positions;
  if (!pos.empty()) {
    if (static_cast<int>(pos.size()) != n)
      throw std::runtime_error("edge list: positions section has " + std::to_string(pos.size()) +
                               " rows, expected " + std::to_string(n));
    Matrix p(n, 2);
    for (int i = 0; i < n; ++i) {
      p(i, 0) = pos[static_cast<std::size_t>(i)].first;
      p(i, 1) = pos[static_cast<std::size_t>(i)].second;
    }
    positions = std::move(p);
  }
  return Network(n, edges, positions);
}

}  // namespace dvb
