#pragma once

// Labeled point sets, node partitioning and CSV ingestion.

#include "dvb/gmm.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace dvb {

struct LabeledDataset {
  Matrix points;             // rows are points
  std::vector<int> labels;   // empty when unlabeled
  std::vector<int> node_of;  // node index of every point
  int node_count = 0;

  [[nodiscard]] Eigen::Index size() const { return points.rows(); }
  [[nodiscard]] int D() const { return static_cast<int>(points.cols()); }
  [[nodiscard]] bool has_labels() const { return !labels.empty(); }

  void validate(int k = 0) const {
    detail::require_shape(points.allFinite(), "dataset: non-finite point");
    detail::require_shape(node_of.size() == static_cast<std::size_t>(size()),
                          "dataset: node assignment must cover every point");
    for (int v : node_of)
      detail::require_shape(v >= 0 && v < node_count, "dataset: node index out of range");
    if (has_labels()) {
      detail::require_shape(labels.size() == static_cast<std::size_t>(size()),
                            "dataset: one label per point required");
      for (int l : labels)
        detail::require_shape(l >= 0 && (k <= 0 || l < k), "dataset: label out of range");
    }
  }

  /// Points of every node in original row order.
  [[nodiscard]] std::vector<NodeDataset> node_datasets() const {
    std::vector<std::vector<Eigen::Index>> rows(static_cast<std::size_t>(node_count));
    for (Eigen::Index r = 0; r < size(); ++r) rows[static_cast<std::size_t>(node_of[static_cast<std::size_t>(r)])].push_back(r);
    std::vector<NodeDataset> out(static_cast<std::size_t>(node_count));
    for (int i = 0; i < node_count; ++i) {
      const auto& idx = rows[static_cast<std::size_t>(i)];
      auto& nd = out[static_cast<std::size_t>(i)];
      nd.node_id = i;
      nd.points.resize(static_cast<Eigen::Index>(idx.size()), points.cols());
      for (std::size_t r = 0; r < idx.size(); ++r) nd.points.row(static_cast<Eigen::Index>(r)) = points.row(idx[r]);
    }
    return out;
  }

  /// Labels grouped per node, same order as node_datasets().
  [[nodiscard]] std::vector<std::vector<int>> node_labels() const {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(node_count));
    for (Eigen::Index r = 0; r < size(); ++r)
      out[static_cast<std::size_t>(node_of[static_cast<std::size_t>(r)])].push_back(labels[static_cast<std::size_t>(r)]);
    return out;
  }
};

enum class PartitionPolicy { UniformRandom, Contiguous };

inline PartitionPolicy parse_partition_policy(std::string_view s) {
  if (s == "uniform-random") return PartitionPolicy::UniformRandom;
  if (s == "contiguous") return PartitionPolicy::Contiguous;
  throw std::invalid_argument("unknown partition policy '" + std::string(s) +
                              "' (expected uniform-random or contiguous)");
}

/// uniform-random: shuffle with the seed and deal points round-robin, so node
/// sizes differ by at most one. contiguous: consecutive blocks of rows.
inline LabeledDataset partition_to_nodes(LabeledDataset ds, int n, PartitionPolicy policy,
                                         std::uint64_t seed) {
  detail::require_shape(n >= 1, "partition_to_nodes: n must be >= 1");
  const auto count = static_cast<std::size_t>(ds.size());
  ds.node_count = n;
  ds.node_of.assign(count, 0);
  if (policy == PartitionPolicy::UniformRandom) {
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t p = 0; p < count; ++p) ds.node_of[order[p]] = static_cast<int>(p % static_cast<std::size_t>(n));
  } else {
    for (std::size_t p = 0; p < count; ++p)
      ds.node_of[p] = static_cast<int>(p * static_cast<std::size_t>(n) / std::max<std::size_t>(count, 1));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
      field.remove_suffix(1);
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

/// Writes to path.tmp and renames over path.
inline void atomic_write(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    os << contents;
    if (!os) throw std::runtime_error("write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

class CsvParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numeric CSV, one point per row. An optional header row is skipped; a header
/// column named "node" is read as the node assignment. With has_labels the
/// last remaining column holds integer labels.
inline LabeledDataset load_csv_dataset(std::istream& is, bool has_labels,
                                       const std::string& source = "<stream>") {
  std::string line;
  int row_no = 0;
  int node_col = -1;
  std::size_t width = 0;
  std::vector<std::vector<double>> rows;
  LabeledDataset ds;
  bool first = true;
  while (std::getline(is, line)) {
    ++row_no;
    if (line.empty() || line == "\r") continue;
    auto fields = detail::split_csv_line(line);
    if (first) {
      first = false;
      double probe = 0;
      if (!detail::parse_double(fields[0], probe)) {
        for (std::size_t c = 0; c < fields.size(); ++c)
          if (fields[c] == "node") node_col = static_cast<int>(c);
        width = fields.size();
        continue;
      }
    }
    if (width == 0) width = fields.size();
    if (fields.size() != width)
      throw CsvParseError(source + ": row " + std::to_string(row_no) + " has " +
                          std::to_string(fields.size()) + " columns, expected " + std::to_string(width));
    std::vector<double> vals(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (!detail::parse_double(fields[c], vals[c]) || !std::isfinite(vals[c]))
        throw CsvParseError(source + ": row " + std::to_string(row_no) + ", column " +
                            std::to_string(c + 1) + ": not a finite number '" +
                            std::string(fields[c]) + "'");
    }
    rows.push_back(std::move(vals));
  }
  const int feature_cols = static_cast<int>(width) - (node_col >= 0 ? 1 : 0) - (has_labels ? 1 : 0);
  if (rows.empty()) throw CsvParseError(source + ": no data rows");
  if (feature_cols < 1) throw CsvParseError(source + ": no feature columns");

  ds.points.resize(static_cast<Eigen::Index>(rows.size()), feature_cols);
  ds.node_of.assign(rows.size(), 0);
  int max_node = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    int f = 0;
    std::vector<double> rest;
    for (std::size_t c = 0; c < width; ++c) {
      if (static_cast<int>(c) == node_col) {
        const double v = rows[r][c];
        if (v < 0 || v != std::floor(v))
          throw CsvParseError(source + ": row " + std::to_string(r + 1) + ": node id must be a non-negative integer");
        ds.node_of[r] = static_cast<int>(v);
        max_node = std::max(max_node, ds.node_of[r]);
      } else if (f < feature_cols) {
        ds.points(static_cast<Eigen::Index>(r), f++) = rows[r][c];
      } else {
        rest.push_back(rows[r][c]);
      }
    }
    if (has_labels) {
      const double v = rest.at(0);
      if (v < 0 || v != std::floor(v))
        throw CsvParseError(source + ": row " + std::to_string(r + 1) + ": label must be a non-negative integer");
      ds.labels.push_back(static_cast<int>(v));
    }
  }
  ds.node_count = node_col >= 0 ? max_node + 1 : 1;
  return ds;
}

inline LabeledDataset load_csv_dataset(const std::filesystem::path& path, bool has_labels) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open dataset '" + path.string() + "'");
  return load_csv_dataset(is, has_labels, path.string());
}

/// Header x0..x{D-1}[,label],node followed by one row per point.
inline std::string dataset_to_csv(const LabeledDataset& ds) {
  std::string out;
  for (int c = 0; c < ds.D(); ++c) out += (c ? ",x" : "x") + std::to_string(c);
  if (ds.has_labels()) out += ",label";
  out += ",node\n";
  for (Eigen::Index r = 0; r < ds.size(); ++r) {
    for (int c = 0; c < ds.D(); ++c) {
      if (c) out += ',';
      out += detail::format_double(ds.points(r, c));
    }
    if (ds.has_labels()) out += ',' + std::to_string(ds.labels[static_cast<std::size_t>(r)]);
    out += ',' + std::to_string(ds.node_of[static_cast<std::size_t>(r)]) + '\n';
  }
  return out;
}

}  // namespace dvb
