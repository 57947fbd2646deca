#pragma once

// Experiment configuration (JSON), setup of network/data/truth/init, and the
// CSV writers used by the command-line tool.

#include "dvb/algorithms.hpp"
#include "dvb/harness/dataset.hpp"
#include "dvb/harness/metrics.hpp"
#include "dvb/harness/synthetic.hpp"
#include "dvb/network.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace dvb {

/// Bad or inconsistent configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NetworkSpec {
  int nodes = 50;
  double side = 3.5;
  double radius = 0.8;
  std::optional<std::filesystem::path> edge_list;
};

struct DataSpec {
  std::string source = "imbalanced";  // imbalanced | mixture | csv
  int points_per_node = 100;          // imbalanced
  int min_points = 40;                // mixture: N_i uniform in [min, max]
  int max_points = 160;
  std::filesystem::path csv;          // csv
  bool has_labels = true;
  PartitionPolicy partition = PartitionPolicy::UniformRandom;
};

// Component means start at center + scale * sd (elementwise) * z_k, z_k
// standard normal; sd is the pooled per-dimension standard deviation.
struct InitSpec {
  std::string center = "data-mean";  // data-mean | prior
  double scale = 1.0;
  bool per_node = false;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  NetworkSpec network;
  DataSpec data;
  int K = 3;
  GmmPrior prior;
  InitSpec init;
  std::vector<AlgoConfig> algorithms;
  std::filesystem::path out = "out";
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::string& where,
                                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : j.items())
    if (!ok.count(item.key())) throw ConfigError(where + ": unknown key '" + item.key() + "'");
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

inline Vector json_vector(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(where + ": expected an array of numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline Matrix json_matrix(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Matrix m(rows, rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    Vector row = json_vector(j[static_cast<std::size_t>(r)], where);
    if (row.size() != rows) throw ConfigError(where + ": matrix must be square");
    m.row(r) = row.transpose();
  }
  return m;
}

inline WeightRule parse_weight_rule(const std::string& s) {
  if (s == "nearest-neighbor") return WeightRule::NearestNeighbor;
  if (s == "metropolis") return WeightRule::Metropolis;
  throw ConfigError("unknown weight_rule '" + s + "' (expected nearest-neighbor or metropolis)");
}

// splitmix64 finalizer; separates the RNG streams drawn from one seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

enum SeedStream : std::uint64_t { kNetworkStream = 0, kDataStream = 1, kPartitionStream = 2, kInitStream = 3 };

}  // namespace detail

/// Relative paths inside the config resolve against base_dir.
inline ExperimentConfig parse_experiment_config(const nlohmann::json& j,
                                                const std::filesystem::path& base_dir = {}) {
  using detail::get_or;
  detail::reject_unknown_keys(j, "config", {"seed", "network", "data", "model", "init", "algorithms",
                                            "max_iters", "eval_stride", "weight_rule", "out"});
  ExperimentConfig c;
  c.seed = get_or<std::uint64_t>(j, "seed", "config", 1);
  c.out = get_or<std::string>(j, "out", "config", "out");
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };

  if (j.contains("network")) {
    const auto& n = j["network"];
    detail::reject_unknown_keys(n, "network", {"nodes", "side", "radius", "edge_list"});
    c.network.nodes = get_or<int>(n, "nodes", "network", c.network.nodes);
    c.network.side = get_or<double>(n, "side", "network", c.network.side);
    c.network.radius = get_or<double>(n, "radius", "network", c.network.radius);
    if (n.contains("edge_list")) c.network.edge_list = resolve(get_or<std::string>(n, "edge_list", "network", ""));
    if (c.network.nodes < 1) throw ConfigError("network.nodes must be >= 1");
    if (!(c.network.side > 0 && c.network.radius > 0))
      throw ConfigError("network.side and network.radius must be positive");
  }

  if (j.contains("data")) {
    const auto& d = j["data"];
    detail::reject_unknown_keys(d, "data", {"source", "points_per_node", "min_points", "max_points",
                                            "csv", "has_labels", "partition"});
    c.data.source = get_or<std::string>(d, "source", "data", c.data.source);
    c.data.points_per_node = get_or<int>(d, "points_per_node", "data", c.data.points_per_node);
    c.data.min_points = get_or<int>(d, "min_points", "data", c.data.min_points);
    c.data.max_points = get_or<int>(d, "max_points", "data", c.data.max_points);
    c.data.has_labels = get_or<bool>(d, "has_labels", "data", c.data.has_labels);
    if (d.contains("csv")) c.data.csv = resolve(get_or<std::string>(d, "csv", "data", ""));
    try {
      c.data.partition = parse_partition_policy(get_or<std::string>(d, "partition", "data", "uniform-random"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("data.partition: ") + e.what());
    }
    if (c.data.source != "imbalanced" && c.data.source != "mixture" && c.data.source != "csv")
      throw ConfigError("data.source must be imbalanced, mixture or csv");
    if (c.data.source == "csv" && c.data.csv.empty()) throw ConfigError("data.csv is required when source is csv");
    if (c.data.points_per_node < 0 || c.data.min_points < 0 || c.data.max_points < c.data.min_points)
      throw ConfigError("data: point counts must satisfy 0 <= min_points <= max_points");
  }

  if (j.contains("model")) {
    const auto& m = j["model"];
    detail::reject_unknown_keys(m, "model", {"K", "alpha0", "beta0", "nu0", "mu0", "W0"});
    c.K = get_or<int>(m, "K", "model", c.K);
    c.prior.alpha0 = get_or<double>(m, "alpha0", "model", c.prior.alpha0);
    c.prior.beta0 = get_or<double>(m, "beta0", "model", c.prior.beta0);
    if (m.contains("nu0")) c.prior.nu0 = get_or<double>(m, "nu0", "model", 0.0);
    if (m.contains("mu0")) c.prior.mu0 = detail::json_vector(m["mu0"], "model.mu0");
    if (m.contains("W0")) c.prior.W0 = detail::json_matrix(m["W0"], "model.W0");
    if (c.K < 1) throw ConfigError("model.K must be >= 1");
  }

  if (j.contains("init")) {
    const auto& i = j["init"];
    detail::reject_unknown_keys(i, "init", {"center", "scale", "per_node"});
    c.init.center = get_or<std::string>(i, "center", "init", c.init.center);
    c.init.scale = get_or<double>(i, "scale", "init", c.init.scale);
    c.init.per_node = get_or<bool>(i, "per_node", "init", c.init.per_node);
    if (c.init.center != "data-mean" && c.init.center != "prior")
      throw ConfigError("init.center must be data-mean or prior");
    if (!(c.init.scale >= 0)) throw ConfigError("init.scale must be >= 0");
  }

  const int max_iters = get_or<int>(j, "max_iters", "config", 3000);
  const int stride = get_or<int>(j, "eval_stride", "config", 1);
  const WeightRule rule = detail::parse_weight_rule(get_or<std::string>(j, "weight_rule", "config", "nearest-neighbor"));
  if (!j.contains("algorithms") || !j["algorithms"].is_array() || j["algorithms"].empty())
    throw ConfigError("config: 'algorithms' must be a non-empty array");
  for (const auto& a : j["algorithms"]) {
    detail::reject_unknown_keys(a, "algorithms[]", {"kind", "tau", "d0", "rho", "xi", "max_iters", "weight_rule"});
    AlgoConfig ac;
    try {
      ac.kind = parse_algo_kind(get_or<std::string>(a, "kind", "algorithms[]", ""));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("algorithms[].kind: ") + e.what());
    }
    ac.tau = get_or<double>(a, "tau", "algorithms[]", ac.tau);
    ac.d0 = get_or<double>(a, "d0", "algorithms[]", ac.d0);
    ac.rho = get_or<double>(a, "rho", "algorithms[]", ac.rho);
    ac.xi = get_or<double>(a, "xi", "algorithms[]", ac.xi);
    ac.max_iters = get_or<int>(a, "max_iters", "algorithms[]", max_iters);
    ac.weight_rule = a.contains("weight_rule")
                         ? detail::parse_weight_rule(get_or<std::string>(a, "weight_rule", "algorithms[]", ""))
                         : rule;
    ac.eval_stride = stride;
    try {
      ac.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string(to_string(ac.kind)) + ": " + e.what());
    }
    c.algorithms.push_back(ac);
  }
  return c;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "': " + e.what());
  }
  return parse_experiment_config(j, path.parent_path());
}

// ---------------------------------------------------------------------------

inline Network build_network(const ExperimentConfig& c) {
  if (c.network.edge_list) {
    std::ifstream is(*c.network.edge_list);
    if (!is) throw ConfigError("cannot open edge list '" + c.network.edge_list->string() + "'");
    return read_edge_list(is);
  }
  return generate_geometric_graph(c.network.nodes, c.network.side, c.network.radius,
                                  detail::derive_seed(c.seed, detail::kNetworkStream));
}

/// Synthetic data from the reference mixture, or a CSV file distributed over
/// n nodes. A CSV with a node column keeps its assignment.
inline LabeledDataset build_dataset(const ExperimentConfig& c, int n) {
  const std::uint64_t seed = detail::derive_seed(c.seed, detail::kDataStream);
  if (c.data.source == "csv") {
    LabeledDataset ds = load_csv_dataset(c.data.csv, c.data.has_labels);
    if (ds.node_count <= 1)
      ds = partition_to_nodes(std::move(ds), n, c.data.partition,
                              detail::derive_seed(c.seed, detail::kPartitionStream));
    if (ds.node_count > n)
      throw ConfigError("dataset assigns points to " + std::to_string(ds.node_count) +
                        " nodes but the network has " + std::to_string(n));
    ds.node_count = n;
    ds.validate(c.K);
    return ds;
  }
  SyntheticSpec spec = imbalanced_reference_spec(n, c.data.points_per_node, seed);
  if (c.data.source == "mixture") {
    std::mt19937_64 rng(detail::derive_seed(c.seed, detail::kDataStream + 16));
    std::uniform_int_distribution<int> size(c.data.min_points, c.data.max_points);
    for (auto& count : spec.node_counts) count = size(rng);
    spec.node_proportions.clear();
    spec.exact_proportions = false;
  }
  if (spec.K() != c.K)
    throw ConfigError("synthetic data has K=" + std::to_string(spec.K()) + " but model.K=" + std::to_string(c.K));
  return generate_synthetic(spec);
}

inline std::vector<GlobalNaturalParams> build_init(const LabeledDataset& ds, const GmmModelConfig& model,
                                                   const InitSpec& spec, std::uint64_t seed, int n) {
  const int dim = model.D();
  Vector center = model.mu0();
  Vector sd = Vector::Ones(dim);
  if (ds.size() > 0) {
    const Vector mean = ds.points.colwise().mean().transpose();
    sd = (ds.points.rowwise() - mean.transpose()).array().square().colwise().mean().sqrt().transpose();
    for (int d = 0; d < dim; ++d)
      if (!(sd(d) > 0)) sd(d) = 1.0;
    if (spec.center == "data-mean") center = mean;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<GlobalNaturalParams> out;
  for (int i = 0; i < (spec.per_node ? n : 1); ++i) {
    GmmHyperParams h = model.prior_hyper();
    for (auto& m : h.m) {
      Vector z(dim);
      for (int d = 0; d < dim; ++d) z(d) = gauss(rng);
      m = center + spec.scale * sd.cwiseProduct(z);
    }
    out.push_back(hyper_to_natural(h));
  }
  return out;
}

struct Experiment {
  Network net;
  LabeledDataset data;
  GmmModelConfig model;
  std::vector<NodeDataset> nodes;
  std::optional<GlobalNaturalParams> truth;
  std::vector<GlobalNaturalParams> init;
};

inline Experiment build_experiment(const ExperimentConfig& c) {
  Network net = build_network(c);
  LabeledDataset data = build_dataset(c, net.size());
  GmmModelConfig model(c.K, data.D(), net.size(), c.prior);
  std::optional<GlobalNaturalParams> truth;
  if (data.has_labels()) truth = ground_truth_posterior(data, model);
  auto nodes = data.node_datasets();
  auto init = build_init(data, model, c.init, detail::derive_seed(c.seed, detail::kInitStream), net.size());
  return Experiment{std::move(net), std::move(data), std::move(model), std::move(nodes), std::move(truth),
                    std::move(init)};
}

struct AlgoOutcome {
  AlgoConfig cfg;
  RunResult result;
  std::optional<double> accuracy;
};

inline std::optional<double> labeled_accuracy(const Experiment& ex, std::span<const NodeState> states) {
  if (!ex.data.has_labels()) return std::nullopt;
  std::vector<Responsibilities> r;
  for (const auto& s : states) r.push_back(s.r);
  return clustering_accuracy(r, ex.data.node_labels());
}

/// Every algorithm on the same network, data and initialization.
inline std::vector<AlgoOutcome> run_comparison(const Experiment& ex, std::span<const AlgoConfig> algos) {
  std::vector<AlgoOutcome> out;
  for (const auto& a : algos) {
    AlgoOutcome o{a, run(a, ex.model, ex.net, ex.nodes, ex.init, ex.truth), std::nullopt};
    o.accuracy = labeled_accuracy(ex, o.result.states);
    out.push_back(std::move(o));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV output

inline constexpr const char* kTraceHeader = "iter,algo,mean_kl,std_kl,consensus_disagreement,elapsed_ms";

/// elapsed_ms is written as 0 unless with_timing, keeping files reproducible.
inline std::string trace_csv(std::span<const RunTrace> traces, bool with_timing) {
  using detail::format_double;
  std::string s = std::string(kTraceHeader) + '\n';
  for (const auto& tr : traces)
    for (const auto& r : tr.records) {
      s += std::to_string(r.iter);
      s += ',';
      s += to_string(tr.kind);
      s += ',' + format_double(r.mean_kl) + ',' + format_double(r.std_kl) + ',' +
           format_double(r.consensus_disagreement) + ',' + format_double(with_timing ? r.elapsed_ms : 0.0) + '\n';
    }
  return s;
}

/// One row per (algorithm, node): algo,node,phi0..phi{L-1} in flattened layout.
inline std::string final_state_csv(std::span<const AlgoOutcome> runs) {
  std::string s = "algo,node";
  if (!runs.empty() && !runs.front().result.states.empty()) {
    const auto len = flatten(runs.front().result.states.front().phi).size();
    for (Eigen::Index p = 0; p < len; ++p) s += ",phi" + std::to_string(p);
  }
  s += '\n';
  for (const auto& o : runs)
    for (std::size_t i = 0; i < o.result.states.size(); ++i) {
      s += std::string(to_string(o.cfg.kind)) + ',' + std::to_string(i);
      for (double v : flatten(o.result.states[i].phi)) s += ',' + detail::format_double(v);
      s += '\n';
    }
  return s;
}

struct FinalState {
  AlgoKind kind;
  std::vector<GlobalNaturalParams> phi;  // per node
};

inline std::vector<FinalState> read_final_state_csv(std::istream& is, int k_count, int dim,
                                                    const std::string& source) {
  std::string line;
  if (!std::getline(is, line)) throw CsvParseError(source + ": empty file");
  const auto expected = flat_size(k_count, dim) + 2;
  if (detail::split_csv_line(line).size() != expected)
    throw CsvParseError(source + ": header does not match K=" + std::to_string(k_count) + ", D=" + std::to_string(dim));
  std::vector<FinalState> out;
  int row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != expected)
      throw CsvParseError(source + ": row " + std::to_string(row) + " has " + std::to_string(f.size()) +
                          " columns, expected " + std::to_string(expected));
    AlgoKind kind;
    try {
      kind = parse_algo_kind(f[0]);
    } catch (const std::invalid_argument& e) {
      throw CsvParseError(source + ": row " + std::to_string(row) + ": " + e.what());
    }
    if (out.empty() || out.back().kind != kind) out.push_back({kind, {}});
    Vector v(static_cast<Eigen::Index>(expected - 2));
    for (std::size_t c = 2; c < f.size(); ++c)
      if (!detail::parse_double(f[c], v(static_cast<Eigen::Index>(c - 2))))
        throw CsvParseError(source + ": row " + std::to_string(row) + ", column " + std::to_string(c + 1) +
                            ": not a number");
    out.back().phi.push_back(unflatten(v, k_count, dim));
  }
  return out;
}

}  // namespace dvb
