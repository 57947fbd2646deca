// dvbsim: generate networks and data, run the distributed VB algorithms and
// record traces.
//
//   dvbsim gen-net  [--config f] [--seed s] [--out dir]
//   dvbsim gen-data [--config f] [--seed s] [--out dir]
//   dvbsim run      [--config f] [--algo name] [--trials n] [--timing]
//   dvbsim compare  [--config f] [--trials n] [--timing]
//   dvbsim eval     [--config f] [--state final_state.csv]
//
// Exit codes: 0 ok, 1 runtime or domain failure, 2 usage or config error.

#include "dvb/dvb.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace dvb;

namespace {

ExperimentConfig default_config() {
  auto j = nlohmann::json::parse(R"({
    "algorithms": [{"kind": "cvb"}, {"kind": "nsg_dvb"}, {"kind": "dsvb"}, {"kind": "dvb_admm"}, {"kind": "noncoop"}]
  })");
  return parse_experiment_config(j);
}

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> max_iters;
  int trials = 1;
  bool timing = false;
  std::string algo;
  std::string state;
};

ExperimentConfig resolve(const Options& o) {
  if (!o.config.empty() && !fs::exists(o.config))
    throw ConfigError("config file '" + o.config + "' does not exist");
  ExperimentConfig c = o.config.empty() ? default_config() : load_experiment_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out = *o.out;
  if (o.max_iters) {
    if (*o.max_iters < 0) throw ConfigError("--max-iters must be >= 0");
    for (auto& a : c.algorithms) a.max_iters = *o.max_iters;
  }
  if (o.trials < 1) throw ConfigError("--trials must be >= 1");
  return c;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  detail::atomic_write(path, text);
  std::cerr << "wrote " << path.string() << '\n';
}

std::string summary_header() { return "trial,algo,iters,final_mean_kl,final_std_kl,accuracy\n"; }

std::string summary_rows(int trial, std::span<const AlgoOutcome> runs) {
  std::string s;
  for (const auto& o : runs) {
    const auto& recs = o.result.trace.records;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    s += std::to_string(trial) + ',' + std::string(to_string(o.cfg.kind)) + ',' + std::to_string(o.cfg.max_iters) +
         ',' + detail::format_double(recs.empty() ? nan : recs.back().mean_kl) + ',' +
         detail::format_double(recs.empty() ? nan : recs.back().std_kl) + ',' +
         detail::format_double(o.accuracy.value_or(nan)) + '\n';
  }
  return s;
}

int cmd_gen_net(const Options& o) {
  const ExperimentConfig c = resolve(o);
  const Network net = build_network(c);
  std::ostringstream os;
  write_edge_list(os, net);
  write_file(c.out / "network.txt", os.str());
  std::cout << "nodes " << net.size() << " edges " << net.edge_count() << " mean_degree " << net.mean_degree() << '\n';
  return 0;
}

int cmd_gen_data(const Options& o) {
  const ExperimentConfig c = resolve(o);
  const Network net = build_network(c);
  const LabeledDataset ds = build_dataset(c, net.size());
  write_file(c.out / "data.csv", dataset_to_csv(ds));
  std::cout << "points " << ds.size() << " nodes " << ds.node_count << '\n';
  return 0;
}

int cmd_run(const Options& o, bool compare) {
  ExperimentConfig c = resolve(o);
  std::vector<AlgoConfig> algos = c.algorithms;
  if (!compare) {
    if (o.algo.empty()) {
      algos.resize(1);
    } else {
      AlgoKind kind;
      try {
        kind = parse_algo_kind(o.algo);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
      auto it = std::find_if(algos.begin(), algos.end(), [&](const AlgoConfig& a) { return a.kind == kind; });
      AlgoConfig a = it != algos.end() ? *it : AlgoConfig{};
      a.kind = kind;
      if (it == algos.end()) {
        a.max_iters = algos.front().max_iters;
        a.eval_stride = algos.front().eval_stride;
        a.weight_rule = algos.front().weight_rule;
      }
      algos = {a};
    }
  }
  std::string summary = summary_header();
  for (int trial = 0; trial < o.trials; ++trial) {
    ExperimentConfig tc = c;
    tc.seed = c.seed + static_cast<std::uint64_t>(trial);
    const fs::path dir = o.trials == 1 ? c.out : c.out / ("trial_" + std::to_string(trial));
    const Experiment ex = build_experiment(tc);
    const auto runs = run_comparison(ex, algos);
    std::vector<RunTrace> traces;
    for (const auto& r : runs) traces.push_back(r.result.trace);
    write_file(dir / "trace.csv", trace_csv(traces, o.timing));
    write_file(dir / "final_state.csv", final_state_csv(runs));
    summary += summary_rows(trial, runs);
  }
  write_file(c.out / "summary.csv", summary);
  std::cout << summary;
  return 0;
}

int cmd_eval(const Options& o) {
  const ExperimentConfig c = resolve(o);
  const fs::path state = o.state.empty() ? c.out / "final_state.csv" : fs::path(o.state);
  const Experiment ex = build_experiment(c);
  std::ifstream is(state);
  if (!is) throw std::runtime_error("cannot open final-state file '" + state.string() + "'");
  const auto finals = read_final_state_csv(is, ex.model.K(), ex.model.D(), state.string());
  std::string s = "algo,mean_kl,std_kl,accuracy\n";
  for (const auto& f : finals) {
    if (static_cast<int>(f.phi.size()) != ex.net.size())
      throw std::runtime_error(state.string() + ": " + std::string(to_string(f.kind)) + " has " +
                               std::to_string(f.phi.size()) + " nodes, network has " + std::to_string(ex.net.size()));
    std::vector<NodeState> states(f.phi.size());
    for (std::size_t i = 0; i < f.phi.size(); ++i) {
      states[i].phi = f.phi[i];
      states[i].r = vbe_step(ex.nodes[i], f.phi[i], ex.model);
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto [m, sd] = ex.truth ? mean_kl_cost(states, *ex.truth) : std::pair{nan, nan};
    s += std::string(to_string(f.kind)) + ',' + detail::format_double(m) + ',' + detail::format_double(sd) + ',' +
         detail::format_double(labeled_accuracy(ex, states).value_or(nan)) + '\n';
  }
  write_file(c.out / "eval.csv", s);
  std::cout << s;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distributed variational Bayes for Gaussian mixtures"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "JSON experiment config");
  app.add_option("--seed", o.seed, "override the config seed");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--max-iters", o.max_iters, "override max_iters of every algorithm");
  app.add_option("--trials", o.trials, "repeat with seeds seed, seed+1, ...")->check(CLI::PositiveNumber);
  app.add_flag("--timing", o.timing, "record wall-clock elapsed_ms in traces");

  auto* gen_net = app.add_subcommand("gen-net", "write the communication graph as an edge list");
  auto* gen_data = app.add_subcommand("gen-data", "write the node-partitioned dataset as CSV");
  auto* run_cmd = app.add_subcommand("run", "run one algorithm");
  run_cmd->add_option("--algo", o.algo, "cvb, noncoop, nsg_dvb, dsvb or dvb_admm (default: first in config)");
  auto* compare = app.add_subcommand("compare", "run every configured algorithm on shared data and init");
  auto* eval = app.add_subcommand("eval", "score a final-state CSV against the ground truth");
  eval->add_option("--state", o.state, "final-state CSV (default: <out>/final_state.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen_net) return cmd_gen_net(o);
    if (*gen_data) return cmd_gen_data(o);
    if (*run_cmd) return cmd_run(o, false);
    if (*compare) return cmd_run(o, true);
    if (*eval) return cmd_eval(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
