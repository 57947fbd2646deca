#pragma once

// Synchronized-round schedulers for distributed variational Bayes:
//
//   cvb      fusion-center average of all local optima
//   noncoop  every node keeps its own local optimum
//   nsg_dvb  one-step averaging of local optima over the closed neighborhood
//   dsvb     natural-gradient adapt step followed by diffusion combine
//   dvb_admm consensus ADMM in natural-parameter space with projection and
//            a ramped dual step
//
// Every exchange/update operates on the flattened natural-parameter vector
// (see expfam.hpp for the layout).

#include "dvb/assignment.hpp"
#include "dvb/expfam.hpp"
#include "dvb/gmm.hpp"
#include "dvb/network.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dvb {

enum class AlgoKind { Cvb, Noncoop, NsgDvb, Dsvb, DvbAdmm };

inline std::string_view to_string(AlgoKind kind) {
  switch (kind) {
    case AlgoKind::Cvb: return "cvb";
    case AlgoKind::Noncoop: return "noncoop";
    case AlgoKind::NsgDvb: return "nsg_dvb";
    case AlgoKind::Dsvb: return "dsvb";
    case AlgoKind::DvbAdmm: return "dvb_admm";
  }
  return "unknown";
}

inline AlgoKind parse_algo_kind(std::string_view name) {
  for (AlgoKind k : {AlgoKind::Cvb, AlgoKind::Noncoop, AlgoKind::NsgDvb, AlgoKind::Dsvb,
                     AlgoKind::DvbAdmm}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown algorithm '" + std::string(name) +
                              "' (expected cvb, noncoop, nsg_dvb, dsvb or dvb_admm)");
}

struct AlgoConfig {
  AlgoKind kind = AlgoKind::Dsvb;
  double tau = 0.2;   // dsvb forgetting rate
  double d0 = 1.0;    // dsvb step-size offset
  double rho = 0.5;   // dvb_admm penalty
  double xi = 0.05;   // dvb_admm dual ramp speed
  int max_iters = 0;
  WeightRule weight_rule = WeightRule::NearestNeighbor;
  int eval_stride = 1;
  ProjectionMargins margins{};

  void validate() const {
    if (max_iters < 0) throw std::invalid_argument("max_iters must be >= 0");
    if (eval_stride < 1) throw std::invalid_argument("eval_stride must be >= 1");
    if (kind == AlgoKind::Dsvb && !(d0 >= 1.0 && tau > 0.0 && tau < 1.0))
      throw std::invalid_argument("dsvb requires d0 >= 1 and 0 < tau < 1");
    if (kind == AlgoKind::DvbAdmm && !(rho > 0.0 && xi > 0.0 && xi < 1.0))
      throw std::invalid_argument("dvb_admm requires rho > 0 and 0 < xi < 1");
  }
};

// ---------------------------------------------------------------------------
// Schedules

/// eta_t = 1 / (d0 + tau t).
inline double step_size(int t, double d0, double tau) {
  if (t < 1 || !(d0 >= 1.0) || !(tau > 0.0 && tau < 1.0))
    throw std::invalid_argument("step_size: need t >= 1, d0 >= 1, 0 < tau < 1");
  return 1.0 / (d0 + tau * t);
}

/// kappa_t = 1 - 1 / (1 + xi t)^2.
inline double kappa(int t, double xi) {
  if (t < 1 || !(xi > 0.0 && xi < 1.0))
    throw std::invalid_argument("kappa: need t >= 1 and 0 < xi < 1");
  const double s = 1.0 + xi * t;
  return 1.0 - 1.0 / (s * s);
}

// ---------------------------------------------------------------------------
// Per-node update rules on flattened vectors

namespace flat {

inline Vector adapt(const Vector& prev, const Vector& star, double eta) {
  return prev + eta * (star - prev);
}

inline Vector weighted_sum(std::span<const Vector* const> msgs, std::span<const double> weights) {
  detail::require_shape(!msgs.empty() && msgs.size() == weights.size(),
                        "weighted_sum: need one weight per message");
  Vector out = Vector::Zero(msgs.front()->size());
  for (std::size_t j = 0; j < msgs.size(); ++j) {
    detail::require_shape(msgs[j]->size() == out.size(), "weighted_sum: message length mismatch");
    out += weights[j] * *msgs[j];
  }
  return out;
}

/// (star - 2 lambda + rho sum_j (prev_self + prev_j)) / (1 + 2 rho |N_i|), before projection.
inline Vector admm_primal(const Vector& star, const Vector& lambda, const Vector& prev_self,
                          std::span<const Vector* const> prev_neighbors, double rho) {
  detail::require_shape(star.size() == lambda.size() && star.size() == prev_self.size(),
                        "admm_primal: length mismatch");
  Vector num = star - 2.0 * lambda;
  for (const Vector* nb : prev_neighbors) {
    detail::require_shape(nb->size() == star.size(), "admm_primal: neighbor length mismatch");
    num += rho * (prev_self + *nb);
  }
  return num / (1.0 + 2.0 * rho * static_cast<double>(prev_neighbors.size()));
}

/// lambda + kappa (rho/2) sum_j (phi_self - phi_j).
inline Vector admm_dual(const Vector& lambda, const Vector& phi_self,
                        std::span<const Vector* const> phi_neighbors, double rho, double kappa_t) {
  detail::require_shape(lambda.size() == phi_self.size(), "admm_dual: length mismatch");
  Vector residual = Vector::Zero(lambda.size());
  for (const Vector* nb : phi_neighbors) {
    detail::require_shape(nb->size() == lambda.size(), "admm_dual: neighbor length mismatch");
    residual += phi_self - *nb;
  }
  return lambda + kappa_t * 0.5 * rho * residual;
}

inline Vector mean(std::span<const Vector* const> msgs) {
  detail::require_shape(!msgs.empty(), "mean: empty message list");
  Vector out = Vector::Zero(msgs.front()->size());
  for (const Vector* m : msgs) {
    detail::require_shape(m->size() == out.size(), "mean: message length mismatch");
    out += *m;
  }
  return out / static_cast<double>(msgs.size());
}

}  // namespace flat

// ---------------------------------------------------------------------------
// Structured wrappers

inline GlobalNaturalParams dsvb_adapt(const GlobalNaturalParams& phi_prev,
                                      const GlobalNaturalParams& phi_star, double eta) {
  require_same_shape(phi_prev, phi_star, "dsvb_adapt");
  return unflatten(flat::adapt(flatten(phi_prev), flatten(phi_star), eta), phi_prev.K(),
                   phi_prev.D());
}

struct WeightedMessage {
  GlobalNaturalParams phi;
  double weight = 0.0;
};

inline GlobalNaturalParams dsvb_combine(std::span<const WeightedMessage> messages) {
  detail::require_shape(!messages.empty(), "dsvb_combine: no messages");
  std::vector<Vector> flats;
  std::vector<const Vector*> ptrs;
  std::vector<double> weights;
  double total = 0.0;
  for (const auto& m : messages) {
    require_same_shape(m.phi, messages.front().phi, "dsvb_combine");
    if (!(m.weight >= 0.0)) throw std::invalid_argument("dsvb_combine: negative weight");
    flats.push_back(flatten(m.phi));
    weights.push_back(m.weight);
    total += m.weight;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("dsvb_combine: weights sum to " + std::to_string(total) +
                                ", expected 1");
  for (const auto& f : flats) ptrs.push_back(&f);
  const auto& ref = messages.front().phi;
  return unflatten(flat::weighted_sum(ptrs, weights), ref.K(), ref.D());
}

inline GlobalNaturalParams admm_primal(const GlobalNaturalParams& phi_star, const Vector& lambda,
                                       const GlobalNaturalParams& phi_prev_self,
                                       std::span<const GlobalNaturalParams> phi_prev_neighbors,
                                       double rho, const ProjectionMargins& margins = {}) {
  require_same_shape(phi_star, phi_prev_self, "admm_primal");
  std::vector<Vector> nb;
  std::vector<const Vector*> ptrs;
  for (const auto& p : phi_prev_neighbors) {
    require_same_shape(phi_star, p, "admm_primal");
    nb.push_back(flatten(p));
  }
  for (const auto& f : nb) ptrs.push_back(&f);
  const Vector hat = flat::admm_primal(flatten(phi_star), lambda, flatten(phi_prev_self), ptrs, rho);
  return project_to_domain(unflatten(hat, phi_star.K(), phi_star.D()), margins);
}

inline Vector admm_dual(const Vector& lambda_prev, const GlobalNaturalParams& phi_self,
                        std::span<const GlobalNaturalParams> phi_neighbors, double rho,
                        double kappa_t) {
  std::vector<Vector> nb;
  std::vector<const Vector*> ptrs;
  for (const auto& p : phi_neighbors) {
    require_same_shape(phi_self, p, "admm_dual");
    nb.push_back(flatten(p));
  }
  for (const auto& f : nb) ptrs.push_back(&f);
  return flat::admm_dual(lambda_prev, flatten(phi_self), ptrs, rho, kappa_t);
}

/// Unweighted mean of all local optima (fusion-center VBM).
inline GlobalNaturalParams centralized_vbm(std::span<const GlobalNaturalParams> local_optima) {
  if (local_optima.empty()) throw std::invalid_argument("centralized_vbm: empty list");
  std::vector<Vector> flats;
  std::vector<const Vector*> ptrs;
  for (const auto& p : local_optima) {
    require_same_shape(p, local_optima.front(), "centralized_vbm");
    flats.push_back(flatten(p));
  }
  for (const auto& f : flats) ptrs.push_back(&f);
  return unflatten(flat::mean(ptrs), local_optima.front().K(), local_optima.front().D());
}

/// Uniform mean over a closed neighborhood's local optima.
inline GlobalNaturalParams nsg_combine(std::span<const GlobalNaturalParams> neighborhood_optima) {
  if (neighborhood_optima.empty()) throw std::invalid_argument("nsg_combine: empty list");
  return centralized_vbm(neighborhood_optima);
}

// ---------------------------------------------------------------------------
// Scheduler

struct NodeState {
  GlobalNaturalParams phi;
  Vector lambda;  // aggregate multiplier, flattened; zero unless dvb_admm
  Responsibilities r;
};

struct IterationRecord {
  int iter = 0;
  std::vector<double> node_cost;  // empty when no truth was supplied
  double mean_kl = std::numeric_limits<double>::quiet_NaN();
  double std_kl = std::numeric_limits<double>::quiet_NaN();
  double consensus_disagreement = 0.0;  // max_{i,j} ||phi_i - phi_j||
  double primal_residual = 0.0;         // max_i ||sum_{j in N_i} (phi_i - phi_j)||
  double elapsed_ms = 0.0;
};

struct RunTrace {
  AlgoKind kind = AlgoKind::Dsvb;
  std::vector<IterationRecord> records;
};

struct RunResult {
  RunTrace trace;
  std::vector<NodeState> states;
};

/// Called after every round with the 1-based iteration and the node states.
using RoundObserver = std::function<void(int, std::span<const NodeState>)>;

/// Population mean and standard deviation.
inline std::pair<double, double> mean_and_std(std::span<const double> xs) {
  if (xs.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  return {m, std::sqrt(v / static_cast<double>(xs.size()))};
}

namespace detail {

inline double max_pairwise_distance(std::span<const Vector> xs) {
  double best = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = i + 1; j < xs.size(); ++j)
      best = std::max(best, (xs[i] - xs[j]).norm());
  return best;
}

inline std::string node_context(int t, int i) {
  return "iteration " + std::to_string(t) + ", node " + std::to_string(i) + ": ";
}

}  // namespace detail

/// Executes cfg.max_iters synchronized rounds. Each round: VBE and local VBM at
/// every node, then the kind-specific exchange. All combine/dual phases read
/// the previous phase's outputs only.
inline RunResult run(const AlgoConfig& cfg, const GmmModelConfig& model, const Network& net,
                     std::span<const NodeDataset> data, std::span<const GlobalNaturalParams> init,
                     const std::optional<GlobalNaturalParams>& truth = std::nullopt,
                     const RoundObserver& observer = {}) {
  cfg.validate();
  const int n = net.size();
  detail::require_shape(n >= 1, "run: network has no nodes");
  detail::require_shape(static_cast<int>(data.size()) == n, "run: need one dataset per node");
  detail::require_shape(init.size() == 1 || static_cast<int>(init.size()) == n,
                        "run: init must be one shared phi or one per node");
  const int k_count = model.K();
  const int dim = model.D();
  for (const auto& p : init) {
    detail::require_shape(p.K() == k_count && p.D() == dim, "run: init shape != model");
    detail::require_domain(in_domain(p), "run: initial phi outside the natural-parameter domain");
  }
  if (truth) detail::require_shape(truth->K() == k_count && truth->D() == dim, "run: truth shape != model");
  if (cfg.kind != AlgoKind::Cvb && cfg.kind != AlgoKind::Noncoop && !is_connected(net))
    throw std::invalid_argument("run: distributed algorithms need a connected network");

  const auto un = static_cast<std::size_t>(n);
  const auto len = static_cast<Eigen::Index>(flat_size(k_count, dim));
  const CombinationWeights weights = combination_weights(net, cfg.weight_rule);

  std::vector<NodeState> states(un);
  std::vector<Vector> phi(un);
  for (std::size_t i = 0; i < un; ++i) {
    states[i].phi = init.size() == 1 ? init[0] : init[i];
    states[i].lambda = Vector::Zero(len);
    states[i].r.r = Matrix(data[i].points.rows(), k_count);
    states[i].r.r.setConstant(1.0 / k_count);
    phi[i] = flatten(states[i].phi);
  }

  RunResult result;
  result.trace.kind = cfg.kind;
  result.trace.records.reserve(static_cast<std::size_t>(cfg.max_iters / cfg.eval_stride + 1));
  const auto start = std::chrono::steady_clock::now();

  std::vector<Vector> star(un), next(un);
  std::vector<const Vector*> ptrs;
  std::vector<double> ws;
  for (int t = 1; t <= cfg.max_iters; ++t) {
    // VBE + local VBM at every node against its previous-round phi.
    for (std::size_t i = 0; i < un; ++i) {
      try {
        states[i].r = vbe_step(data[i], states[i].phi, model);
        star[i] = flatten(local_vbm_optimum(data[i], states[i].r, model));
      } catch (const DomainError& e) {
        throw DomainError(detail::node_context(t, static_cast<int>(i)) + e.what());
      }
    }

    switch (cfg.kind) {
      case AlgoKind::Cvb: {
        ptrs.clear();
        for (const auto& s : star) ptrs.push_back(&s);
        const Vector avg = flat::mean(ptrs);
        for (auto& p : next) p = avg;
        break;
      }
      case AlgoKind::Noncoop:
        next = star;
        break;
      case AlgoKind::NsgDvb:
        for (int i = 0; i < n; ++i) {
          ptrs.clear();
          for (int j : detail::closed_neighborhood(net, i)) ptrs.push_back(&star[static_cast<std::size_t>(j)]);
          next[static_cast<std::size_t>(i)] = flat::mean(ptrs);
        }
        break;
      case AlgoKind::Dsvb: {
        const double eta = step_size(t, cfg.d0, cfg.tau);
        std::vector<Vector> psi(un);
        for (std::size_t i = 0; i < un; ++i) psi[i] = flat::adapt(phi[i], star[i], eta);
        for (int i = 0; i < n; ++i) {
          ptrs.clear();
          ws.clear();
          for (auto [j, w] : weights.rows[static_cast<std::size_t>(i)]) {
            ptrs.push_back(&psi[static_cast<std::size_t>(j)]);
            ws.push_back(w);
          }
          next[static_cast<std::size_t>(i)] = flat::weighted_sum(ptrs, ws);
        }
        break;
      }
      case AlgoKind::DvbAdmm: {
        for (int i = 0; i < n; ++i) {
          const auto ui = static_cast<std::size_t>(i);
          ptrs.clear();
          for (int j : net.neighbors(i)) ptrs.push_back(&phi[static_cast<std::size_t>(j)]);
          const Vector hat = flat::admm_primal(star[ui], states[ui].lambda, phi[ui], ptrs, cfg.rho);
          next[ui] = flatten(project_to_domain(unflatten(hat, k_count, dim), cfg.margins));
        }
        const double kappa_t = kappa(t, cfg.xi);
        for (int i = 0; i < n; ++i) {
          const auto ui = static_cast<std::size_t>(i);
          ptrs.clear();
          for (int j : net.neighbors(i)) ptrs.push_back(&next[static_cast<std::size_t>(j)]);
          states[ui].lambda = flat::admm_dual(states[ui].lambda, next[ui], ptrs, cfg.rho, kappa_t);
        }
        break;
      }
    }

    std::swap(phi, next);
    for (std::size_t i = 0; i < un; ++i) {
      states[i].phi = unflatten(phi[i], k_count, dim);
      if (!in_domain(states[i].phi))
        throw DomainError(detail::node_context(t, static_cast<int>(i)) +
                          "phi left the natural-parameter domain");
    }

    if (t % cfg.eval_stride == 0 || t == cfg.max_iters) {
      IterationRecord rec;
      rec.iter = t;
      if (truth) {
        rec.node_cost.reserve(un);
        for (const auto& s : states) rec.node_cost.push_back(aligned_kl(s.phi, *truth));
        std::tie(rec.mean_kl, rec.std_kl) = mean_and_std(rec.node_cost);
      }
      rec.consensus_disagreement = detail::max_pairwise_distance(phi);
      for (int i = 0; i < n; ++i) {
        Vector res = Vector::Zero(len);
        for (int j : net.neighbors(i)) res += phi[static_cast<std::size_t>(i)] - phi[static_cast<std::size_t>(j)];
        rec.primal_residual = std::max(rec.primal_residual, res.norm());
      }
      rec.elapsed_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      result.trace.records.push_back(std::move(rec));
    }
    if (observer) observer(t, states);
  }
  result.states = std::move(states);
  return result;
}

inline RunResult run(const AlgoConfig& cfg, const GmmModelConfig& model, const Network& net,
                     std::span<const NodeDataset> data, const GlobalNaturalParams& init,
                     const std::optional<GlobalNaturalParams>& truth = std::nullopt,
                     const RoundObserver& observer = {}) {
  return run(cfg, model, net, data, std::span<const GlobalNaturalParams>(&init, 1), truth, observer);
}

}  // namespace dvb
