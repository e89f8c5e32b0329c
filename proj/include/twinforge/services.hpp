#pragma once

// Service layer: flow preprocessing into features, Service-1 (a neural
// network scoring carrier-sense thresholds), Service-2 (tabular Q-learning
// over transmit power), and the six strategy modes that turn model output
// into candidate configurations scored by the what-if engine.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinforge/common.hpp"
#include "twinforge/nn.hpp"
#include "twinforge/twingraph.hpp"
#include "twinforge/whatif.hpp"

namespace twinforge::services {

using nlohmann::json;

struct FeatureVector {
  double mean_neighbor_bs = 0.0;     // neighbours sensed above -82 dBm, mean over BSs
  double mean_serving_rssi_dbm = 0.0;
  double load_fraction = 0.0;        // mean BS airtime utilization
  double pl = 0.0;
  double c = 0.0;

  std::vector<double> as_vector() const {
    return {mean_neighbor_bs, mean_serving_rssi_dbm, load_fraction, pl, c};
  }
};

// Deterministic features from a twin snapshot. Quarantined nodes are
// excluded; UEs with missing telemetry impute the snapshot mean.
inline FeatureVector preprocess_flows(const twingraph::TwinSnapshot& snapshot,
                                      double sensitivity_dbm = -82.0) {
  (void)sensitivity_dbm;  // digests are already thresholded at collection
  int n_bs = 0, n_ue = 0;
  double cpu_sum = 0.0, rssi_sum = 0.0, neigh_sum = 0.0;
  long long rx_sum = 0, tx_sum = 0;
  int covered = 0, rssi_count = 0;
  for (const auto& n : snapshot.nodes) {
    if (n.quarantined) continue;
    if (n.kind == dtconnect::NodeKind::Bs) {
      n_bs++;
      cpu_sum += n.cpu_util;
      int distinct = 0;
      for (const auto& [id, frames] : n.sensed_neighbors)
        if (frames > 0) distinct++;
      neigh_sum += distinct;
    } else {
      n_ue++;
      rssi_sum += n.rssi_dbm;
      rssi_count++;
      rx_sum += n.rx_packets;
      tx_sum += n.tx_packets;
      if (n.rssi_dbm >= sensitivity_dbm) covered++;
    }
  }
  if (n_bs == 0)
    throw std::invalid_argument("snapshot has no usable BS telemetry");
  FeatureVector f;
  f.mean_neighbor_bs = neigh_sum / n_bs;
  f.mean_serving_rssi_dbm = rssi_count > 0 ? rssi_sum / rssi_count : -82.0;
  f.load_fraction = clamp01(cpu_sum / n_bs);
  f.pl = tx_sum > 0 ? 1.0 - static_cast<double>(rx_sum) / static_cast<double>(tx_sum) : 0.0;
  f.pl = clamp01(f.pl);
  f.c = n_ue > 0 ? static_cast<double>(covered) / n_ue : 0.0;
  return f;
}

// ---------------------------------------------------------------------------
// Service-1: CST optimizer

inline const std::vector<double>& default_cst_grid() {
  static const std::vector<double> grid{-82.0, -77.0, -72.0, -67.0, -62.0};
  return grid;
}
inline const std::vector<double>& default_tpc_grid() {
  static const std::vector<double> grid{10.0, 12.0, 14.0, 16.0, 18.0, 20.0};
  return grid;
}

struct S1Hyper {
  int epochs = 300;
  double lr = 5e-3;
  std::vector<int> hidden = {16};
  std::uint64_t seed = 1;
};

struct CstModel {
  nn::Mlp net;  // features -> one score per grid value
  std::vector<double> grid = default_cst_grid();
  std::vector<double> feat_mean, feat_std;  // input standardization
  double train_accuracy = 0.0;
  int trained_epochs = 0;

  std::vector<double> scores(const FeatureVector& f) const {
    auto x = f.as_vector();
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = (x[i] - feat_mean[i]) / feat_std[i];
    auto out = net.forward(x);
    nn::softmax_block(out, 0, out.size());
    return out;
  }

  json to_json_full() const {
    return json{{"net", net.to_json()},     {"grid", grid},
                {"feat_mean", feat_mean},   {"feat_std", feat_std},
                {"train_accuracy", train_accuracy}, {"trained_epochs", trained_epochs}};
  }
  static CstModel from_json_full(const json& j) {
    CstModel m;
    m.net = nn::Mlp::from_json(j.at("net"));
    m.grid = j.at("grid").get<std::vector<double>>();
    m.feat_mean = j.at("feat_mean").get<std::vector<double>>();
    m.feat_std = j.at("feat_std").get<std::vector<double>>();
    m.train_accuracy = j.value("train_accuracy", 0.0);
    m.trained_epochs = j.value("trained_epochs", 0);
    return m;
  }
  void save(const std::string& path) const { netsim::save_json_file(to_json_full(), path); }
  static CstModel load(const std::string& path) {
    return from_json_full(netsim::load_json_file(path));
  }
};

// Supervised training on (features, best CST) pairs labelled by brute-force
// scoring of historical runs. Cross-entropy over the CST grid.
inline CstModel s1_train(const std::vector<std::pair<FeatureVector, double>>& labeled,
                         const S1Hyper& hyper = {},
                         const std::vector<double>& grid = default_cst_grid()) {
  if (labeled.empty()) throw std::invalid_argument("empty training set");
  if (labeled.size() < 50)
    throw std::invalid_argument("need at least 50 labelled examples");

  auto class_of = [&grid](double cst) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < grid.size(); ++i)
      if (std::abs(grid[i] - cst) < std::abs(grid[best] - cst)) best = i;
    return best;
  };
  std::vector<std::size_t> labels;
  std::map<std::size_t, int> class_counts;
  for (const auto& [f, cst] : labeled) {
    labels.push_back(class_of(cst));
    class_counts[labels.back()]++;
  }
  if (class_counts.size() < 3)
    throw DegenerateLabelsError("labels span only " + std::to_string(class_counts.size()) +
                                " of the required 3 grid values");

  CstModel m;
  m.grid = grid;
  const std::size_t dim = labeled[0].first.as_vector().size();
  m.feat_mean.assign(dim, 0.0);
  m.feat_std.assign(dim, 0.0);
  for (const auto& [f, cst] : labeled) {
    const auto x = f.as_vector();
    for (std::size_t i = 0; i < dim; ++i) m.feat_mean[i] += x[i];
  }
  for (double& v : m.feat_mean) v /= labeled.size();
  for (const auto& [f, cst] : labeled) {
    const auto x = f.as_vector();
    for (std::size_t i = 0; i < dim; ++i)
      m.feat_std[i] += (x[i] - m.feat_mean[i]) * (x[i] - m.feat_mean[i]);
  }
  for (double& v : m.feat_std) v = std::max(std::sqrt(v / labeled.size()), 1e-6);

  std::vector<int> dims{static_cast<int>(dim)};
  std::vector<nn::Act> acts;
  for (int h : hyper.hidden) {
    dims.push_back(h);
    acts.push_back(nn::Act::Tanh);
  }
  dims.push_back(static_cast<int>(grid.size()));
  acts.push_back(nn::Act::Linear);
  m.net = nn::Mlp(dims, acts, hyper.seed);

  std::vector<std::vector<double>> xs;
  for (const auto& [f, cst] : labeled) {
    auto x = f.as_vector();
    for (std::size_t i = 0; i < dim; ++i) x[i] = (x[i] - m.feat_mean[i]) / m.feat_std[i];
    xs.push_back(x);
  }

  nn::Adam opt;
  opt.lr = hyper.lr;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::vector<double> grad(m.net.param_count(), 0.0);
    for (std::size_t s = 0; s < xs.size(); ++s) {
      nn::Cache cache;
      auto out = m.net.forward(xs[s], &cache);
      nn::softmax_block(out, 0, out.size());
      std::vector<double> dLdy(out.size());
      for (std::size_t k = 0; k < out.size(); ++k)
        dLdy[k] = (out[k] - (k == labels[s] ? 1.0 : 0.0)) / static_cast<double>(xs.size());
      m.net.backward(cache, dLdy, grad);
    }
    opt.step(m.net, grad);
    m.trained_epochs++;
  }

  int correct = 0;
  for (std::size_t s = 0; s < xs.size(); ++s) {
    const auto scores = m.scores(labeled[s].first);
    const std::size_t pred =
        std::max_element(scores.begin(), scores.end()) - scores.begin();
    if (pred == labels[s]) correct++;
  }
  m.train_accuracy = static_cast<double>(correct) / xs.size();
  return m;
}

// Argmax over grid scores; ties resolve to the more sensitive (lower) value.
inline double s1_predict_cst(const CstModel& model, const FeatureVector& f) {
  const auto scores = model.scores(f);
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return model.grid[best];
}

// ---------------------------------------------------------------------------
// Service-2: TPC controller

struct QState {
  int load_bucket = 0;    // [0, 5)
  int interf_bucket = 0;  // [0, 5)
};

struct TpcPolicy {
  static constexpr int kLoadBuckets = 5;
  static constexpr int kInterfBuckets = 5;
  std::vector<double> actions = default_tpc_grid();
  std::vector<double> q;  // load x interference x action
  double alpha = 0.5;
  double gamma = 0.9;
  double epsilon = 0.1;

  TpcPolicy() { q.assign(kLoadBuckets * kInterfBuckets * actions.size(), 0.0); }

  void validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0) || !(gamma >= 0.0 && gamma <= 1.0) ||
        !(epsilon >= 0.0 && epsilon <= 1.0))
      throw std::invalid_argument("hyperparameters outside their ranges");
    for (double v : q)
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite Q value");
  }

  std::size_t index(const QState& s, int action) const {
    if (s.load_bucket < 0 || s.load_bucket >= kLoadBuckets || s.interf_bucket < 0 ||
        s.interf_bucket >= kInterfBuckets || action < 0 ||
        action >= static_cast<int>(actions.size()))
      throw std::invalid_argument("state or action index out of range");
    return (static_cast<std::size_t>(s.load_bucket) * kInterfBuckets + s.interf_bucket) *
               actions.size() +
           action;
  }

  double max_q(const QState& s) const {
    double best = q[index(s, 0)];
    for (int a = 1; a < static_cast<int>(actions.size()); ++a)
      best = std::max(best, q[index(s, a)]);
    return best;
  }

  int greedy_action(const QState& s) const {
    int best = 0;  // scan order resolves ties toward lower power
    for (int a = 1; a < static_cast<int>(actions.size()); ++a)
      if (q[index(s, a)] > q[index(s, best)]) best = a;
    return best;
  }

  json to_json_full() const {
    return json{{"actions", actions}, {"q", q},       {"alpha", alpha},
                {"gamma", gamma},     {"epsilon", epsilon}};
  }
  static TpcPolicy from_json_full(const json& j) {
    TpcPolicy p;
    p.actions = j.at("actions").get<std::vector<double>>();
    p.q = j.at("q").get<std::vector<double>>();
    p.alpha = j.value("alpha", 0.5);
    p.gamma = j.value("gamma", 0.9);
    p.epsilon = j.value("epsilon", 0.1);
    return p;
  }
  void save(const std::string& path) const { netsim::save_json_file(to_json_full(), path); }
  static TpcPolicy load(const std::string& path) {
    return from_json_full(netsim::load_json_file(path));
  }
};

inline QState discretize(const FeatureVector& f) {
  QState s;
  s.load_bucket = std::min(TpcPolicy::kLoadBuckets - 1,
                           static_cast<int>(f.load_fraction * TpcPolicy::kLoadBuckets));
  // Neighbour-count thresholds 1, 2, 4, 6.
  const double n = f.mean_neighbor_bs;
  s.interf_bucket = n < 1.0 ? 0 : n < 2.0 ? 1 : n < 4.0 ? 2 : n < 6.0 ? 3 : 4;
  return s;
}

// One Q-learning backup: Q(s,a) += alpha (r + gamma max_a' Q(s',a') - Q(s,a)).
inline void s2_update(TpcPolicy& policy, const QState& state, int action, double reward,
                      const QState& next_state) {
  if (reward < 0.0 || reward > 1.0)
    throw std::invalid_argument("reward must lie in [0,1]");
  const std::size_t i = policy.index(state, action);
  policy.q[i] += policy.alpha * (reward + policy.gamma * policy.max_q(next_state) -
                                 policy.q[i]);
}

// Epsilon-greedy when exploring, pure greedy otherwise.
inline double s2_select_tpc(const TpcPolicy& policy, const QState& state, bool explore,
                            RandomStream& rng) {
  if (explore && rng.uniform() < policy.epsilon) {
    const long a = rng.uniform_int(0, static_cast<long>(policy.actions.size()) - 1);
    return policy.actions[static_cast<std::size_t>(a)];
  }
  return policy.actions[static_cast<std::size_t>(policy.greedy_action(state))];
}

// ---------------------------------------------------------------------------
// Strategy modes

enum class StrategyMode {
  BruteForce,
  OnlyS1,
  OnlyS2,
  S1CrossS2,
  S2CrossS1,
  S1AndS2Independent,
};

inline const std::vector<StrategyMode>& all_strategy_modes() {
  static const std::vector<StrategyMode> modes{
      StrategyMode::BruteForce, StrategyMode::OnlyS1,     StrategyMode::OnlyS2,
      StrategyMode::S1CrossS2,  StrategyMode::S2CrossS1,  StrategyMode::S1AndS2Independent};
  return modes;
}

inline const char* strategy_mode_name(StrategyMode m) {
  switch (m) {
    case StrategyMode::BruteForce: return "brute_force";
    case StrategyMode::OnlyS1: return "only_s1";
    case StrategyMode::OnlyS2: return "only_s2";
    case StrategyMode::S1CrossS2: return "s1_cross_s2";
    case StrategyMode::S2CrossS1: return "s2_cross_s1";
    case StrategyMode::S1AndS2Independent: return "independent";
  }
  return "brute_force";
}

inline StrategyMode strategy_mode_from_name(const std::string& s) {
  for (StrategyMode m : all_strategy_modes())
    if (s == strategy_mode_name(m)) return m;
  throw std::invalid_argument("unknown strategy mode: " + s);
}

struct Grid {
  std::vector<double> csts = default_cst_grid();
  std::vector<double> tpcs = default_tpc_grid();
  double default_cst = -72.0;
  double default_tpc = 20.0;
  double ue_tx_dbm = 15.0;
};

inline void to_json(json& j, const Grid& g) {
  j = json{{"csts", g.csts},
           {"tpcs", g.tpcs},
           {"default_cst", g.default_cst},
           {"default_tpc", g.default_tpc},
           {"ue_tx_dbm", g.ue_tx_dbm}};
}
inline void from_json(const json& j, Grid& g) {
  g.csts = j.value("csts", default_cst_grid());
  g.tpcs = j.value("tpcs", default_tpc_grid());
  g.default_cst = j.value("default_cst", -72.0);
  g.default_tpc = j.value("default_tpc", 20.0);
  g.ue_tx_dbm = j.value("ue_tx_dbm", 15.0);
}

inline int expected_evaluations(StrategyMode mode, const Grid& grid) {
  switch (mode) {
    case StrategyMode::BruteForce:
      return static_cast<int>(grid.csts.size() * grid.tpcs.size());
    case StrategyMode::S1CrossS2: return static_cast<int>(grid.tpcs.size());
    case StrategyMode::S2CrossS1: return static_cast<int>(grid.csts.size());
    default: return 1;
  }
}

struct StrategyContext {
  twingraph::TwinSnapshot snapshot;
  whatif::EvalContext eval;  // scenario set, weights, bounds, sim, base seed
  Grid grid;
};

struct StrategyResult {
  StrategyMode mode = StrategyMode::BruteForce;
  std::vector<whatif::EffectivenessReport> evaluated;  // grid order
  whatif::EffectivenessReport best;
  double wall_seconds = 0.0;
  int evaluations = 0;
};

// Runs one strategy mode end to end: consult the models the mode requires,
// build its candidate set, evaluate every candidate through the what-if
// engine, and return the best report plus bookkeeping.
inline StrategyResult run_strategy(StrategyMode mode, const StrategyContext& ctx,
                                   const CstModel* s1, const TpcPolicy* s2) {
  const bool needs_s1 = mode == StrategyMode::OnlyS1 || mode == StrategyMode::S1CrossS2 ||
                        mode == StrategyMode::S1AndS2Independent;
  const bool needs_s2 = mode == StrategyMode::OnlyS2 || mode == StrategyMode::S2CrossS1 ||
                        mode == StrategyMode::S1AndS2Independent;
  if (needs_s1 && s1 == nullptr)
    throw std::invalid_argument("strategy mode requires a trained Service-1 model");
  if (needs_s2 && s2 == nullptr)
    throw std::invalid_argument("strategy mode requires a trained Service-2 policy");

  const auto t0 = std::chrono::steady_clock::now();

  std::optional<FeatureVector> features;
  if (needs_s1 || needs_s2) features = preprocess_flows(ctx.snapshot);

  std::vector<netsim::RadioConfig> candidates;
  auto cfg = [&ctx](double cst, double tpc) {
    return netsim::RadioConfig{cst, tpc, ctx.grid.ue_tx_dbm};
  };
  switch (mode) {
    case StrategyMode::BruteForce:
      for (double cst : ctx.grid.csts)
        for (double tpc : ctx.grid.tpcs) candidates.push_back(cfg(cst, tpc));
      break;
    case StrategyMode::OnlyS1:
      candidates.push_back(cfg(s1_predict_cst(*s1, *features), ctx.grid.default_tpc));
      break;
    case StrategyMode::OnlyS2: {
      RandomStream rng(derive_seed(ctx.eval.base_seed, 0x52ULL));
      candidates.push_back(
          cfg(ctx.grid.default_cst, s2_select_tpc(*s2, discretize(*features), false, rng)));
      break;
    }
    case StrategyMode::S1CrossS2: {
      const double cst = s1_predict_cst(*s1, *features);
      for (double tpc : ctx.grid.tpcs) candidates.push_back(cfg(cst, tpc));
      break;
    }
    case StrategyMode::S2CrossS1: {
      RandomStream rng(derive_seed(ctx.eval.base_seed, 0x52ULL));
      const double tpc = s2_select_tpc(*s2, discretize(*features), false, rng);
      for (double cst : ctx.grid.csts) candidates.push_back(cfg(cst, tpc));
      break;
    }
    case StrategyMode::S1AndS2Independent: {
      RandomStream rng(derive_seed(ctx.eval.base_seed, 0x52ULL));
      candidates.push_back(cfg(s1_predict_cst(*s1, *features),
                               s2_select_tpc(*s2, discretize(*features), false, rng)));
      break;
    }
  }

  StrategyResult result;
  result.mode = mode;
  for (const auto& c : candidates)
    result.evaluated.push_back(whatif::evaluate_config(c, ctx.eval));
  result.evaluations = static_cast<int>(result.evaluated.size());

  std::size_t best = 0;
  for (std::size_t i = 1; i < result.evaluated.size(); ++i)
    if (result.evaluated[i].valid &&
        (!result.evaluated[best].valid || result.evaluated[i].xi > result.evaluated[best].xi))
      best = i;
  result.best = result.evaluated[best];
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace twinforge::services
