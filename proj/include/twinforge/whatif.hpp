#pragma once

// What-if analysis: KPI normalization, per-scenario composite scores, the
// scenario-weighted effectiveness score, and candidate-config evaluation via
// prospective simulation runs.

#include <algorithm>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinforge/common.hpp"
#include "twinforge/netsim.hpp"
#include "twinforge/scenario.hpp"
#include "twinforge/twingraph.hpp"

namespace twinforge::whatif {

using netsim::KpiVector;
using nlohmann::json;

struct KpiBounds {
  double t_min = 0.0;
  double t_max = 100.0;
  double l_min = 0.0;
  double l_max = 100.0;

  void validate() const {
    if (!(t_min < t_max) || !(l_min < l_max))
      throw std::invalid_argument("KPI bounds need min < max");
  }
};

inline void to_json(json& j, const KpiBounds& b) {
  j = json{{"t_min", b.t_min}, {"t_max", b.t_max}, {"l_min", b.l_min}, {"l_max", b.l_max}};
}
inline void from_json(const json& j, KpiBounds& b) {
  b.t_min = j.value("t_min", 0.0);
  b.t_max = j.value("t_max", 100.0);
  b.l_min = j.value("l_min", 0.0);
  b.l_max = j.value("l_max", 100.0);
}

struct NormalizedKpis {
  double m_t = 0.0;
  double m_l = 0.0;
  double m_pl = 0.0;
  double m_c = 0.0;
};

// Higher is better for all four after normalization; lower-is-better KPIs
// (latency, loss) are inverted.
inline NormalizedKpis normalize_kpis(const KpiVector& k, const KpiBounds& bounds) {
  bounds.validate();
  k.validate();
  NormalizedKpis m;
  m.m_t = clamp01((k.t - bounds.t_min) / (bounds.t_max - bounds.t_min));
  m.m_l = 1.0 - clamp01((k.l - bounds.l_min) / (bounds.l_max - bounds.l_min));
  m.m_pl = 1.0 - k.pl;
  m.m_c = k.c;
  return m;
}

struct WeightProfile {
  // KPI weights (throughput, latency, loss, coverage).
  double w_t = 0.4, w_l = 0.2, w_pl = 0.2, w_c = 0.2;
  // Scenario weights.
  double w_a = 0.4, w_b = 0.2, w_scen_c = 0.2, w_d = 0.2;

  void validate() const {
    for (double w : {w_t, w_l, w_pl, w_c, w_a, w_b, w_scen_c, w_d})
      if (w < 0.0) throw std::invalid_argument("weights must be non-negative");
    if (std::abs(w_t + w_l + w_pl + w_c - 1.0) > 1e-9)
      throw std::invalid_argument("KPI weights must sum to 1");
    if (std::abs(w_a + w_b + w_scen_c + w_d - 1.0) > 1e-9)
      throw std::invalid_argument("scenario weights must sum to 1");
  }

  double scenario_weight(char family) const {
    switch (family) {
      case 'A': return w_a;
      case 'B': return w_b;
      case 'C': return w_scen_c;
      case 'D': return w_d;
    }
    throw std::invalid_argument(std::string("unknown scenario family: ") + family);
  }
};

inline void to_json(json& j, const WeightProfile& w) {
  j = json{{"kpi", {{"t", w.w_t}, {"l", w.w_l}, {"pl", w.w_pl}, {"c", w.w_c}}},
           {"scenario", {{"A", w.w_a}, {"B", w.w_b}, {"C", w.w_scen_c}, {"D", w.w_d}}}};
}
inline void from_json(const json& j, WeightProfile& w) {
  if (j.contains("kpi")) {
    w.w_t = j.at("kpi").value("t", 0.4);
    w.w_l = j.at("kpi").value("l", 0.2);
    w.w_pl = j.at("kpi").value("pl", 0.2);
    w.w_c = j.at("kpi").value("c", 0.2);
  }
  if (j.contains("scenario")) {
    w.w_a = j.at("scenario").value("A", 0.4);
    w.w_b = j.at("scenario").value("B", 0.2);
    w.w_scen_c = j.at("scenario").value("C", 0.2);
    w.w_d = j.at("scenario").value("D", 0.2);
  }
}

// CS = w_t m_t + w_l m_l + w_pl m_pl + w_c m_c.
inline double composite_score(const NormalizedKpis& m, const WeightProfile& w) {
  w.validate();
  return w.w_t * m.m_t + w.w_l * m.m_l + w.w_pl * m.m_pl + w.w_c * m.m_c;
}

// xi = w_A CS_A + w_B CS_B + w_C CS_C + w_D CS_D. All four must be present.
inline double effectiveness(const std::map<char, double>& cs, const WeightProfile& w) {
  w.validate();
  double xi = 0.0;
  for (char f : {'A', 'B', 'C', 'D'}) {
    const auto it = cs.find(f);
    if (it == cs.end())
      throw std::invalid_argument(std::string("missing composite score for scenario ") + f);
    if (it->second < 0.0 || it->second > 1.0)
      throw std::invalid_argument("composite scores must lie in [0,1]");
    xi += w.scenario_weight(f) * it->second;
  }
  return xi;
}

struct ScenarioOutcome {
  scenario::Kind kind = scenario::Kind::A;
  KpiVector kpis;
  NormalizedKpis norm;
  double cs = 0.0;
  std::uint64_t seed = 0;
};

struct EffectivenessReport {
  netsim::RadioConfig config;
  std::map<char, double> cs_by_family;  // only families that were evaluated
  double xi = 0.0;
  std::vector<ScenarioOutcome> outcomes;  // ordered by scenario kind
  std::uint64_t base_seed = 0;
  std::string origin = "digital";  // which layer produced the KPIs
  bool valid = true;
  std::string cause;

  double cs(char family) const {
    const auto it = cs_by_family.find(family);
    return it == cs_by_family.end() ? 0.0 : it->second;
  }
};

inline void to_json(json& j, const EffectivenessReport& r) {
  json cs = json::object();
  for (const auto& [f, v] : r.cs_by_family) cs[std::string(1, f)] = v;
  json outs = json::array();
  for (const auto& o : r.outcomes)
    outs.push_back(json{{"kind", scenario::kind_name(o.kind)},
                        {"kpis", o.kpis},
                        {"cs", o.cs},
                        {"seed", o.seed}});
  j = json{{"config", r.config}, {"cs", cs},         {"xi", r.xi},
           {"outcomes", outs},   {"seed", r.base_seed}, {"origin", r.origin},
           {"valid", r.valid},   {"cause", r.cause}};
}

struct EvalContext {
  netsim::Topology topology;
  netsim::TrafficProfile traffic;
  std::vector<scenario::ScenarioSpec> specs;
  WeightProfile weights;
  KpiBounds bounds;
  netsim::SimParams sim;
  std::uint64_t base_seed = 1;
  bool parallel = false;
  twingraph::TwinGraph* graph = nullptr;  // optional prospective-twin sink
  std::string gan_model_id;
};

namespace detail {

struct KpiAccumulator {
  long long delivered = 0, sent = 0, lost = 0;
  unsigned long long latency_slots = 0;
  long long slots = 0;
  double coverage_weighted = 0.0;
  int packet_bytes = 1464;
  double slot_us = 135.0;

  void add(const netsim::SimResult& r, const netsim::Topology& topo, double sensitivity) {
    const auto k = netsim::measure_kpis(r, topo, sensitivity);
    delivered += r.total_delivered();
    sent += r.total_sent();
    lost += r.total_lost();
    for (const auto& u : r.ue) latency_slots += u.sum_latency_slots;
    slots += r.duration_slots;
    coverage_weighted += k.c * static_cast<double>(r.duration_slots);
    packet_bytes = r.packet_bytes;
    slot_us = r.slot_us;
  }

  KpiVector total() const {
    KpiVector k;
    const double wall_us = static_cast<double>(slots) * slot_us;
    k.t = wall_us > 0.0 ? static_cast<double>(delivered) * packet_bytes * 8.0 / wall_us : 0.0;
    k.l = delivered > 0
              ? static_cast<double>(latency_slots) / delivered * slot_us / 1000.0
              : 0.0;
    k.pl = sent > 0 ? static_cast<double>(lost) / static_cast<double>(sent) : 0.0;
    k.c = slots > 0 ? coverage_weighted / static_cast<double>(slots) : 0.0;
    return k;
  }
};

inline ScenarioOutcome run_one_scenario(const scenario::ScenarioSpec& spec,
                                        const EvalContext& ctx,
                                        const netsim::Topology& configured) {
  const auto steps = scenario::apply_scenario(spec, configured, ctx.traffic);
  KpiAccumulator acc;
  for (std::size_t s = 0; s < steps.size(); ++s) {
    const long long slots = steps[s].end_slot - steps[s].start_slot;
    if (slots <= 0) continue;
    // Seeds depend on (base seed, kind, step) only, never on the candidate
    // config, so every candidate faces identical conditions.
    const std::uint64_t seed =
        derive_seed(ctx.base_seed, static_cast<std::uint64_t>(spec.kind), s);
    const auto result = netsim::simulate(steps[s].topology, steps[s].traffic, slots, seed,
                                         ctx.sim);
    acc.add(result, steps[s].topology, ctx.sim.sensitivity_dbm);
  }
  ScenarioOutcome out;
  out.kind = spec.kind;
  out.kpis = acc.total();
  out.norm = normalize_kpis(out.kpis, ctx.bounds);
  out.cs = composite_score(out.norm, ctx.weights);
  out.seed = derive_seed(ctx.base_seed, static_cast<std::uint64_t>(spec.kind), 0);
  return out;
}

}  // namespace detail

// Evaluates one candidate (CST, TPC) configuration across the scenario set:
// expand, simulate, normalize, score per scenario, then the weighted xi.
// The C family score is the mean over its evaluated sub-scenarios.
inline EffectivenessReport evaluate_config(const netsim::RadioConfig& config,
                                           const EvalContext& ctx) {
  config.validate();
  ctx.weights.validate();
  ctx.bounds.validate();
  std::map<int, int> kind_seen;
  for (const auto& s : ctx.specs)
    if (++kind_seen[static_cast<int>(s.kind)] > 1)
      throw std::invalid_argument("scenario list repeats a kind");

  auto specs = ctx.specs;
  std::sort(specs.begin(), specs.end(),
            [](const auto& a, const auto& b) { return a.kind < b.kind; });

  netsim::Topology configured = ctx.topology;
  for (auto& b : configured.bss) b.radio = config;

  EffectivenessReport report;
  report.config = config;
  report.base_seed = ctx.base_seed;
  try {
    std::vector<ScenarioOutcome> outcomes(specs.size());
    if (ctx.parallel && specs.size() > 1) {
      std::vector<std::future<ScenarioOutcome>> futs;
      for (const auto& spec : specs)
        futs.push_back(std::async(std::launch::async, [&spec, &ctx, &configured] {
          return detail::run_one_scenario(spec, ctx, configured);
        }));
      for (std::size_t i = 0; i < futs.size(); ++i) outcomes[i] = futs[i].get();
    } else {
      for (std::size_t i = 0; i < specs.size(); ++i)
        outcomes[i] = detail::run_one_scenario(specs[i], ctx, configured);
    }
    report.outcomes = std::move(outcomes);

    std::map<char, std::pair<double, int>> family_sum;
    for (const auto& o : report.outcomes) {
      auto& [sum, n] = family_sum[scenario::family_of(o.kind)];
      sum += o.cs;
      n++;
    }
    for (const auto& [f, sn] : family_sum)
      report.cs_by_family[f] = sn.first / sn.second;

    double xi = 0.0;
    for (char f : {'A', 'B', 'C', 'D'}) {
      const double w = ctx.weights.scenario_weight(f);
      const auto it = report.cs_by_family.find(f);
      if (it == report.cs_by_family.end()) {
        if (w > 0.0)
          throw std::invalid_argument(std::string("scenario family ") + f +
                                      " carries weight but was not evaluated");
        continue;
      }
      xi += w * it->second;
    }
    report.xi = xi;
  } catch (const std::invalid_argument&) {
    throw;  // contract violations propagate; only runtime failures invalidate
  } catch (const std::exception& e) {
    report.valid = false;
    report.cause = e.what();
    return report;
  }

  if (ctx.graph) {
    twingraph::ProspectiveTwin p;
    p.scenario_id = "whatif-" + std::to_string(ctx.base_seed);
    p.config = config;
    for (const auto& o : report.outcomes)
      p.predicted[scenario::kind_name(o.kind)] = o.kpis;
    p.seed = ctx.base_seed;
    p.gan_model_id = ctx.gan_model_id;
    try {
      ctx.graph->record_prospective(std::move(p));
    } catch (const ConflictError&) {
      // Re-evaluating the same (scenario, config, seed) reproduces the
      // stored result bit for bit; keeping the first record is enough.
    }
  }
  return report;
}

// Configs whose xi strictly clears the threshold, best first. Ties prefer
// lower transmit power, then the less sensitive (smaller-magnitude) CST.
inline std::vector<EffectivenessReport> select_configs(
    const std::vector<EffectivenessReport>& reports, double threshold) {
  if (threshold < 0.0 || threshold > 1.0)
    throw std::invalid_argument("threshold must lie in [0,1]");
  std::vector<EffectivenessReport> out;
  for (const auto& r : reports)
    if (r.valid && r.xi > threshold) out.push_back(r);
  std::sort(out.begin(), out.end(), [](const EffectivenessReport& a, const EffectivenessReport& b) {
    if (a.xi != b.xi) return a.xi > b.xi;
    if (a.config.tpc_dbm != b.config.tpc_dbm) return a.config.tpc_dbm < b.config.tpc_dbm;
    if (std::abs(a.config.cst_dbm) != std::abs(b.config.cst_dbm))
      return std::abs(a.config.cst_dbm) < std::abs(b.config.cst_dbm);
    return a.config.cst_dbm < b.config.cst_dbm;
  });
  return out;
}

inline void write_reports_csv(const std::vector<EffectivenessReport>& reports,
                              std::ostream& os) {
  os << "origin,cst_dbm,tpc_dbm,xi,cs_a,cs_b,cs_c,cs_d,valid\n";
  for (const auto& r : reports)
    os << r.origin << ',' << fmt_g6(r.config.cst_dbm) << ',' << fmt_g6(r.config.tpc_dbm)
       << ',' << fmt_g6(r.xi) << ',' << fmt_g6(r.cs('A')) << ',' << fmt_g6(r.cs('B')) << ','
       << fmt_g6(r.cs('C')) << ',' << fmt_g6(r.cs('D')) << ',' << (r.valid ? 1 : 0) << '\n';
}

}  // namespace twinforge::whatif
