#pragma once

// Scenario-maker: turns a twin snapshot plus GAN output into one of the four
// scenario families, expressed as a declarative event timeline that expands
// deterministically into stepwise simulator inputs.
//   A  - mirror of the current network state (empty timeline)
//   B  - user density ramp: +50% UEs added one per step
//   C1 - +20% traffic, C2 - +40% traffic, C3 - time-of-day multiplier curve
//   D  - one-off spike: x2 traffic and a +50% UE burst at a single instant

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinforge/common.hpp"
#include "twinforge/netsim.hpp"
#include "twinforge/tabgan.hpp"
#include "twinforge/twingraph.hpp"

namespace twinforge::scenario {

using nlohmann::json;

enum class Kind { A, B, C1, C2, C3, D };

inline const char* kind_name(Kind k) {
  switch (k) {
    case Kind::A: return "A";
    case Kind::B: return "B";
    case Kind::C1: return "C1";
    case Kind::C2: return "C2";
    case Kind::C3: return "C3";
    case Kind::D: return "D";
  }
  return "A";
}

inline Kind kind_from_name(const std::string& s) {
  if (s == "A") return Kind::A;
  if (s == "B") return Kind::B;
  if (s == "C1") return Kind::C1;
  if (s == "C2") return Kind::C2;
  if (s == "C3") return Kind::C3;
  if (s == "D") return Kind::D;
  throw std::invalid_argument("unknown scenario kind: " + s);
}

// C scenarios fold into one family weight downstream.
inline char family_of(Kind k) {
  switch (k) {
    case Kind::A: return 'A';
    case Kind::B: return 'B';
    case Kind::D: return 'D';
    default: return 'C';
  }
}

struct Event {
  enum class Type { AddUe, ScaleTraffic, SetMultiplierCurve };
  long long t_slot = 0;
  Type type = Type::AddUe;
  tabgan::FlowRecord ue;          // AddUe payload
  int serving_bs = -1;            // AddUe: explicit BS, or -1 for least-loaded
  double factor = 1.0;            // ScaleTraffic payload
  netsim::MultiplierCurve curve;  // SetMultiplierCurve payload

  bool operator==(const Event&) const = default;
};

inline const char* event_type_name(Event::Type t) {
  switch (t) {
    case Event::Type::AddUe: return "add_ue";
    case Event::Type::ScaleTraffic: return "scale_traffic";
    case Event::Type::SetMultiplierCurve: return "set_multiplier_curve";
  }
  return "add_ue";
}
inline Event::Type event_type_from_name(const std::string& s) {
  if (s == "add_ue") return Event::Type::AddUe;
  if (s == "scale_traffic") return Event::Type::ScaleTraffic;
  if (s == "set_multiplier_curve") return Event::Type::SetMultiplierCurve;
  throw std::invalid_argument("unknown event type: " + s);
}

inline void to_json(json& j, const Event& e) {
  j = json{{"t_slot", e.t_slot}, {"type", event_type_name(e.type)}};
  switch (e.type) {
    case Event::Type::AddUe:
      j["ue"] = json{{"bs_id", e.ue.bs_id},
                     {"traffic_type", netsim::traffic_type_name(e.ue.traffic_type)},
                     {"offered_rate_mbps", e.ue.offered_rate_mbps},
                     {"distance_m", e.ue.distance_m},
                     {"hour_bucket", e.ue.hour_bucket}};
      j["serving_bs"] = e.serving_bs;
      break;
    case Event::Type::ScaleTraffic:
      j["factor"] = e.factor;
      break;
    case Event::Type::SetMultiplierCurve:
      j["curve"] = e.curve;
      break;
  }
}
inline void from_json(const json& j, Event& e) {
  e.t_slot = j.at("t_slot").get<long long>();
  e.type = event_type_from_name(j.at("type").get<std::string>());
  switch (e.type) {
    case Event::Type::AddUe: {
      const auto& u = j.at("ue");
      e.ue.bs_id = u.at("bs_id").get<int>();
      e.ue.traffic_type = netsim::traffic_type_from_name(u.at("traffic_type").get<std::string>());
      e.ue.offered_rate_mbps = u.at("offered_rate_mbps").get<double>();
      e.ue.distance_m = u.at("distance_m").get<double>();
      e.ue.hour_bucket = u.at("hour_bucket").get<int>();
      e.serving_bs = j.value("serving_bs", -1);
      break;
    }
    case Event::Type::ScaleTraffic:
      e.factor = j.at("factor").get<double>();
      break;
    case Event::Type::SetMultiplierCurve:
      e.curve = j.at("curve").get<netsim::MultiplierCurve>();
      break;
  }
}

struct ScenarioSpec {
  Kind kind = Kind::A;
  std::string base_snapshot_id;
  long long duration_slots = 0;
  std::uint64_t seed = 0;
  std::string gan_model_id;
  std::vector<Event> events;
  // C3 remix: per hour bucket, the traffic-type mix drawn from the GAN.
  std::map<int, std::vector<netsim::TrafficType>> bucket_type_mix;

  std::string id() const {
    return std::string(kind_name(kind)) + "-" + std::to_string(seed);
  }
};

inline void to_json(json& j, const ScenarioSpec& s) {
  json mix = json::object();
  for (const auto& [bucket, types] : s.bucket_type_mix) {
    json arr = json::array();
    for (auto t : types) arr.push_back(netsim::traffic_type_name(t));
    mix[std::to_string(bucket)] = arr;
  }
  j = json{{"kind", kind_name(s.kind)},
           {"base_snapshot_id", s.base_snapshot_id},
           {"duration_slots", s.duration_slots},
           {"seed", s.seed},
           {"gan_model_id", s.gan_model_id},
           {"events", s.events},
           {"bucket_type_mix", mix}};
}
inline void from_json(const json& j, ScenarioSpec& s) {
  s.kind = kind_from_name(j.at("kind").get<std::string>());
  s.base_snapshot_id = j.value("base_snapshot_id", "");
  s.duration_slots = j.at("duration_slots").get<long long>();
  s.seed = j.value("seed", 0ULL);
  s.gan_model_id = j.value("gan_model_id", "");
  s.events = j.at("events").get<std::vector<Event>>();
  s.bucket_type_mix.clear();
  if (j.contains("bucket_type_mix"))
    for (const auto& [k, v] : j.at("bucket_type_mix").items()) {
      std::vector<netsim::TrafficType> types;
      for (const auto& tv : v)
        types.push_back(netsim::traffic_type_from_name(tv.get<std::string>()));
      s.bucket_type_mix[std::stoi(k)] = types;
    }
}

struct ScenarioParams {
  long long duration_slots = 3000;
  double slot_us = 135.0;
  double c1_factor = 1.2;
  double c2_factor = 1.4;
  double d_traffic_factor = 2.0;
  // night, morning, day, evening multipliers for C3's compressed day.
  std::vector<double> c3_multipliers = {0.3, 0.8, 1.0, 1.4};
};

inline ScenarioSpec make_scenario(Kind kind, const twingraph::TwinSnapshot& snapshot,
                                  const tabgan::GanModel* gan, const ScenarioParams& params,
                                  std::uint64_t seed) {
  const int n0 = snapshot.count(dtconnect::NodeKind::Ue);
  if (snapshot.nodes.empty() || n0 == 0)
    throw std::invalid_argument("scenario base snapshot is empty");
  const bool needs_gan = kind != Kind::A;
  if (needs_gan && gan == nullptr)
    throw std::invalid_argument(std::string("scenario ") + kind_name(kind) +
                                " requires a GAN model");
  if (params.duration_slots < 1) throw std::invalid_argument("duration must be >= 1 slot");

  ScenarioSpec spec;
  spec.kind = kind;
  spec.base_snapshot_id = fmt_g6(snapshot.timestamp);
  spec.duration_slots = params.duration_slots;
  spec.seed = seed;
  if (needs_gan) spec.gan_model_id = gan->id();

  const int n_add = static_cast<int>(std::ceil(0.5 * n0));
  switch (kind) {
    case Kind::A:
      break;  // mirror of the current state: empty timeline
    case Kind::B: {
      if (params.duration_slots < 2 * (n_add + 1))
        throw std::invalid_argument("duration too short to add users one per step");
      const auto rows = tabgan::generate(*gan, n_add, std::nullopt, derive_seed(seed, 0xbULL));
      for (int k = 0; k < n_add; ++k) {
        Event e;
        e.type = Event::Type::AddUe;
        e.t_slot = params.duration_slots * (k + 1) / (n_add + 1);
        e.ue = tabgan::row_to_flow(rows[k]);
        spec.events.push_back(e);
      }
      break;
    }
    case Kind::C1:
    case Kind::C2: {
      Event e;
      e.type = Event::Type::ScaleTraffic;
      e.t_slot = 0;
      e.factor = kind == Kind::C1 ? params.c1_factor : params.c2_factor;
      spec.events.push_back(e);
      break;
    }
    case Kind::C3: {
      Event e;
      e.type = Event::Type::SetMultiplierCurve;
      e.t_slot = 0;
      // The whole run is one compressed day; the curve repeats beyond it.
      e.curve.period_s = static_cast<double>(params.duration_slots) * params.slot_us * 1e-6;
      const auto& m = params.c3_multipliers;
      for (std::size_t i = 0; i < m.size(); ++i)
        e.curve.segments.emplace_back(static_cast<double>(i + 1) / m.size(), m[i]);
      spec.events.push_back(e);
      // Traffic-type mix per hour bucket, conditioned on that bucket.
      for (std::size_t b = 0; b < tabgan::hour_bucket_names().size(); ++b) {
        const auto rows = tabgan::generate(
            *gan, n0, std::make_pair(std::string("hour_bucket"), tabgan::hour_bucket_names()[b]),
            derive_seed(seed, 0xc3ULL, b));
        std::vector<netsim::TrafficType> types;
        for (const auto& r : rows) types.push_back(tabgan::row_to_flow(r).traffic_type);
        spec.bucket_type_mix[static_cast<int>(b)] = types;
      }
      break;
    }
    case Kind::D: {
      RandomStream rng(derive_seed(seed, 0xdULL));
      // Spike lands uniformly inside the middle third of the run.
      const long long t_spike =
          params.duration_slots / 3 +
          static_cast<long long>(rng.uniform() * (params.duration_slots / 3));
      Event scale;
      scale.type = Event::Type::ScaleTraffic;
      scale.t_slot = t_spike;
      scale.factor = params.d_traffic_factor;
      spec.events.push_back(scale);
      const auto rows = tabgan::generate(*gan, n_add, std::nullopt, derive_seed(seed, 0xd5ULL));
      for (int k = 0; k < n_add; ++k) {
        Event e;
        e.type = Event::Type::AddUe;
        e.t_slot = t_spike;
        e.ue = tabgan::row_to_flow(rows[k]);
        spec.events.push_back(e);
      }
      break;
    }
  }
  return spec;
}

// One contiguous simulator run with fixed inputs.
struct Step {
  long long start_slot = 0;
  long long end_slot = 0;
  netsim::Topology topology;
  netsim::TrafficProfile traffic;
};

namespace detail {

inline int least_loaded_bs(const netsim::Topology& topo) {
  std::map<int, int> counts;
  for (const auto& b : topo.bss) counts[b.id] = 0;
  for (const auto& u : topo.ues) counts[u.bs_id]++;
  int best = topo.bss.front().id;
  for (const auto& [id, n] : counts)
    if (n < counts[best]) best = id;
  return best;
}

}  // namespace detail

// Expands the timeline into the stepwise input sequence consumed by the
// simulator. Synthetic UEs are placed at their GAN distance from the
// least-loaded BS; scale events multiply every offered rate.
inline std::vector<Step> apply_scenario(const ScenarioSpec& spec,
                                        const netsim::Topology& topology,
                                        const netsim::TrafficProfile& traffic) {
  topology.validate();
  for (const auto& e : spec.events)
    if (e.type == Event::Type::AddUe && e.serving_bs >= 0 &&
        topology.bs_index(e.serving_bs) < 0)
      throw std::invalid_argument("event references unknown BS " +
                                  std::to_string(e.serving_bs));

  // C3 splits the run into one step per multiplier segment.
  if (spec.kind == Kind::C3) {
    const Event* curve_event = nullptr;
    for (const auto& e : spec.events)
      if (e.type == Event::Type::SetMultiplierCurve) curve_event = &e;
    if (!curve_event || curve_event->curve.segments.empty())
      throw std::invalid_argument("C3 scenario is missing its multiplier curve");
    const auto& segs = curve_event->curve.segments;
    std::vector<Step> steps;
    long long prev = 0;
    for (std::size_t s = 0; s < segs.size(); ++s) {
      Step st;
      st.start_slot = prev;
      st.end_slot = spec.duration_slots * static_cast<long long>(s + 1) /
                    static_cast<long long>(segs.size());
      prev = st.end_slot;
      st.topology = topology;
      st.traffic = traffic;
      for (auto& f : st.traffic.flows) f.rate_mbps *= segs[s].second;
      st.traffic.target_mbps_per_bss *= segs[s].second;
      const auto mix = spec.bucket_type_mix.find(static_cast<int>(s));
      if (mix != spec.bucket_type_mix.end() && !mix->second.empty())
        for (std::size_t f = 0; f < st.traffic.flows.size(); ++f)
          st.traffic.flows[f].type = mix->second[f % mix->second.size()];
      steps.push_back(std::move(st));
    }
    return steps;
  }

  std::vector<long long> boundaries{0};
  for (const auto& e : spec.events)
    if (e.t_slot > 0 && e.t_slot < spec.duration_slots) boundaries.push_back(e.t_slot);
  std::sort(boundaries.begin(), boundaries.end());
  boundaries.erase(std::unique(boundaries.begin(), boundaries.end()), boundaries.end());

  netsim::Topology topo = topology;
  netsim::TrafficProfile prof = traffic;
  RandomStream placement_rng(derive_seed(spec.seed, 0x91acULL));
  int next_ue_id = topo.max_ue_id() + 1;

  auto apply_event = [&](const Event& e) {
    switch (e.type) {
      case Event::Type::AddUe: {
        const int bs_id = e.serving_bs >= 0 ? e.serving_bs : detail::least_loaded_bs(topo);
        const auto& bs = topo.bss[topo.bs_index(bs_id)];
        const double angle = 2.0 * M_PI * placement_rng.uniform();
        netsim::UserEquipment ue;
        ue.id = next_ue_id++;
        ue.bs_id = bs_id;
        ue.x = bs.x + e.ue.distance_m * std::cos(angle);
        ue.y = bs.y + e.ue.distance_m * std::sin(angle);
        topo.ues.push_back(ue);
        netsim::Flow f;
        f.ue_id = ue.id;
        f.type = e.ue.traffic_type;
        f.rate_mbps = e.ue.offered_rate_mbps;
        prof.flows.push_back(f);
        break;
      }
      case Event::Type::ScaleTraffic:
        for (auto& f : prof.flows) f.rate_mbps *= e.factor;
        prof.target_mbps_per_bss *= e.factor;
        break;
      case Event::Type::SetMultiplierCurve:
        prof.curve = e.curve;
        break;
    }
  };

  // Events at slot 0 shape the first step.
  for (const auto& e : spec.events)
    if (e.t_slot <= 0) apply_event(e);

  std::vector<Step> steps;
  for (std::size_t b = 0; b < boundaries.size(); ++b) {
    const long long start = boundaries[b];
    const long long end = b + 1 < boundaries.size() ? boundaries[b + 1] : spec.duration_slots;
    if (b > 0)
      for (const auto& e : spec.events)
        if (e.t_slot == start) apply_event(e);
    Step st;
    st.start_slot = start;
    st.end_slot = end;
    st.topology = topo;
    st.traffic = prof;
    steps.push_back(std::move(st));
  }
  return steps;
}

// Human-readable timeline for the CLI.
inline std::string describe(const ScenarioSpec& spec) {
  std::ostringstream os;
  os << "scenario " << kind_name(spec.kind) << " (seed " << spec.seed << ", "
     << spec.duration_slots << " slots";
  if (!spec.gan_model_id.empty()) os << ", gan " << spec.gan_model_id;
  os << ")\n";
  if (spec.events.empty()) os << "  t=0: mirror current network state (no events)\n";
  for (const auto& e : spec.events) {
    os << "  t=" << e.t_slot << ": " << event_type_name(e.type);
    switch (e.type) {
      case Event::Type::AddUe:
        os << " " << netsim::traffic_type_name(e.ue.traffic_type) << " @ "
           << fmt_g6(e.ue.offered_rate_mbps) << " Mbps, " << fmt_g6(e.ue.distance_m)
           << " m from "
           << (e.serving_bs >= 0 ? "BS " + std::to_string(e.serving_bs) : "least-loaded BS");
        break;
      case Event::Type::ScaleTraffic:
        os << " x" << fmt_g6(e.factor);
        break;
      case Event::Type::SetMultiplierCurve: {
        os << " [";
        for (std::size_t i = 0; i < e.curve.segments.size(); ++i)
          os << (i ? " " : "") << fmt_g6(e.curve.segments[i].second);
        os << "]";
        break;
      }
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace twinforge::scenario
