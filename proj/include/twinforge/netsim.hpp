#pragma once

// Slot-based simulator of a dense multi-BSS WLAN sharing one 2.4 GHz channel.
// One slot carries one data packet; base stations contend per slot with a
// uniform {0..15} backoff priority and defer when the summed received power
// from already-admitted transmitters reaches their carrier-sense threshold.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <deque>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinforge/common.hpp"
#include "twinforge/rng.hpp"

namespace twinforge::netsim {

using nlohmann::json;

struct RadioConfig {
  double cst_dbm = -82.0;
  double tpc_dbm = 20.0;
  double ue_tx_dbm = 15.0;

  void validate() const {
    if (cst_dbm < -82.0 || cst_dbm > -62.0)
      throw std::invalid_argument("cst_dbm outside [-82, -62]");
    if (tpc_dbm < 10.0 || tpc_dbm > 20.0)
      throw std::invalid_argument("tpc_dbm outside [10, 20]");
    if (ue_tx_dbm < 10.0 || ue_tx_dbm > 20.0)
      throw std::invalid_argument("ue_tx_dbm outside [10, 20]");
  }

  bool operator==(const RadioConfig&) const = default;

  std::string label() const {
    return "cst" + fmt_g6(cst_dbm) + "_tpc" + fmt_g6(tpc_dbm);
  }
};

inline void to_json(json& j, const RadioConfig& c) {
  j = json{{"cst_dbm", c.cst_dbm}, {"tpc_dbm", c.tpc_dbm}, {"ue_tx_dbm", c.ue_tx_dbm}};
}
inline void from_json(const json& j, RadioConfig& c) {
  j.at("cst_dbm").get_to(c.cst_dbm);
  j.at("tpc_dbm").get_to(c.tpc_dbm);
  j.at("ue_tx_dbm").get_to(c.ue_tx_dbm);
}

struct BaseStation {
  int id = 0;
  double x = 0.0, y = 0.0;
  RadioConfig radio;
};

struct UserEquipment {
  int id = 0;
  int bs_id = 0;
  double x = 0.0, y = 0.0;
};

struct Topology {
  std::vector<BaseStation> bss;
  std::vector<UserEquipment> ues;
  std::uint64_t seed = 0;

  void validate() const {
    for (const auto& b : bss) b.radio.validate();
    for (const auto& u : ues) {
      if (bs_index(u.bs_id) < 0)
        throw std::invalid_argument("UE " + std::to_string(u.id) +
                                    " references unknown BS " + std::to_string(u.bs_id));
    }
  }

  int bs_index(int bs_id) const {
    for (std::size_t i = 0; i < bss.size(); ++i)
      if (bss[i].id == bs_id) return static_cast<int>(i);
    return -1;
  }

  int max_ue_id() const {
    int m = -1;
    for (const auto& u : ues) m = std::max(m, u.id);
    return m;
  }

  // Stable identity of the placement and radio plan; used to pair SimResults
  // with the topology they came from.
  std::uint64_t fingerprint() const {
    std::uint64_t h = derive_seed(0x7f1e57a7ULL, bss.size(), ues.size());
    auto mix_d = [&h](double v) {
      std::uint64_t bits;
      static_assert(sizeof(bits) == sizeof(v));
      std::memcpy(&bits, &v, sizeof(bits));
      h = derive_seed(h, bits);
    };
    for (const auto& b : bss) {
      h = derive_seed(h, static_cast<std::uint64_t>(b.id));
      mix_d(b.x);
      mix_d(b.y);
      mix_d(b.radio.cst_dbm);
      mix_d(b.radio.tpc_dbm);
    }
    for (const auto& u : ues) {
      h = derive_seed(h, static_cast<std::uint64_t>(u.id), static_cast<std::uint64_t>(u.bs_id));
      mix_d(u.x);
      mix_d(u.y);
    }
    return h;
  }
};

inline void to_json(json& j, const Topology& t) {
  json bss = json::array();
  for (const auto& b : t.bss)
    bss.push_back({{"id", b.id}, {"x", b.x}, {"y", b.y}, {"radio", b.radio}});
  json ues = json::array();
  for (const auto& u : t.ues)
    ues.push_back({{"id", u.id}, {"bs", u.bs_id}, {"x", u.x}, {"y", u.y}});
  j = json{{"seed", t.seed}, {"bss", bss}, {"ues", ues}};
}
inline void from_json(const json& j, Topology& t) {
  t.seed = j.value("seed", 0ULL);
  t.bss.clear();
  for (const auto& b : j.at("bss")) {
    BaseStation s;
    s.id = b.at("id").get<int>();
    s.x = b.at("x").get<double>();
    s.y = b.at("y").get<double>();
    if (b.contains("radio")) s.radio = b.at("radio").get<RadioConfig>();
    t.bss.push_back(s);
  }
  t.ues.clear();
  for (const auto& u : j.at("ues")) {
    UserEquipment e;
    e.id = u.at("id").get<int>();
    e.bs_id = u.at("bs").get<int>();
    e.x = u.at("x").get<double>();
    e.y = u.at("y").get<double>();
    t.ues.push_back(e);
  }
}

// Log-distance propagation: 40 dB at the 1 m reference, exponent 3.5.
inline double path_loss_db(double distance_m) {
  const double d = std::max(distance_m, 1.0);
  return 40.0 + 10.0 * 3.5 * std::log10(d);
}

inline double rssi_dbm(double tx_power_dbm, double distance_m) {
  return tx_power_dbm - path_loss_db(distance_m);
}

// BSs on a square grid, each with a uniform-random UE count in
// [range.first, range.second]; UEs uniform in a disc of radius `spacing`
// around their BS so neighbouring cells always overlap.
inline Topology build_topology(int num_bs, std::pair<int, int> ue_per_bs_range,
                               double area_spacing_m, std::uint64_t seed) {
  if (num_bs < 1) throw std::invalid_argument("num_bs must be >= 1");
  if (ue_per_bs_range.first > ue_per_bs_range.second || ue_per_bs_range.first < 0)
    throw std::invalid_argument("invalid ue_per_bs range");
  if (!(area_spacing_m > 0.0)) throw std::invalid_argument("spacing must be positive");

  Topology t;
  t.seed = seed;
  const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(num_bs))));
  for (int i = 0; i < num_bs; ++i) {
    BaseStation b;
    b.id = i;
    b.x = (i % side) * area_spacing_m;
    b.y = (i / side) * area_spacing_m;
    t.bss.push_back(b);
  }
  RandomStream rng(derive_seed(seed, 0x70b0ULL));
  int next_ue = 0;
  for (int i = 0; i < num_bs; ++i) {
    const int n = static_cast<int>(
        rng.uniform_int(ue_per_bs_range.first, ue_per_bs_range.second));
    for (int k = 0; k < n; ++k) {
      const double r = area_spacing_m * std::sqrt(rng.uniform());
      const double a = 2.0 * M_PI * rng.uniform();
      UserEquipment u;
      u.id = next_ue++;
      u.bs_id = i;
      u.x = t.bss[i].x + r * std::cos(a);
      u.y = t.bss[i].y + r * std::sin(a);
      t.ues.push_back(u);
    }
  }
  return t;
}

enum class TrafficType { Cbr, Http, Video };

inline const char* traffic_type_name(TrafficType t) {
  switch (t) {
    case TrafficType::Cbr: return "CBR";
    case TrafficType::Http: return "HTTP";
    case TrafficType::Video: return "Video";
  }
  return "CBR";
}

inline TrafficType traffic_type_from_name(const std::string& s) {
  if (s == "CBR") return TrafficType::Cbr;
  if (s == "HTTP") return TrafficType::Http;
  if (s == "Video") return TrafficType::Video;
  throw std::invalid_argument("unknown traffic type: " + s);
}

// Piecewise-constant rate multiplier, periodic with `period_s`. Empty curve
// means a constant 1.0.
struct MultiplierCurve {
  double period_s = 0.0;
  std::vector<std::pair<double, double>> segments;  // (end fraction of period, value)

  double value(double t_s) const {
    if (segments.empty() || period_s <= 0.0) return 1.0;
    double frac = std::fmod(t_s, period_s) / period_s;
    if (frac < 0.0) frac += 1.0;
    for (const auto& [end_frac, v] : segments)
      if (frac < end_frac) return v;
    return segments.back().second;
  }

  double mean() const {
    if (segments.empty()) return 1.0;
    double m = 0.0, prev = 0.0;
    for (const auto& [end_frac, v] : segments) {
      m += (end_frac - prev) * v;
      prev = end_frac;
    }
    return m;
  }

  bool operator==(const MultiplierCurve&) const = default;
};

inline void to_json(json& j, const MultiplierCurve& c) {
  json segs = json::array();
  for (const auto& [f, v] : c.segments) segs.push_back({{"end_frac", f}, {"value", v}});
  j = json{{"period_s", c.period_s}, {"segments", segs}};
}
inline void from_json(const json& j, MultiplierCurve& c) {
  c.period_s = j.value("period_s", 0.0);
  c.segments.clear();
  if (j.contains("segments"))
    for (const auto& s : j.at("segments"))
      c.segments.emplace_back(s.at("end_frac").get<double>(), s.at("value").get<double>());
}

struct Flow {
  int ue_id = 0;
  TrafficType type = TrafficType::Cbr;
  double rate_mbps = 0.0;
  // On/off burst shape for HTTP (Pareto-like on period, exponential off).
  double on_mean_s = 0.06;
  double off_mean_s = 0.14;

  bool operator==(const Flow&) const = default;
};

struct TrafficProfile {
  double target_mbps_per_bss = 100.0;
  std::vector<Flow> flows;
  MultiplierCurve curve;

  bool operator==(const TrafficProfile&) const = default;

  double aggregate_offered_mbps() const {
    double s = 0.0;
    for (const auto& f : flows) s += f.rate_mbps;
    return s;
  }

  // Per-BSS configured load must match the target within 1% at multiplier 1.
  void validate(const Topology& topo) const {
    std::map<int, double> per_bss;
    for (const auto& f : flows) {
      bool found = false;
      for (const auto& u : topo.ues)
        if (u.id == f.ue_id) {
          per_bss[u.bs_id] += f.rate_mbps;
          found = true;
          break;
        }
      if (!found)
        throw std::invalid_argument("flow references unknown UE " + std::to_string(f.ue_id));
    }
    for (const auto& [bs, load] : per_bss) {
      if (std::abs(load - target_mbps_per_bss) > 0.01 * target_mbps_per_bss)
        throw std::invalid_argument("BSS " + std::to_string(bs) +
                                    " offered load off target by more than 1%");
    }
  }
};

inline void to_json(json& j, const TrafficProfile& t) {
  json flows = json::array();
  for (const auto& f : t.flows)
    flows.push_back({{"ue", f.ue_id},
                     {"type", traffic_type_name(f.type)},
                     {"rate_mbps", f.rate_mbps},
                     {"on_mean_s", f.on_mean_s},
                     {"off_mean_s", f.off_mean_s}});
  j = json{{"target_mbps_per_bss", t.target_mbps_per_bss},
           {"flows", flows},
           {"multiplier", t.curve}};
}
inline void from_json(const json& j, TrafficProfile& t) {
  t.target_mbps_per_bss = j.at("target_mbps_per_bss").get<double>();
  t.flows.clear();
  for (const auto& f : j.at("flows")) {
    Flow fl;
    fl.ue_id = f.at("ue").get<int>();
    fl.type = traffic_type_from_name(f.at("type").get<std::string>());
    fl.rate_mbps = f.at("rate_mbps").get<double>();
    fl.on_mean_s = f.value("on_mean_s", 0.06);
    fl.off_mean_s = f.value("off_mean_s", 0.14);
    t.flows.push_back(fl);
  }
  if (j.contains("multiplier")) t.curve = j.at("multiplier").get<MultiplierCurve>();
}

// One flow per UE, target split equally inside each BSS, flow type seeded.
inline TrafficProfile make_traffic(const Topology& topo, double target_mbps_per_bss,
                                   std::uint64_t seed) {
  if (!(target_mbps_per_bss >= 0.0))
    throw std::invalid_argument("target load must be non-negative");
  TrafficProfile p;
  p.target_mbps_per_bss = target_mbps_per_bss;
  std::map<int, int> ue_count;
  for (const auto& u : topo.ues) ue_count[u.bs_id]++;
  RandomStream rng(derive_seed(seed, 0x7aff1cULL));
  for (const auto& u : topo.ues) {
    Flow f;
    f.ue_id = u.id;
    const int pick = static_cast<int>(rng.uniform_int(0, 2));
    f.type = pick == 0 ? TrafficType::Cbr : (pick == 1 ? TrafficType::Http : TrafficType::Video);
    f.rate_mbps = target_mbps_per_bss / ue_count[u.bs_id];
    p.flows.push_back(f);
  }
  return p;
}

struct SimParams {
  double slot_us = 135.0;          // one packet airtime
  int packet_bytes = 1464;
  double phy_rate_mbps = 86.7;     // metadata; airtime already folded into slot_us
  double noise_floor_dbm = -94.0;  // thermal + 7 dB NF over 20 MHz
  double sinr_threshold_db = 25.0; // hard 256-QAM success rule
  double sensitivity_dbm = -82.0;  // coverage / frame-detection threshold
  int retry_limit = 7;
  int backoff_window = 16;         // priorities drawn from {0..window-1}
  int max_queue_per_bs = 20000;    // arrivals beyond this resolve as lost
  double sample_period_s = 0.1;    // telemetry sub-sampling period
  // Carried as metadata only; beacons consume no airtime in this abstraction.
  double beacon_interval_ms = 102.4;
  double guard_interval_us = 1.6;
  std::string modulation = "256-QAM";
  std::string band = "2.4GHz/20MHz";
};

struct UeCounters {
  long long packets_sent = 0;       // resolved: delivered + lost
  long long packets_delivered = 0;
  long long packets_lost = 0;
  unsigned long long sum_latency_slots = 0;  // delivered packets only
};

struct BsCounters {
  long long airtime_busy_slots = 0;
  long long deferral_count = 0;
  long long collision_count = 0;  // transmission attempts that failed the SINR rule
};

// Per-sample telemetry snapshot used by the DT-Connect pipeline.
struct TelemetrySample {
  struct UePoint {
    int id = 0;
    double rssi_dbm = 0.0;
    long long rx_packets = 0;  // cumulative delivered
    long long tx_packets = 0;  // cumulative resolved attempts toward this UE
    int bs_id = 0;
  };
  struct BsPoint {
    int id = 0;
    double cpu_util = 0.0;               // busy-airtime fraction over the sample window
    std::map<int, long long> sensed;     // neighbour BS -> frames sensed above sensitivity
  };
  double t_s = 0.0;
  std::vector<UePoint> ues;
  std::vector<BsPoint> bss;
};

using TelemetryTrace = std::vector<TelemetrySample>;

struct SimResult {
  std::vector<UeCounters> ue;            // indexed like topology.ues
  std::vector<BsCounters> bs;            // indexed like topology.bss
  long long duration_slots = 0;
  double slot_us = 135.0;
  int packet_bytes = 1464;
  std::vector<std::vector<double>> rssi; // [bs_index][ue_index] received power dBm
  std::vector<std::uint16_t> concurrent_tx;  // transmitters per slot
  std::uint64_t topology_fingerprint = 0;

  long long total_sent() const {
    long long s = 0;
    for (const auto& u : ue) s += u.packets_sent;
    return s;
  }
  long long total_delivered() const {
    long long s = 0;
    for (const auto& u : ue) s += u.packets_delivered;
    return s;
  }
  long long total_lost() const {
    long long s = 0;
    for (const auto& u : ue) s += u.packets_lost;
    return s;
  }

  // One row per UE.
  void write_csv(std::ostream& os, const Topology& topo) const {
    os << "ue_id,bs_id,packets_sent,packets_delivered,packets_lost,mean_latency_ms,serving_rssi_dbm\n";
    for (std::size_t i = 0; i < ue.size(); ++i) {
      const auto& u = topo.ues[i];
      const int bi = topo.bs_index(u.bs_id);
      const double lat = ue[i].packets_delivered > 0
                             ? static_cast<double>(ue[i].sum_latency_slots) /
                                   ue[i].packets_delivered * slot_us / 1000.0
                             : 0.0;
      os << u.id << ',' << u.bs_id << ',' << ue[i].packets_sent << ','
         << ue[i].packets_delivered << ',' << ue[i].packets_lost << ','
         << fmt_g6(lat) << ',' << fmt_g6(rssi[bi][i]) << '\n';
    }
  }
};

struct KpiVector {
  double t = 0.0;   // aggregate throughput, Mbps
  double l = 0.0;   // mean delivered-packet latency, ms
  double pl = 0.0;  // loss fraction
  double c = 0.0;   // coverage fraction

  void validate() const {
    if (t < 0.0 || l < 0.0 || pl < 0.0 || pl > 1.0 || c < 0.0 || c > 1.0)
      throw std::invalid_argument("KPI vector outside its domain");
  }
  bool operator==(const KpiVector&) const = default;
};

inline void to_json(json& j, const KpiVector& k) {
  j = json{{"t", k.t}, {"l", k.l}, {"pl", k.pl}, {"c", k.c}};
}
inline void from_json(const json& j, KpiVector& k) {
  j.at("t").get_to(k.t);
  j.at("l").get_to(k.l);
  j.at("pl").get_to(k.pl);
  j.at("c").get_to(k.c);
}

namespace detail {

// Incremental packet-arrival generators. Arrivals are a function of the flow
// definition, the slot index and the flow's own RNG stream, never of MAC
// state, so traffic is identical across runs that differ only in radio
// configuration.
struct FlowState {
  const Flow* flow = nullptr;
  int ue_index = 0;
  int bs_index = 0;
  double accum = 0.0;       // fractional packets owed (CBR / HTTP-on)
  bool http_on = false;
  double state_left_s = 0.0;
  double frame_timer_s = 0.0;
  RandomStream rng{0};
};

inline int drain_accumulator(double& accum) {
  const int n = static_cast<int>(accum);
  accum -= n;
  return n;
}

}  // namespace detail

inline SimResult simulate(const Topology& topo, const TrafficProfile& traffic,
                          long long duration_slots, std::uint64_t seed,
                          const SimParams& params = {},
                          TelemetryTrace* trace = nullptr) {
  if (duration_slots < 1) throw std::invalid_argument("duration_slots must be >= 1");
  topo.validate();

  const int nb = static_cast<int>(topo.bss.size());
  const int nu = static_cast<int>(topo.ues.size());
  const double slot_s = params.slot_us * 1e-6;
  const double bits_per_packet = params.packet_bytes * 8.0;

  SimResult res;
  res.ue.resize(nu);
  res.bs.resize(nb);
  res.duration_slots = duration_slots;
  res.slot_us = params.slot_us;
  res.packet_bytes = params.packet_bytes;
  res.topology_fingerprint = topo.fingerprint();
  res.concurrent_tx.assign(static_cast<std::size_t>(duration_slots), 0);

  // Static link budget: received power depends on geometry and TPC only.
  res.rssi.assign(nb, std::vector<double>(nu, 0.0));
  std::vector<std::vector<double>> bs_rx_mw(nb, std::vector<double>(nb, 0.0));
  std::vector<std::vector<double>> bs_rx_dbm(nb, std::vector<double>(nb, 0.0));
  for (int a = 0; a < nb; ++a) {
    for (int u = 0; u < nu; ++u) {
      const double d = std::hypot(topo.bss[a].x - topo.ues[u].x, topo.bss[a].y - topo.ues[u].y);
      res.rssi[a][u] = rssi_dbm(topo.bss[a].radio.tpc_dbm, d);
    }
    for (int b = 0; b < nb; ++b) {
      if (a == b) continue;
      const double d = std::hypot(topo.bss[a].x - topo.bss[b].x, topo.bss[a].y - topo.bss[b].y);
      bs_rx_dbm[b][a] = rssi_dbm(topo.bss[a].radio.tpc_dbm, d);  // power of a heard at b
      bs_rx_mw[b][a] = dbm_to_mw(bs_rx_dbm[b][a]);
    }
  }
  std::vector<std::vector<double>> ue_rx_mw(nb, std::vector<double>(nu, 0.0));
  for (int a = 0; a < nb; ++a)
    for (int u = 0; u < nu; ++u) ue_rx_mw[a][u] = dbm_to_mw(res.rssi[a][u]);

  // Flow setup.
  std::vector<detail::FlowState> flows;
  flows.reserve(traffic.flows.size());
  std::vector<int> ue_index_of_id(static_cast<std::size_t>(topo.max_ue_id()) + 1, -1);
  for (int i = 0; i < nu; ++i) ue_index_of_id[topo.ues[i].id] = i;
  for (std::size_t fi = 0; fi < traffic.flows.size(); ++fi) {
    const Flow& f = traffic.flows[fi];
    if (f.ue_id < 0 || f.ue_id >= static_cast<int>(ue_index_of_id.size()) ||
        ue_index_of_id[f.ue_id] < 0)
      throw std::invalid_argument("flow references unknown UE " + std::to_string(f.ue_id));
    detail::FlowState st;
    st.flow = &f;
    st.ue_index = ue_index_of_id[f.ue_id];
    st.bs_index = topo.bs_index(topo.ues[st.ue_index].bs_id);
    st.rng = RandomStream(derive_seed(seed, 0xf70eULL, fi));
    if (f.type == TrafficType::Http) {
      st.http_on = st.rng.uniform() < f.on_mean_s / (f.on_mean_s + f.off_mean_s);
      st.state_left_s = st.http_on ? st.rng.pareto(1.5, f.on_mean_s / 3.0)
                                   : st.rng.exponential(f.off_mean_s);
    }
    flows.push_back(std::move(st));
  }

  struct Packet {
    int ue_index;
    long long enqueue_slot;
    int attempts = 0;
  };
  std::vector<std::deque<Packet>> queues(nb);

  const double noise_mw = dbm_to_mw(params.noise_floor_dbm);
  const long long sample_period_slots =
      std::max<long long>(1, std::llround(params.sample_period_s / slot_s));

  // Telemetry accumulators (only maintained when a trace is requested).
  std::vector<long long> win_busy(nb, 0);
  std::vector<std::map<int, long long>> win_sensed(nb);
  std::vector<long long> cum_rx(nu, 0), cum_tx(nu, 0);

  std::vector<int> candidates, admitted;
  candidates.reserve(nb);
  admitted.reserve(nb);

  for (long long slot = 0; slot < duration_slots; ++slot) {
    const double t_s = slot * slot_s;
    const double mult = traffic.curve.value(t_s);

    // 1. Arrivals.
    for (auto& st : flows) {
      const Flow& f = *st.flow;
      const double pkts_per_slot = f.rate_mbps * mult * params.slot_us / bits_per_packet;
      int arriving = 0;
      switch (f.type) {
        case TrafficType::Cbr: {
          st.accum += pkts_per_slot;
          arriving = detail::drain_accumulator(st.accum);
          break;
        }
        case TrafficType::Http: {
          st.state_left_s -= slot_s;
          while (st.state_left_s <= 0.0) {
            st.http_on = !st.http_on;
            st.state_left_s += st.http_on ? st.rng.pareto(1.5, f.on_mean_s / 3.0)
                                          : st.rng.exponential(f.off_mean_s);
          }
          if (st.http_on) {
            const double duty = f.on_mean_s / (f.on_mean_s + f.off_mean_s);
            st.accum += pkts_per_slot / duty;
            arriving = detail::drain_accumulator(st.accum);
          }
          break;
        }
        case TrafficType::Video: {
          st.frame_timer_s += slot_s;
          const double frame_period = 1.0 / 30.0;
          if (st.frame_timer_s >= frame_period) {
            st.frame_timer_s -= frame_period;
            st.accum += pkts_per_slot * frame_period / slot_s;
            arriving = detail::drain_accumulator(st.accum);
          }
          break;
        }
      }
      for (int k = 0; k < arriving; ++k) {
        auto& q = queues[st.bs_index];
        if (static_cast<int>(q.size()) >= params.max_queue_per_bs) {
          // Queue overflow resolves immediately as a loss.
          res.ue[st.ue_index].packets_sent++;
          res.ue[st.ue_index].packets_lost++;
          cum_tx[st.ue_index]++;
        } else {
          q.push_back(Packet{st.ue_index, slot, 0});
        }
      }
    }

    // 2. Contention: backlogged BSs draw an intra-slot backoff priority from
    // {0..window-1}; draws are keyed by (seed, bs, slot) so candidacy does not
    // depend on radio configuration or past outcomes.
    candidates.clear();
    for (int b = 0; b < nb; ++b)
      if (!queues[b].empty()) candidates.push_back(b);
    std::sort(candidates.begin(), candidates.end(), [&](int a, int b) {
      const std::uint64_t pa = mix64(seed, {0xba0cULL, static_cast<std::uint64_t>(a),
                                            static_cast<std::uint64_t>(slot)}) %
                               static_cast<std::uint64_t>(params.backoff_window);
      const std::uint64_t pb = mix64(seed, {0xba0cULL, static_cast<std::uint64_t>(b),
                                            static_cast<std::uint64_t>(slot)}) %
                               static_cast<std::uint64_t>(params.backoff_window);
      return pa != pb ? pa < pb : a < b;
    });

    // 3. Carrier-sense admission in priority order: transmit only when the
    // summed received power of already-admitted transmitters stays below CST.
    admitted.clear();
    for (int b : candidates) {
      double sensed_mw = 0.0;
      for (int a : admitted) sensed_mw += bs_rx_mw[b][a];
      const bool busy = sensed_mw > 0.0 &&
                        mw_to_dbm(sensed_mw) >= topo.bss[b].radio.cst_dbm;
      if (busy) {
        res.bs[b].deferral_count++;
      } else {
        admitted.push_back(b);
      }
    }
    res.concurrent_tx[static_cast<std::size_t>(slot)] =
        static_cast<std::uint16_t>(admitted.size());

    // 4. Delivery: hard SINR threshold against noise plus co-slot interference.
    for (int b : admitted) {
      Packet& pkt = queues[b].front();
      const int u = pkt.ue_index;
      double interference_mw = 0.0;
      for (int a : admitted)
        if (a != b) interference_mw += ue_rx_mw[a][u];
      const double sinr_db = res.rssi[b][u] - mw_to_dbm(noise_mw + interference_mw);
      res.bs[b].airtime_busy_slots++;
      if (trace) win_busy[b]++;
      if (sinr_db >= params.sinr_threshold_db) {
        res.ue[u].packets_delivered++;
        res.ue[u].packets_sent++;
        res.ue[u].sum_latency_slots +=
            static_cast<unsigned long long>(slot - pkt.enqueue_slot + 1);
        cum_rx[u]++;
        cum_tx[u]++;
        queues[b].pop_front();
      } else {
        res.bs[b].collision_count++;
        pkt.attempts++;
        if (pkt.attempts > params.retry_limit) {
          res.ue[u].packets_lost++;
          res.ue[u].packets_sent++;
          cum_tx[u]++;
          queues[b].pop_front();
        }
      }
    }

    if (trace) {
      for (int b : admitted)
        for (int other = 0; other < nb; ++other)
          if (other != b && bs_rx_dbm[other][b] >= params.sensitivity_dbm)
            win_sensed[other][b]++;
      if ((slot + 1) % sample_period_slots == 0 || slot + 1 == duration_slots) {
        TelemetrySample s;
        s.t_s = (slot + 1) * slot_s;
        const long long window =
            std::min<long long>(sample_period_slots, (slot % sample_period_slots) + 1);
        for (int u = 0; u < nu; ++u) {
          const int bi = topo.bs_index(topo.ues[u].bs_id);
          s.ues.push_back({topo.ues[u].id, res.rssi[bi][u], cum_rx[u], cum_tx[u],
                           topo.ues[u].bs_id});
        }
        for (int b = 0; b < nb; ++b) {
          TelemetrySample::BsPoint p;
          p.id = topo.bss[b].id;
          p.cpu_util = static_cast<double>(win_busy[b]) / static_cast<double>(window);
          p.sensed = win_sensed[b];
          s.bss.push_back(std::move(p));
          win_busy[b] = 0;
          win_sensed[b].clear();
        }
        trace->push_back(std::move(s));
      }
    }
  }
  return res;
}

inline KpiVector measure_kpis(const SimResult& result, const Topology& topo,
                              double sensitivity_dbm = -82.0) {
  if (result.topology_fingerprint != topo.fingerprint() ||
      result.ue.size() != topo.ues.size() || result.bs.size() != topo.bss.size())
    throw std::invalid_argument("SimResult does not match this topology");

  KpiVector k;
  const double wall_us = static_cast<double>(result.duration_slots) * result.slot_us;
  long long delivered = 0, sent = 0, lost = 0;
  unsigned long long lat = 0;
  for (const auto& u : result.ue) {
    delivered += u.packets_delivered;
    sent += u.packets_sent;
    lost += u.packets_lost;
    lat += u.sum_latency_slots;
  }
  const double bits = static_cast<double>(delivered) * result.packet_bytes * 8.0;
  k.t = wall_us > 0.0 ? bits / wall_us : 0.0;  // bits/us == Mbps
  k.l = delivered > 0 ? static_cast<double>(lat) / delivered * result.slot_us / 1000.0 : 0.0;
  k.pl = sent > 0 ? static_cast<double>(lost) / static_cast<double>(sent) : 0.0;
  int covered = 0;
  for (std::size_t u = 0; u < topo.ues.size(); ++u) {
    const int bi = topo.bs_index(topo.ues[u].bs_id);
    if (result.rssi[bi][u] >= sensitivity_dbm) covered++;
  }
  k.c = topo.ues.empty() ? 0.0 : static_cast<double>(covered) / topo.ues.size();
  return k;
}

inline void save_json_file(const json& j, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << j.dump(2) << '\n';
}

inline json load_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path);
  json j;
  try {
    is >> j;
  } catch (const json::parse_error& e) {
    throw DecodeError(std::string("invalid JSON in ") + path + ": " + e.what(), e.byte);
  }
  return j;
}

}  // namespace twinforge::netsim
