#pragma once

// Graph store of digital twins: one mutable real-time twin, a fixed-capacity
// ring of immutable retrospective snapshots, and prospective what-if results.
// Reader-writer contract: shared lock for queries, exclusive for mutation.

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinforge/common.hpp"
#include "twinforge/dtconnect.hpp"
#include "twinforge/netsim.hpp"

namespace twinforge::twingraph {

using nlohmann::json;
using NodeKind = dtconnect::NodeKind;

struct TwinNode {
  std::string id;
  NodeKind kind = NodeKind::Ue;
  // BS: properties (ssid, channel), telemetry (cpu_util, sensed digests).
  std::string ssid;
  int channel = 1;
  double cpu_util = 0.0;
  std::map<std::string, long long> sensed_neighbors;
  // UE: properties (rx/tx packet counts), telemetry (rssi, associated BS).
  long long rx_packets = 0;
  long long tx_packets = 0;
  double rssi_dbm = 0.0;
  std::string associated_bs_mac;

  double last_update = 0.0;
  bool quarantined = false;  // excluded from feature extraction

  bool operator==(const TwinNode&) const = default;
};

struct TwinRelationship {
  std::string from_bs;
  std::string to_ue;
  double last_seen = 0.0;

  bool operator==(const TwinRelationship&) const = default;
};

inline void to_json(json& j, const TwinNode& n) {
  j = json{{"id", n.id},
           {"kind", dtconnect::node_kind_name(n.kind)},
           {"last_update", n.last_update},
           {"quarantined", n.quarantined}};
  if (n.kind == NodeKind::Bs) {
    j["ssid"] = n.ssid;
    j["channel"] = n.channel;
    j["cpu_util"] = n.cpu_util;
    json sensed = json::object();
    for (const auto& [k, v] : n.sensed_neighbors) sensed[k] = v;
    j["sensed_neighbors"] = sensed;
  } else {
    j["rx_packets"] = n.rx_packets;
    j["tx_packets"] = n.tx_packets;
    j["rssi_dbm"] = n.rssi_dbm;
    j["associated_bs_mac"] = n.associated_bs_mac;
  }
}
inline void from_json(const json& j, TwinNode& n) {
  n.id = j.at("id").get<std::string>();
  n.kind = dtconnect::node_kind_from_name(j.at("kind").get<std::string>());
  n.last_update = j.value("last_update", 0.0);
  n.quarantined = j.value("quarantined", false);
  if (n.kind == NodeKind::Bs) {
    n.ssid = j.value("ssid", "");
    n.channel = j.value("channel", 1);
    n.cpu_util = j.value("cpu_util", 0.0);
    n.sensed_neighbors.clear();
    if (j.contains("sensed_neighbors"))
      for (const auto& [k, v] : j.at("sensed_neighbors").items())
        n.sensed_neighbors[k] = v.get<long long>();
  } else {
    n.rx_packets = j.value("rx_packets", 0LL);
    n.tx_packets = j.value("tx_packets", 0LL);
    n.rssi_dbm = j.value("rssi_dbm", 0.0);
    n.associated_bs_mac = j.value("associated_bs_mac", "");
  }
}

inline void to_json(json& j, const TwinRelationship& r) {
  j = json{{"from_bs", r.from_bs}, {"to_ue", r.to_ue}, {"last_seen", r.last_seen}};
}
inline void from_json(const json& j, TwinRelationship& r) {
  j.at("from_bs").get_to(r.from_bs);
  j.at("to_ue").get_to(r.to_ue);
  j.at("last_seen").get_to(r.last_seen);
}

struct TwinSnapshot {
  double timestamp = 0.0;
  double twinning_interval_s = 0.0;
  std::vector<TwinNode> nodes;          // sorted by id
  std::vector<TwinRelationship> rels;   // sorted by (from, to)

  const TwinNode* find(const std::string& id) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                               [](const TwinNode& n, const std::string& s) { return n.id < s; });
    return (it != nodes.end() && it->id == id) ? &*it : nullptr;
  }

  int count(NodeKind k, bool include_quarantined = true) const {
    int n = 0;
    for (const auto& node : nodes)
      if (node.kind == k && (include_quarantined || !node.quarantined)) n++;
    return n;
  }

  std::uint64_t hash() const;  // defined after the JSON bindings below
};

inline void to_json(json& j, const TwinSnapshot& s) {
  j = json{{"timestamp", s.timestamp},
           {"twinning_interval_s", s.twinning_interval_s},
           {"nodes", s.nodes},
           {"relationships", s.rels}};
}
inline void from_json(const json& j, TwinSnapshot& s) {
  j.at("timestamp").get_to(s.timestamp);
  s.twinning_interval_s = j.value("twinning_interval_s", 0.0);
  s.nodes = j.at("nodes").get<std::vector<TwinNode>>();
  s.rels = j.at("relationships").get<std::vector<TwinRelationship>>();
}

inline std::uint64_t TwinSnapshot::hash() const {
  const std::string s = json(*this).dump();
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a 64
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

struct ProspectiveTwin {
  std::string scenario_id;
  netsim::RadioConfig config;
  std::map<std::string, netsim::KpiVector> predicted;  // scenario kind -> KPIs
  std::uint64_t seed = 0;
  std::string gan_model_id;

  bool operator==(const ProspectiveTwin&) const = default;
};

inline void to_json(json& j, const ProspectiveTwin& p) {
  json pred = json::object();
  for (const auto& [k, v] : p.predicted) pred[k] = v;
  j = json{{"scenario_id", p.scenario_id},
           {"config", p.config},
           {"predicted", pred},
           {"seed", p.seed},
           {"gan_model_id", p.gan_model_id}};
}
inline void from_json(const json& j, ProspectiveTwin& p) {
  j.at("scenario_id").get_to(p.scenario_id);
  p.config = j.at("config").get<netsim::RadioConfig>();
  p.predicted.clear();
  for (const auto& [k, v] : j.at("predicted").items())
    p.predicted[k] = v.get<netsim::KpiVector>();
  p.seed = j.value("seed", 0ULL);
  p.gan_model_id = j.value("gan_model_id", "");
}

struct ApplyReport {
  int updated = 0;
  int created = 0;
  std::vector<std::string> quarantined;  // monotonicity violations this batch
};

class TwinGraph {
 public:
  explicit TwinGraph(std::size_t ring_capacity = 256) : ring_capacity_(ring_capacity) {}

  TwinGraph(const TwinGraph& o) {
    std::shared_lock lk(o.mu_);
    nodes_ = o.nodes_;
    rels_ = o.rels_;
    ring_ = o.ring_;
    prospectives_ = o.prospectives_;
    ring_capacity_ = o.ring_capacity_;
    last_update_ = o.last_update_;
    next_prospective_id_ = o.next_prospective_id_;
  }

  // Applies one aggregated batch to the real-time twin. Batches must arrive
  // in order; a stale batch is rejected without touching the graph. Counter
  // regressions quarantine the node rather than failing the whole batch.
  ApplyReport apply_telemetry(const dtconnect::TelemetryBatch& batch) {
    std::unique_lock lk(mu_);
    if (batch.interval_end < last_update_)
      throw StaleBatchError("batch ends at " + fmt_g6(batch.interval_end) +
                            " before graph time " + fmt_g6(last_update_));
    ApplyReport report;
    for (const auto& rec : batch.records) {
      auto it = nodes_.find(rec.id);
      if (it == nodes_.end()) {
        TwinNode n;
        n.id = rec.id;
        n.kind = rec.kind;
        write_fields(n, rec, batch.interval_end);
        nodes_.emplace(rec.id, std::move(n));
        report.created++;
      } else {
        TwinNode& n = it->second;
        if (rec.kind == NodeKind::Ue &&
            (rec.rx_packets < n.rx_packets || rec.tx_packets < n.tx_packets)) {
          n.quarantined = true;
          n.last_update = batch.interval_end;
          report.quarantined.push_back(rec.id);
          continue;
        }
        write_fields(n, rec, batch.interval_end);
        report.updated++;
      }
      if (rec.kind == NodeKind::Ue && !rec.associated_bs_mac.empty())
        upsert_relationship(rec.associated_bs_mac, rec.id, batch.interval_end);
    }
    last_update_ = batch.interval_end;
    return report;
  }

  // Deep immutable copy appended to the retrospective ring; evicts the oldest
  // snapshot beyond capacity. Timestamps along the ring strictly increase.
  std::shared_ptr<const TwinSnapshot> snapshot_retrospective(
      double timestamp = -1.0, double twinning_interval_s = 0.0) {
    std::unique_lock lk(mu_);
    if (nodes_.empty()) throw std::invalid_argument("cannot snapshot an empty graph");
    auto snap = std::make_shared<TwinSnapshot>();
    double ts = timestamp >= 0.0 ? timestamp : last_update_;
    if (!ring_.empty() && ts <= ring_.back()->timestamp)
      ts = ring_.back()->timestamp + 1e-6;
    snap->timestamp = ts;
    snap->twinning_interval_s = twinning_interval_s;
    for (const auto& [id, n] : nodes_) snap->nodes.push_back(n);
    snap->rels = rels_;
    std::sort(snap->rels.begin(), snap->rels.end(), [](const auto& a, const auto& b) {
      return std::tie(a.from_bs, a.to_ue) < std::tie(b.from_bs, b.to_ue);
    });
    ring_.push_back(snap);
    if (ring_.size() > ring_capacity_) ring_.erase(ring_.begin());
    return snap;
  }

  // Ordered (timestamp, value) series for one node field across the ring.
  std::vector<std::pair<double, double>> query_history(const std::string& node_id,
                                                       const std::string& field,
                                                       double t_begin, double t_end) const {
    std::shared_lock lk(mu_);
    bool node_known = nodes_.count(node_id) > 0;
    std::vector<std::pair<double, double>> series;
    bool field_ok = false;
    for (const auto& snap : ring_) {
      const TwinNode* n = snap->find(node_id);
      if (!n) continue;
      node_known = true;
      const std::optional<double> v = field_value(*n, field);
      if (!v) continue;
      field_ok = true;
      if (snap->timestamp >= t_begin && snap->timestamp <= t_end)
        series.emplace_back(snap->timestamp, *v);
    }
    if (!node_known) throw NotFoundError("unknown node: " + node_id);
    if (!field_ok) {
      // Validate against the live node so an empty ring still type-checks.
      auto it = nodes_.find(node_id);
      if (it == nodes_.end() || !field_value(it->second, field))
        throw NotFoundError("unknown field '" + field + "' for node " + node_id);
    }
    return series;
  }

  // Stores a what-if result. Prospective twins are never merged into the
  // real-time twin. Duplicate (scenario, config, seed) is a conflict.
  int record_prospective(ProspectiveTwin p) {
    std::unique_lock lk(mu_);
    for (const auto& [id, q] : prospectives_) {
      if (q.scenario_id == p.scenario_id && q.config == p.config && q.seed == p.seed)
        throw ConflictError("duplicate prospective for scenario " + p.scenario_id +
                            " config " + p.config.label());
    }
    const int id = next_prospective_id_++;
    prospectives_.emplace(id, std::move(p));
    return id;
  }

  ProspectiveTwin prospective(int id) const {
    std::shared_lock lk(mu_);
    auto it = prospectives_.find(id);
    if (it == prospectives_.end())
      throw NotFoundError("no prospective twin with id " + std::to_string(id));
    return it->second;
  }

  std::vector<ProspectiveTwin> prospectives_for_scenario(const std::string& scenario_id) const {
    std::shared_lock lk(mu_);
    std::vector<ProspectiveTwin> out;
    for (const auto& [id, p] : prospectives_)
      if (p.scenario_id == scenario_id) out.push_back(p);
    return out;
  }

  std::optional<TwinNode> node(const std::string& id) const {
    std::shared_lock lk(mu_);
    auto it = nodes_.find(id);
    if (it == nodes_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t node_count() const {
    std::shared_lock lk(mu_);
    return nodes_.size();
  }
  std::size_t ring_size() const {
    std::shared_lock lk(mu_);
    return ring_.size();
  }
  std::vector<std::shared_ptr<const TwinSnapshot>> ring() const {
    std::shared_lock lk(mu_);
    return ring_;
  }
  double last_update() const {
    std::shared_lock lk(mu_);
    return last_update_;
  }

  // Hash over the real-time twin and the retrospective ring (prospective
  // storage excluded by design: it must not perturb twin state).
  std::uint64_t hash() const {
    std::shared_lock lk(mu_);
    TwinSnapshot live;
    live.timestamp = last_update_;
    for (const auto& [id, n] : nodes_) live.nodes.push_back(n);
    live.rels = rels_;
    std::uint64_t h = live.hash();
    for (const auto& s : ring_) h = derive_seed(h, s->hash());
    return h;
  }

  json to_json_full() const {
    std::shared_lock lk(mu_);
    json nodes = json::array();
    for (const auto& [id, n] : nodes_) nodes.push_back(n);
    json ring = json::array();
    for (const auto& s : ring_) ring.push_back(*s);
    json pros = json::array();
    for (const auto& [id, p] : prospectives_) {
      json pj = p;
      pj["id"] = id;
      pros.push_back(pj);
    }
    return json{{"last_update", last_update_}, {"ring_capacity", ring_capacity_},
                {"nodes", nodes},              {"relationships", rels_},
                {"ring", ring},                {"prospectives", pros}};
  }

  static TwinGraph from_json_full(const json& j) {
    TwinGraph g(j.value("ring_capacity", static_cast<std::size_t>(256)));
    g.last_update_ = j.value("last_update", 0.0);
    for (const auto& nj : j.at("nodes")) {
      TwinNode n = nj.get<TwinNode>();
      g.nodes_.emplace(n.id, std::move(n));
    }
    g.rels_ = j.at("relationships").get<std::vector<TwinRelationship>>();
    if (j.contains("ring"))
      for (const auto& sj : j.at("ring"))
        g.ring_.push_back(std::make_shared<TwinSnapshot>(sj.get<TwinSnapshot>()));
    if (j.contains("prospectives"))
      for (const auto& pj : j.at("prospectives")) {
        const int id = pj.at("id").get<int>();
        g.prospectives_.emplace(id, pj.get<ProspectiveTwin>());
        g.next_prospective_id_ = std::max(g.next_prospective_id_, id + 1);
      }
    return g;
  }

  // Append-only snapshot persistence, one JSON line per snapshot.
  void persist_ring(const std::string& path, std::size_t from_index = 0) const {
    std::shared_lock lk(mu_);
    std::ofstream os(path, std::ios::app | std::ios::binary);
    if (!os) throw IoError("cannot append to " + path);
    for (std::size_t i = from_index; i < ring_.size(); ++i)
      os << json(*ring_[i]).dump() << '\n';
  }

  static std::vector<TwinSnapshot> load_ring(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read " + path);
    std::vector<TwinSnapshot> out;
    std::string line;
    std::size_t offset = 0;
    while (std::getline(is, line)) {
      if (!line.empty()) {
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw DecodeError("invalid snapshot line", offset);
        out.push_back(j.get<TwinSnapshot>());
      }
      offset += line.size() + 1;
    }
    return out;
  }

 private:
  static void write_fields(TwinNode& n, const dtconnect::NodeRecord& r, double t) {
    if (r.kind == NodeKind::Ue) {
      n.rx_packets = r.rx_packets;
      n.tx_packets = r.tx_packets;
      n.rssi_dbm = r.rssi_dbm;
      n.associated_bs_mac = r.associated_bs_mac;
    } else {
      n.ssid = r.ssid;
      n.channel = r.channel;
      n.cpu_util = r.cpu_util;
      n.sensed_neighbors.clear();
      for (const auto& [k, v] : r.sensed) n.sensed_neighbors[k] = v;
    }
    n.last_update = t;
  }

  void upsert_relationship(const std::string& bs, const std::string& ue, double t) {
    for (auto& r : rels_)
      if (r.from_bs == bs && r.to_ue == ue) {
        r.last_seen = t;
        return;
      }
    rels_.push_back(TwinRelationship{bs, ue, t});
  }

  static std::optional<double> field_value(const TwinNode& n, const std::string& field) {
    if (n.kind == NodeKind::Ue) {
      if (field == "rssi_dbm") return n.rssi_dbm;
      if (field == "rx_packets") return static_cast<double>(n.rx_packets);
      if (field == "tx_packets") return static_cast<double>(n.tx_packets);
    } else {
      if (field == "cpu_util") return n.cpu_util;
      if (field == "channel") return static_cast<double>(n.channel);
    }
    return std::nullopt;
  }

  mutable std::shared_mutex mu_;
  std::map<std::string, TwinNode> nodes_;
  std::vector<TwinRelationship> rels_;
  std::vector<std::shared_ptr<const TwinSnapshot>> ring_;
  std::map<int, ProspectiveTwin> prospectives_;
  std::size_t ring_capacity_ = 256;
  double last_update_ = 0.0;
  int next_prospective_id_ = 1;
};

}  // namespace twinforge::twingraph
