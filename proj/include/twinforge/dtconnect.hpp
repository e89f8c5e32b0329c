#pragma once

// DT-Connect source/sink flow: per-sample telemetry from the physical layer
// is aggregated over a twinning interval into immutable TelemetryBatches.
// Wire format is length-prefixed JSON lines, one batch per line.

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinforge/common.hpp"
#include "twinforge/netsim.hpp"

namespace twinforge::dtconnect {

using nlohmann::json;

enum class NodeKind { Bs, Ue };

inline const char* node_kind_name(NodeKind k) { return k == NodeKind::Bs ? "BS" : "UE"; }
inline NodeKind node_kind_from_name(const std::string& s) {
  if (s == "BS") return NodeKind::Bs;
  if (s == "UE") return NodeKind::Ue;
  throw std::invalid_argument("unknown node kind: " + s);
}

struct TwinningInterval {
  double seconds = 1.0;
  double sample_period_s = 0.1;

  void validate() const {
    if (!(sample_period_s > 0.0) || seconds < sample_period_s)
      throw std::invalid_argument("twinning interval requires seconds >= sample_period > 0");
  }
};

// Telemetry fields carry window means; property fields carry the last
// observed value of the window.
struct NodeRecord {
  std::string id;
  NodeKind kind = NodeKind::Ue;
  // UE telemetry / properties
  double rssi_dbm = 0.0;
  std::string associated_bs_mac;
  long long rx_packets = 0;
  long long tx_packets = 0;
  // BS telemetry / properties
  double cpu_util = 0.0;
  std::string ssid;
  int channel = 1;
  std::map<std::string, long long> sensed;  // neighbour id -> frames sensed in window

  bool operator==(const NodeRecord&) const = default;
};

struct TelemetryBatch {
  double interval_start = 0.0;
  double interval_end = 0.0;
  std::vector<NodeRecord> records;  // sorted by id

  bool operator==(const TelemetryBatch&) const = default;

  const NodeRecord* find(const std::string& id) const {
    for (const auto& r : records)
      if (r.id == id) return &r;
    return nullptr;
  }
};

inline void to_json(json& j, const NodeRecord& r) {
  j = json{{"id", r.id}, {"kind", node_kind_name(r.kind)}};
  if (r.kind == NodeKind::Ue) {
    j["rssi_dbm"] = r.rssi_dbm;
    j["associated_bs_mac"] = r.associated_bs_mac;
    j["rx_packets"] = r.rx_packets;
    j["tx_packets"] = r.tx_packets;
  } else {
    j["cpu_util"] = r.cpu_util;
    j["ssid"] = r.ssid;
    j["channel"] = r.channel;
    json sensed = json::object();
    for (const auto& [n, c] : r.sensed) sensed[n] = c;
    j["sensed"] = sensed;
  }
}

inline void from_json(const json& j, NodeRecord& r) {
  r.id = j.at("id").get<std::string>();
  r.kind = node_kind_from_name(j.at("kind").get<std::string>());
  if (r.kind == NodeKind::Ue) {
    r.rssi_dbm = j.at("rssi_dbm").get<double>();
    r.associated_bs_mac = j.at("associated_bs_mac").get<std::string>();
    r.rx_packets = j.at("rx_packets").get<long long>();
    r.tx_packets = j.at("tx_packets").get<long long>();
  } else {
    r.cpu_util = j.at("cpu_util").get<double>();
    r.ssid = j.at("ssid").get<std::string>();
    r.channel = j.at("channel").get<int>();
    r.sensed.clear();
    if (j.contains("sensed"))
      for (const auto& [k, v] : j.at("sensed").items())
        r.sensed[k] = v.get<long long>();
  }
}

inline void to_json(json& j, const TelemetryBatch& b) {
  j = json{{"interval_start", b.interval_start},
           {"interval_end", b.interval_end},
           {"records", b.records}};
}
inline void from_json(const json& j, TelemetryBatch& b) {
  j.at("interval_start").get_to(b.interval_start);
  j.at("interval_end").get_to(b.interval_end);
  b.records = j.at("records").get<std::vector<NodeRecord>>();
}

inline std::string bs_node_id(int id) { return "BS-" + std::to_string(id); }
inline std::string ue_node_id(int id) { return "UE-" + std::to_string(id); }

// Groups an ordered sample stream into one batch per interval window.
// Telemetry fields (rssi, cpu) are arithmetic means over the window;
// property fields (packet counters, ssid, channel, association) take the
// last observed value; BS sensed digests sum over the window.
inline std::vector<TelemetryBatch> collect(const netsim::TelemetryTrace& stream,
                                           const TwinningInterval& interval) {
  interval.validate();
  std::vector<TelemetryBatch> out;
  if (stream.empty()) return out;

  struct Accum {
    NodeKind kind = NodeKind::Ue;
    double sum_rssi = 0.0, sum_cpu = 0.0;
    long long samples = 0;
    long long rx = 0, tx = 0;
    std::string bs_mac;
    std::map<std::string, long long> sensed;
  };

  const double t0 = stream.front().t_s;
  long long window = 0;
  std::map<std::string, Accum> acc;

  auto flush = [&](long long w) {
    if (acc.empty()) return;
    TelemetryBatch b;
    b.interval_start = t0 + static_cast<double>(w) * interval.seconds;
    b.interval_end = b.interval_start + interval.seconds;
    for (const auto& [id, a] : acc) {
      NodeRecord r;
      r.id = id;
      r.kind = a.kind;
      if (a.kind == NodeKind::Ue) {
        r.rssi_dbm = a.samples > 0 ? a.sum_rssi / a.samples : 0.0;
        r.rx_packets = a.rx;
        r.tx_packets = a.tx;
        r.associated_bs_mac = a.bs_mac;
      } else {
        r.cpu_util = a.samples > 0 ? a.sum_cpu / a.samples : 0.0;
        r.ssid = "wlan-" + id;
        r.channel = 1;
        r.sensed = a.sensed;
      }
      b.records.push_back(std::move(r));
    }
    out.push_back(std::move(b));
    acc.clear();
  };

  for (const auto& s : stream) {
    // Samples mark the end of their sampling period; a sample landing exactly
    // on a window boundary opens the next window. The epsilon absorbs float
    // error in sample timestamps (true times are multiples of the slot).
    const long long w =
        static_cast<long long>(std::floor((s.t_s - t0) / interval.seconds + 1e-9));
    const long long w_clamped = std::max<long long>(0, w);
    if (w_clamped != window) {
      flush(window);
      window = w_clamped;
    }
    for (const auto& u : s.ues) {
      Accum& a = acc[ue_node_id(u.id)];
      a.kind = NodeKind::Ue;
      a.sum_rssi += u.rssi_dbm;
      a.samples++;
      a.rx = u.rx_packets;
      a.tx = u.tx_packets;
      a.bs_mac = bs_node_id(u.bs_id);
    }
    for (const auto& b : s.bss) {
      Accum& a = acc[bs_node_id(b.id)];
      a.kind = NodeKind::Bs;
      a.sum_cpu += b.cpu_util;
      a.samples++;
      for (const auto& [n, c] : b.sensed) a.sensed[bs_node_id(n)] += c;
    }
  }
  flush(window);
  return out;
}

// Length-prefixed JSON line: "<byte count> <json>\n".
inline std::string encode_batch(const TelemetryBatch& b) {
  const std::string body = json(b).dump();
  return std::to_string(body.size()) + " " + body + "\n";
}

// Decodes one batch from `data`; `consumed` reports how many input bytes the
// record occupied. Malformed input raises DecodeError with the byte offset.
inline TelemetryBatch decode_batch(std::string_view data, std::size_t* consumed = nullptr) {
  std::size_t i = 0;
  while (i < data.size() && (data[i] == '\n' || data[i] == '\r')) ++i;
  std::size_t len_end = i;
  while (len_end < data.size() && data[len_end] >= '0' && data[len_end] <= '9') ++len_end;
  if (len_end == i || len_end >= data.size() || data[len_end] != ' ')
    throw DecodeError("missing length prefix", i);
  std::size_t body_len = 0;
  for (std::size_t k = i; k < len_end; ++k) body_len = body_len * 10 + (data[k] - '0');
  const std::size_t body_start = len_end + 1;
  if (body_start + body_len > data.size())
    throw DecodeError("truncated payload: expected " + std::to_string(body_len) + " bytes",
                      data.size());
  const std::string_view body = data.substr(body_start, body_len);
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw DecodeError("invalid JSON body", body_start);
  TelemetryBatch b;
  try {
    b = j.get<TelemetryBatch>();
  } catch (const json::exception& e) {
    throw DecodeError(std::string("bad batch fields: ") + e.what(), body_start);
  }
  std::size_t end = body_start + body_len;
  if (end < data.size() && data[end] == '\n') ++end;
  if (consumed) *consumed = end;
  return b;
}

inline std::string encode_stream(const std::vector<TelemetryBatch>& batches) {
  std::string out;
  for (const auto& b : batches) out += encode_batch(b);
  return out;
}

inline std::vector<TelemetryBatch> decode_stream(std::string_view data) {
  std::vector<TelemetryBatch> out;
  std::size_t pos = 0;
  while (pos < data.size()) {
    std::size_t rest_ws = pos;
    while (rest_ws < data.size() &&
           (data[rest_ws] == '\n' || data[rest_ws] == '\r' || data[rest_ws] == ' '))
      ++rest_ws;
    if (rest_ws == data.size()) break;
    std::size_t used = 0;
    try {
      out.push_back(decode_batch(data.substr(pos), &used));
    } catch (DecodeError& e) {
      e.offset += pos;
      throw DecodeError("stream decode failed: " + std::string(e.what()), e.offset);
    }
    pos += used;
  }
  return out;
}

inline void write_stream_file(const std::vector<TelemetryBatch>& batches,
                              const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os << encode_stream(batches);
}

inline std::vector<TelemetryBatch> read_stream_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return decode_stream(ss.str());
}

}  // namespace twinforge::dtconnect
