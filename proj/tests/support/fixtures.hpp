#pragma once

// Shared test fixtures: a small simulated world pushed through the telemetry
// pipeline into a twin snapshot, plus a quickly trained flow GAN.

#include <vector>

#include "twinforge/dtconnect.hpp"
#include "twinforge/netsim.hpp"
#include "twinforge/tabgan.hpp"
#include "twinforge/twingraph.hpp"

namespace twinforge::testing {

struct World {
  netsim::Topology topology;
  netsim::TrafficProfile traffic;
  twingraph::TwinGraph graph;
  std::shared_ptr<const twingraph::TwinSnapshot> snapshot;
};

inline World make_world(int num_bs, std::uint64_t seed, double mbps_per_bss = 8.0,
                        double spacing_m = 25.0, std::pair<int, int> ue_range = {4, 6},
                        long long slots = 1500) {
  World w;
  w.topology = netsim::build_topology(num_bs, ue_range, spacing_m, seed);
  w.traffic = netsim::make_traffic(w.topology, mbps_per_bss, seed);
  netsim::TelemetryTrace trace;
  netsim::simulate(w.topology, w.traffic, slots, seed, {}, &trace);
  const auto batches = dtconnect::collect(trace, {0.1, 0.1});
  for (const auto& b : batches) w.graph.apply_telemetry(b);
  w.snapshot = w.graph.snapshot_retrospective(w.graph.last_update(), 0.1);
  return w;
}

// Flow rows describing the world's own traffic, with seeded hour buckets.
inline std::vector<tabgan::TableRow> flow_rows_of(const World& w, std::uint64_t seed) {
  RandomStream rng(derive_seed(seed, 0xf10caULL));
  std::vector<tabgan::TableRow> rows;
  for (const auto& f : w.traffic.flows) {
    const netsim::UserEquipment* ue = nullptr;
    for (const auto& u : w.topology.ues)
      if (u.id == f.ue_id) ue = &u;
    const auto& bs = w.topology.bss[w.topology.bs_index(ue->bs_id)];
    tabgan::FlowRecord rec;
    rec.bs_id = ue->bs_id;
    rec.traffic_type = f.type;
    rec.offered_rate_mbps = f.rate_mbps;
    rec.distance_m = std::max(0.1, std::hypot(ue->x - bs.x, ue->y - bs.y));
    rec.hour_bucket = static_cast<int>(rng.discrete({0.15, 0.25, 0.35, 0.25}));
    rows.push_back(tabgan::flow_to_row(rec));
  }
  return rows;
}

inline tabgan::GanModel make_flow_gan(const World& w, std::uint64_t seed, int epochs = 8) {
  const auto base_rows = flow_rows_of(w, seed);
  // Duplicate rows until the table supports the training batch size.
  auto rows = base_rows;
  while (rows.size() < 128) rows.insert(rows.end(), base_rows.begin(), base_rows.end());
  auto schema = tabgan::flow_schema(static_cast<int>(w.topology.bss.size()));
  tabgan::fit_schema_bounds(schema, rows);
  tabgan::GanHyper hyper;
  hyper.epochs = epochs;
  hyper.batch = 32;
  hyper.z_dim = 8;
  hyper.hidden = {32, 32};
  hyper.seed = seed;
  return tabgan::train(rows, schema, hyper);
}

}  // namespace twinforge::testing
