#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "twinforge/netsim.hpp"

using namespace twinforge;
using namespace twinforge::netsim;

namespace {

Topology two_bs_saturated_topology(double separation_m) {
  Topology t;
  t.bss.push_back({0, 0.0, 0.0, {}});
  t.bss.push_back({1, separation_m, 0.0, {}});
  t.ues.push_back({0, 0, 3.0, 0.0});
  t.ues.push_back({1, 1, separation_m - 3.0, 0.0});
  return t;
}

TrafficProfile saturating_traffic(const Topology& topo, double mbps_per_ue) {
  TrafficProfile p;
  p.target_mbps_per_bss = mbps_per_ue;
  for (const auto& u : topo.ues)
    p.flows.push_back({u.id, TrafficType::Cbr, mbps_per_ue});
  return p;
}

}  // namespace

TEST_CASE("build_topology places the requested population") {
  SECTION("fixed range forces the exact count") {
    const auto t = build_topology(3, {12, 12}, 40.0, 7);
    CHECK(t.bss.size() == 3);
    CHECK(t.ues.size() == 36);
  }
  SECTION("same seed reproduces the same topology") {
    const auto a = build_topology(9, {10, 15}, 40.0, 1);
    const auto b = build_topology(9, {10, 15}, 40.0, 1);
    REQUIRE(a.ues.size() == b.ues.size());
    CHECK(a.fingerprint() == b.fingerprint());
    const auto c = build_topology(9, {10, 15}, 40.0, 2);
    CHECK(a.fingerprint() != c.fingerprint());
  }
  SECTION("total UE count respects the range bounds") {
    const auto t = build_topology(27, {10, 15}, 40.0, 3);
    CHECK(t.ues.size() >= 270);
    CHECK(t.ues.size() <= 405);
  }
  SECTION("UEs stay within one spacing of their BS") {
    const auto t = build_topology(9, {10, 15}, 25.0, 5);
    for (const auto& u : t.ues) {
      const auto& b = t.bss[t.bs_index(u.bs_id)];
      CHECK(std::hypot(u.x - b.x, u.y - b.y) <= 25.0 + 1e-9);
    }
  }
  SECTION("invalid arguments are rejected") {
    CHECK_THROWS_AS(build_topology(3, {12, 12}, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(build_topology(3, {15, 10}, 40.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(build_topology(0, {10, 15}, 40.0, 1), std::invalid_argument);
  }
}

TEST_CASE("path loss follows the log-distance model") {
  CHECK(path_loss_db(1.0) == Catch::Approx(40.0).margin(1e-12));
  CHECK(path_loss_db(10.0) == Catch::Approx(75.0).margin(1e-12));
  CHECK(path_loss_db(100.0) == Catch::Approx(110.0).margin(1e-12));
  // Distances below the 1 m reference clamp to the reference.
  CHECK(path_loss_db(0.1) == Catch::Approx(40.0).margin(1e-12));
}

TEST_CASE("rssi is transmit power minus path loss") {
  CHECK(rssi_dbm(20.0, 10.0) == Catch::Approx(-55.0).margin(1e-12));
  CHECK(rssi_dbm(15.0, 1.0) == Catch::Approx(-25.0).margin(1e-12));
  double prev = rssi_dbm(20.0, 1.5);
  for (double d = 2.0; d < 200.0; d *= 1.3) {
    const double cur = rssi_dbm(20.0, d);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("lone link with healthy SINR never loses packets") {
  Topology t;
  t.bss.push_back({0, 0.0, 0.0, {}});
  t.ues.push_back({0, 0, 10.0, 0.0});
  TrafficProfile p;
  p.target_mbps_per_bss = 5.0;
  p.flows.push_back({0, TrafficType::Cbr, 5.0});
  const auto r = simulate(t, p, 4000, 9);
  CHECK(r.ue[0].packets_lost == 0);
  CHECK(r.ue[0].packets_delivered > 0);
  CHECK(r.ue[0].packets_sent == r.ue[0].packets_delivered);
}

TEST_CASE("carrier sense keeps co-audible cells to one transmitter per slot") {
  // Separation chosen so each BS hears the other at -60 dBm.
  const double d = std::pow(10.0, (80.0 - 40.0) / 35.0);
  auto topo = two_bs_saturated_topology(d);
  for (auto& b : topo.bss) b.radio.cst_dbm = -72.0;
  const auto traffic = saturating_traffic(topo, 100.0);
  const auto r = simulate(topo, traffic, 2000, 4);
  REQUIRE(rssi_dbm(20.0, d) == Catch::Approx(-60.0).margin(1e-9));
  for (auto n : r.concurrent_tx) CHECK(n <= 1);
  CHECK(r.bs[0].deferral_count + r.bs[1].deferral_count > 0);
}

TEST_CASE("one-slot simulation with no traffic stays all-zero") {
  Topology t;
  t.bss.push_back({0, 0.0, 0.0, {}});
  t.ues.push_back({0, 0, 5.0, 0.0});
  TrafficProfile p;
  p.target_mbps_per_bss = 0.0;
  const auto r = simulate(t, p, 1, 1);
  CHECK(r.ue[0].packets_sent == 0);
  CHECK(r.ue[0].packets_delivered == 0);
  CHECK(r.ue[0].packets_lost == 0);
  CHECK(r.bs[0].airtime_busy_slots == 0);
  CHECK_THROWS_AS(simulate(t, p, 0, 1), std::invalid_argument);
}

TEST_CASE("packet conservation holds per UE for every seed") {
  const auto topo = build_topology(4, {3, 5}, 25.0, 12);
  const auto traffic = make_traffic(topo, 40.0, 12);
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto r = simulate(topo, traffic, 1500, seed);
    for (const auto& u : r.ue) {
      CHECK(u.packets_sent == u.packets_delivered + u.packets_lost);
      CHECK(u.packets_sent >= 0);
    }
  }
}

TEST_CASE("identical inputs give bit-identical results") {
  const auto topo = build_topology(5, {4, 8}, 25.0, 3);
  const auto traffic = make_traffic(topo, 60.0, 3);
  const auto a = simulate(topo, traffic, 2000, 77);
  const auto b = simulate(topo, traffic, 2000, 77);
  REQUIRE(a.ue.size() == b.ue.size());
  for (std::size_t i = 0; i < a.ue.size(); ++i) {
    CHECK(a.ue[i].packets_sent == b.ue[i].packets_sent);
    CHECK(a.ue[i].packets_delivered == b.ue[i].packets_delivered);
    CHECK(a.ue[i].sum_latency_slots == b.ue[i].sum_latency_slots);
  }
  CHECK(a.concurrent_tx == b.concurrent_tx);
  const auto c = simulate(topo, traffic, 2000, 78);
  bool diff = false;
  for (std::size_t i = 0; i < a.ue.size(); ++i)
    diff |= a.ue[i].packets_delivered != c.ue[i].packets_delivered;
  CHECK(diff);
}

TEST_CASE("raising every TPC by delta shifts every rssi entry by delta") {
  auto topo = build_topology(4, {3, 5}, 30.0, 21);
  const auto traffic = make_traffic(topo, 10.0, 21);
  const auto base = simulate(topo, traffic, 10, 5);
  auto shifted_topo = topo;
  const double delta = 4.0;
  for (auto& b : shifted_topo.bss) b.radio.tpc_dbm = b.radio.tpc_dbm - delta;
  const auto shifted = simulate(shifted_topo, traffic, 10, 5);
  for (std::size_t b = 0; b < topo.bss.size(); ++b)
    for (std::size_t u = 0; u < topo.ues.size(); ++u)
      CHECK(std::abs(base.rssi[b][u] - delta - shifted.rssi[b][u]) < 1e-12);
}

TEST_CASE("lowering CST never increases per-slot concurrency on a 2-BS cell pair") {
  // Mutual audibility sits between the two thresholds under test.
  auto topo = two_bs_saturated_topology(20.0);
  const auto traffic = saturating_traffic(topo, 100.0);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto lax = topo, strict = topo;
    for (auto& b : lax.bss) b.radio.cst_dbm = -62.0;
    for (auto& b : strict.bss) b.radio.cst_dbm = -82.0;
    const auto r_lax = simulate(lax, traffic, 800, seed);
    const auto r_strict = simulate(strict, traffic, 800, seed);
    for (std::size_t s = 0; s < r_lax.concurrent_tx.size(); ++s)
      REQUIRE(r_strict.concurrent_tx[s] <= r_lax.concurrent_tx[s]);
  }
}

TEST_CASE("measured KPIs stay inside their domains") {
  const auto topo = build_topology(3, {4, 6}, 25.0, 8);
  const auto traffic = make_traffic(topo, 50.0, 8);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = simulate(topo, traffic, 1200, seed);
    const auto k = measure_kpis(r, topo);
    CHECK(k.t >= 0.0);
    CHECK(k.l >= 0.0);
    CHECK(k.pl >= 0.0);
    CHECK(k.pl <= 1.0);
    CHECK(k.c >= 0.0);
    CHECK(k.c <= 1.0);
  }
}

TEST_CASE("doubling offered load does not reduce loss on a saturated cell cluster") {
  const auto topo = build_topology(3, {4, 4}, 20.0, 14);
  double pl_lo = 0.0, pl_hi = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto t1 = make_traffic(topo, 120.0, seed);
    const auto t2 = make_traffic(topo, 240.0, seed);
    SimParams params;
    params.max_queue_per_bs = 400;
    pl_lo += measure_kpis(simulate(topo, t1, 1500, seed, params), topo).pl;
    pl_hi += measure_kpis(simulate(topo, t2, 1500, seed, params), topo).pl;
  }
  CHECK(pl_hi >= pl_lo);
}

TEST_CASE("KPI accounting matches hand arithmetic") {
  SECTION("coverage is 1 when every UE clears the sensitivity") {
    const auto topo = build_topology(3, {5, 5}, 15.0, 2);
    const auto traffic = make_traffic(topo, 10.0, 2);
    const auto r = simulate(topo, traffic, 200, 2);
    CHECK(measure_kpis(r, topo, -82.0).c == 1.0);
  }
  SECTION("loss ratio and throughput formulas") {
    Topology topo;
    topo.bss.push_back({0, 0.0, 0.0, {}});
    topo.ues.push_back({0, 0, 5.0, 0.0});
    TrafficProfile p;
    p.target_mbps_per_bss = 0.0;
    auto r = simulate(topo, p, 1, 0);
    // Hand-crafted counters: 1000 sent, 900 delivered over exactly 1 s.
    r.ue[0].packets_sent = 1000;
    r.ue[0].packets_delivered = 900;
    r.ue[0].packets_lost = 100;
    r.duration_slots = 1000000;
    r.slot_us = 1.0;
    const auto k = measure_kpis(r, topo);
    CHECK(k.pl == Catch::Approx(0.1).margin(1e-12));
    CHECK(k.t == Catch::Approx(900.0 * 1464.0 * 8.0 / 1e6).margin(1e-9));
  }
  SECTION("mismatched topology is rejected") {
    const auto topo = build_topology(3, {5, 5}, 15.0, 2);
    const auto other = build_topology(3, {5, 5}, 15.0, 4);
    const auto traffic = make_traffic(topo, 10.0, 2);
    const auto r = simulate(topo, traffic, 100, 2);
    CHECK_THROWS_AS(measure_kpis(r, other), std::invalid_argument);
  }
}

TEST_CASE("topology and traffic survive JSON round-trips") {
  const auto topo = build_topology(4, {3, 6}, 30.0, 17);
  const json tj = topo;
  const Topology topo2 = tj.get<Topology>();
  CHECK(topo.fingerprint() == topo2.fingerprint());

  const auto traffic = make_traffic(topo, 45.0, 17);
  const json fj = traffic;
  const TrafficProfile traffic2 = fj.get<TrafficProfile>();
  CHECK(traffic == traffic2);
  CHECK_NOTHROW(traffic2.validate(topo2));
}

TEST_CASE("per-BSS offered load matches the configured target") {
  const auto topo = build_topology(6, {10, 15}, 40.0, 23);
  const auto traffic = make_traffic(topo, 100.0, 23);
  CHECK_NOTHROW(traffic.validate(topo));
  CHECK(traffic.aggregate_offered_mbps() ==
        Catch::Approx(100.0 * topo.bss.size()).epsilon(1e-9));
}

TEST_CASE("SimResult CSV export has one row per UE") {
  const auto topo = build_topology(3, {2, 3}, 20.0, 6);
  const auto traffic = make_traffic(topo, 30.0, 6);
  const auto r = simulate(topo, traffic, 500, 6);
  std::ostringstream os;
  r.write_csv(os, topo);
  const std::string csv = os.str();
  const auto rows = std::count(csv.begin(), csv.end(), '\n');
  CHECK(rows == static_cast<long>(topo.ues.size()) + 1);
}

TEST_CASE("multiplier curve evaluates piecewise and periodically") {
  MultiplierCurve c;
  c.period_s = 8.0;
  c.segments = {{0.25, 0.3}, {0.5, 0.8}, {0.75, 1.0}, {1.0, 1.4}};
  CHECK(c.value(1.0) == 0.3);
  CHECK(c.value(3.0) == 0.8);
  CHECK(c.value(5.0) == 1.0);
  CHECK(c.value(7.0) == 1.4);
  CHECK(c.value(9.0) == c.value(1.0));  // periodic extension
  CHECK(c.mean() == Catch::Approx((0.3 + 0.8 + 1.0 + 1.4) / 4.0));
  MultiplierCurve none;
  CHECK(none.value(123.0) == 1.0);
}
