#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "support/fixtures.hpp"
#include "twinforge/scenario.hpp"

using namespace twinforge;
using namespace twinforge::scenario;
using twinforge::testing::World;

namespace {

struct Fixture {
  World world = twinforge::testing::make_world(3, 11);
  tabgan::GanModel gan = twinforge::testing::make_flow_gan(world, 11, 5);
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

long long ue_count_delta_max(const std::vector<Step>& steps) {
  long long worst = 0;
  for (std::size_t i = 1; i < steps.size(); ++i)
    worst = std::max<long long>(
        worst, static_cast<long long>(steps[i].topology.ues.size()) -
                   static_cast<long long>(steps[i - 1].topology.ues.size()));
  return worst;
}

}  // namespace

TEST_CASE("scenario A mirrors the current state") {
  auto& f = fixture();
  ScenarioParams params;
  const auto spec = make_scenario(Kind::A, *f.world.snapshot, nullptr, params, 3);
  CHECK(spec.events.empty());
  CHECK(spec.duration_slots == params.duration_slots);

  const auto steps = apply_scenario(spec, f.world.topology, f.world.traffic);
  REQUIRE(steps.size() == 1);
  CHECK(steps[0].topology.fingerprint() == f.world.topology.fingerprint());
  CHECK(steps[0].traffic == f.world.traffic);
  CHECK(steps[0].start_slot == 0);
  CHECK(steps[0].end_slot == spec.duration_slots);
}

TEST_CASE("scenario B ramps users one per step to +50%") {
  auto& f = fixture();
  const int n0 = f.world.snapshot->count(dtconnect::NodeKind::Ue);
  const int expected_add = static_cast<int>(std::ceil(0.5 * n0));
  const auto spec = make_scenario(Kind::B, *f.world.snapshot, &f.gan, {}, 5);
  CHECK(static_cast<int>(spec.events.size()) == expected_add);

  // Event times strictly increase: one user at a time.
  for (std::size_t i = 1; i < spec.events.size(); ++i)
    CHECK(spec.events[i].t_slot > spec.events[i - 1].t_slot);

  const auto steps = apply_scenario(spec, f.world.topology, f.world.traffic);
  REQUIRE(steps.size() == static_cast<std::size_t>(expected_add) + 1);
  for (std::size_t i = 1; i < steps.size(); ++i)
    CHECK(steps[i].topology.ues.size() == steps[i - 1].topology.ues.size() + 1);
  CHECK(steps.back().topology.ues.size() ==
        static_cast<std::size_t>(std::ceil(1.5 * n0)));
  CHECK(ue_count_delta_max(steps) == 1);

  // Flows exist for every synthetic UE.
  CHECK(steps.back().traffic.flows.size() == steps.back().topology.ues.size());
}

TEST_CASE("scenarios C1 and C2 scale offered load by 20% and 40%") {
  auto& f = fixture();
  const double base = f.world.traffic.aggregate_offered_mbps();
  for (auto [kind, factor] : {std::pair{Kind::C1, 1.2}, std::pair{Kind::C2, 1.4}}) {
    const auto spec = make_scenario(kind, *f.world.snapshot, &f.gan, {}, 7);
    REQUIRE(spec.events.size() == 1);
    CHECK(spec.events[0].t_slot == 0);
    const auto steps = apply_scenario(spec, f.world.topology, f.world.traffic);
    REQUIRE(steps.size() == 1);
    const double scaled = steps[0].traffic.aggregate_offered_mbps();
    CHECK(scaled == Catch::Approx(base * factor).epsilon(0.01));
  }
}

TEST_CASE("scenario C3 compresses a day of multipliers and redraws the mix") {
  auto& f = fixture();
  const auto spec = make_scenario(Kind::C3, *f.world.snapshot, &f.gan, {}, 9);
  REQUIRE_FALSE(spec.events.empty());
  const auto& curve = spec.events[0].curve;
  REQUIRE(curve.segments.size() == 4);

  // The curve mean sits between its extremes and repeats periodically.
  CHECK(curve.mean() >= 0.3);
  CHECK(curve.mean() <= 1.4);
  const double period = curve.period_s;
  REQUIRE(period > 0.0);
  for (double t : {0.1 * period, 0.4 * period, 0.7 * period})
    CHECK(curve.value(t) == curve.value(t + period));

  const auto steps = apply_scenario(spec, f.world.topology, f.world.traffic);
  REQUIRE(steps.size() == 4);
  const double base = f.world.traffic.aggregate_offered_mbps();
  const std::vector<double> mult{0.3, 0.8, 1.0, 1.4};
  for (std::size_t s = 0; s < steps.size(); ++s) {
    CHECK(steps[s].traffic.aggregate_offered_mbps() ==
          Catch::Approx(base * mult[s]).epsilon(0.01));
    CHECK(steps[s].topology.ues.size() == f.world.topology.ues.size());
  }
  // The flow-type mix is re-drawn per bucket from the conditioned GAN.
  CHECK(spec.bucket_type_mix.size() == 4);
}

TEST_CASE("scenario D spikes once, inside the middle third") {
  auto& f = fixture();
  const int n0 = f.world.snapshot->count(dtconnect::NodeKind::Ue);
  const auto spec = make_scenario(Kind::D, *f.world.snapshot, &f.gan, {}, 13);

  std::set<long long> event_times;
  for (const auto& e : spec.events) event_times.insert(e.t_slot);
  REQUIRE(event_times.size() == 1);
  const long long t_spike = *event_times.begin();
  CHECK(t_spike >= spec.duration_slots / 3);
  CHECK(t_spike <= 2 * spec.duration_slots / 3);

  const auto steps = apply_scenario(spec, f.world.topology, f.world.traffic);
  REQUIRE(steps.size() == 2);
  // Before the spike: baseline. After: rates x2 and a +50% UE burst.
  CHECK(steps[0].traffic == f.world.traffic);
  CHECK(steps[0].topology.fingerprint() == f.world.topology.fingerprint());
  CHECK(steps[1].traffic.aggregate_offered_mbps() >
        1.9 * f.world.traffic.aggregate_offered_mbps());
  CHECK(ue_count_delta_max(steps) == static_cast<long long>(std::ceil(0.5 * n0)));
}

TEST_CASE("B's largest step is one user while D's is the full burst") {
  auto& f = fixture();
  const int n0 = f.world.snapshot->count(dtconnect::NodeKind::Ue);
  const auto b_steps = apply_scenario(make_scenario(Kind::B, *f.world.snapshot, &f.gan, {}, 21),
                                      f.world.topology, f.world.traffic);
  const auto d_steps = apply_scenario(make_scenario(Kind::D, *f.world.snapshot, &f.gan, {}, 21),
                                      f.world.topology, f.world.traffic);
  CHECK(ue_count_delta_max(b_steps) == 1);
  CHECK(ue_count_delta_max(d_steps) == static_cast<long long>(std::ceil(0.5 * n0)));
}

TEST_CASE("synthetic UEs join the least-loaded cell") {
  auto& f = fixture();
  const auto spec = make_scenario(Kind::B, *f.world.snapshot, &f.gan, {}, 33);
  const auto steps = apply_scenario(spec, f.world.topology, f.world.traffic);
  // After the first addition, the new UE sits on what was the smallest cell.
  std::map<int, int> before;
  for (const auto& u : steps[0].topology.ues) before[u.bs_id]++;
  const auto& added = steps[1].topology.ues.back();
  for (const auto& [bs, n] : before) CHECK(before[added.bs_id] <= n);
}

TEST_CASE("scenario preconditions and error paths") {
  auto& f = fixture();
  CHECK_THROWS_AS(make_scenario(Kind::B, *f.world.snapshot, nullptr, {}, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_scenario(Kind::D, *f.world.snapshot, nullptr, {}, 1),
                  std::invalid_argument);
  twingraph::TwinSnapshot empty;
  CHECK_THROWS_AS(make_scenario(Kind::A, empty, nullptr, {}, 1), std::invalid_argument);

  // Explicit serving BS outside the topology is rejected at apply time.
  auto spec = make_scenario(Kind::A, *f.world.snapshot, nullptr, {}, 1);
  Event e;
  e.type = Event::Type::AddUe;
  e.t_slot = 10;
  e.serving_bs = 999;
  e.ue.distance_m = 5.0;
  spec.events.push_back(e);
  CHECK_THROWS_AS(apply_scenario(spec, f.world.topology, f.world.traffic),
                  std::invalid_argument);
}

TEST_CASE("scenario specs serialize to JSON and back") {
  auto& f = fixture();
  for (Kind k : {Kind::A, Kind::B, Kind::C1, Kind::C3, Kind::D}) {
    const auto spec =
        make_scenario(k, *f.world.snapshot, k == Kind::A ? nullptr : &f.gan, {}, 17);
    const json j = spec;
    const auto spec2 = j.get<ScenarioSpec>();
    CHECK(spec2.kind == spec.kind);
    CHECK(spec2.events == spec.events);
    CHECK(spec2.duration_slots == spec.duration_slots);
    CHECK(spec2.bucket_type_mix == spec.bucket_type_mix);
    // The expansion of a round-tripped spec is identical.
    const auto s1 = apply_scenario(spec, f.world.topology, f.world.traffic);
    const auto s2 = apply_scenario(spec2, f.world.topology, f.world.traffic);
    REQUIRE(s1.size() == s2.size());
    for (std::size_t i = 0; i < s1.size(); ++i) {
      CHECK(s1[i].topology.fingerprint() == s2[i].topology.fingerprint());
      CHECK(s1[i].traffic == s2[i].traffic);
    }
  }
}

TEST_CASE("describe renders a readable timeline") {
  auto& f = fixture();
  const auto spec = make_scenario(Kind::D, *f.world.snapshot, &f.gan, {}, 3);
  const auto text = describe(spec);
  CHECK(text.find("scenario D") != std::string::npos);
  CHECK(text.find("scale_traffic x2") != std::string::npos);
  CHECK(text.find("add_ue") != std::string::npos);
}

TEST_CASE("scenario arithmetic holds over randomized bases") {
  // Property sweep across 100 random snapshots (smaller worlds for speed).
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    const auto world = twinforge::testing::make_world(
        2 + static_cast<int>(trial % 3), 1000 + trial, 6.0, 20.0, {2, 5}, 40);
    auto& gan = fixture().gan;  // mix arithmetic does not depend on the GAN fit
    const int n0 = world.snapshot->count(dtconnect::NodeKind::Ue);

    ScenarioParams params;
    params.duration_slots = 600;
    const auto b = make_scenario(Kind::B, *world.snapshot, &gan, params, trial);
    CHECK(static_cast<int>(b.events.size()) == static_cast<int>(std::ceil(0.5 * n0)));

    const auto c1 = make_scenario(Kind::C1, *world.snapshot, &gan, params, trial);
    const auto c1s = apply_scenario(c1, world.topology, world.traffic);
    CHECK(c1s[0].traffic.aggregate_offered_mbps() ==
          Catch::Approx(1.2 * world.traffic.aggregate_offered_mbps()).epsilon(0.01));

    const auto d = make_scenario(Kind::D, *world.snapshot, &gan, params, trial);
    std::set<long long> times;
    for (const auto& e : d.events) times.insert(e.t_slot);
    CHECK(times.size() == 1);

    const auto a = make_scenario(Kind::A, *world.snapshot, nullptr, params, trial);
    const auto as = apply_scenario(a, world.topology, world.traffic);
    CHECK(as.size() == 1);
    CHECK(as[0].topology.fingerprint() == world.topology.fingerprint());
  }
}
