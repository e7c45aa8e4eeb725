#include <doctest.h>

#include "distb/mobility.hpp"

using namespace distb;

TEST_CASE("random waypoint stays inside the field and under the speed cap") {
  const Field field{500.0, 300.0};
  const WaypointParams params{2.0, 10.0, 0.0, 3.0};
  RngStream rng(3, 0);
  SensorNode n;
  n.id = 9;
  n.pos = field.uniform_point(rng);
  choose_waypoint(n, field, params, rng);
  const SimTime dt = SimTime::ms(1000);
  int moves = 0;
  for (std::uint64_t step = 0; step < 2000; ++step) {
    const Position before = n.pos;
    const Position after = step_mobility(n, SimTime::ms(step * 1000), dt, field, params, rng);
    CHECK(after == n.pos);
    REQUIRE(field.contains(after));
    REQUIRE(distance(before, after) <= params.speed_max_mps * 1.0 + 1e-9);
    REQUIRE(n.motion.speed_mps >= params.speed_min_mps);
    REQUIRE(n.motion.speed_mps <= params.speed_max_mps);
    if (distance(before, after) > 0) ++moves;
  }
  CHECK(moves > 1000);
}

TEST_CASE("a pausing node stays put") {
  const Field field{100.0, 100.0};
  const WaypointParams params{1.0, 1.0, 5.0, 5.0};
  RngStream rng(3, 0);
  SensorNode n;
  n.pos = {50, 50};
  n.motion.waypoint = {50, 51};
  n.motion.speed_mps = 1.0;
  step_mobility(n, SimTime{}, SimTime::ms(2000), field, params, rng);
  CHECK(n.pos == Position{50, 51});
  CHECK(n.motion.pause_until == SimTime::ms(1000 + 5000));
  step_mobility(n, SimTime::ms(2000), SimTime::ms(1000), field, params, rng);
  CHECK(n.pos == Position{50, 51});
}

TEST_CASE("mobility is reproducible from the stream") {
  const Field field;
  const WaypointParams params;
  auto walk = [&] {
    RngStream rng(11, 3);
    SensorNode n;
    n.pos = field.uniform_point(rng);
    for (int i = 0; i < 100; ++i) step_mobility(n, SimTime::ms(i * 1000), SimTime::ms(1000), field, params, rng);
    return n.pos;
  };
  CHECK(walk() == walk());
}

TEST_CASE("generated packets carry unique ids and a matching digest") {
  SensorNode n;
  n.id = 40;
  n.packet_size = 800;
  RngStream rng(1, 1);
  const DataPacket a = generate_packet(n, SimTime::ms(5), 3, rng);
  const DataPacket b = generate_packet(n, SimTime::ms(6), 3, rng);
  CHECK(a.pkt_id == (40ULL << 32));
  CHECK(b.pkt_id == (40ULL << 32) + 1);
  CHECK(a.size == 800);
  CHECK(a.payload.size() == 800);
  CHECK(a.payload_digest == sha256(a.payload));
  CHECK(a.payload != b.payload);
  CHECK_FALSE(a.tampered);
  n.alive = false;
  CHECK_THROWS_AS(generate_packet(n, SimTime::ms(7), 3, rng), std::logic_error);
  n.alive = true;
  n.role = NodeRole::Gateway;
  CHECK_THROWS_AS(generate_packet(n, SimTime::ms(7), 3, rng), std::logic_error);
}

TEST_CASE("neighbors are alive nodes in radio range, in id order") {
  std::vector<SensorNode> world(5);
  for (std::size_t i = 0; i < world.size(); ++i) {
    world[i].id = 10 - i;
    world[i].pos = {100.0 * static_cast<double>(i), 0.0};
    world[i].radio_range_m = 250.0;
  }
  world[1].alive = false;
  CHECK(neighbors(world[0], world) == std::vector<EntityId>{8});
  CHECK(neighbors(world[2], world) == std::vector<EntityId>{6, 7, 10});
}
