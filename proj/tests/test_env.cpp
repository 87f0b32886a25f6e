#include "mtc/demand.hpp"
#include "mtc/env.hpp"
#include "mtc/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

using namespace mtc;

namespace {

std::shared_ptr<const RoadNetwork> one_junction() {
    return std::make_shared<const RoadNetwork>(build_grid(1, 1, 200.0, {0}, SignalPlan{}));
}

int side(const RoadNetwork& net, CompassSide s) { return net.boundary_nodes(s).at(0); }

}  // namespace

TEST_CASE("reward function") {
    const RewardConfig cfg;
    CHECK(compute_reward(Action::Go, 30.0, false, cfg) == doctest::Approx(0.5));
    CHECK(compute_reward(Action::Stop, 30.0, false, cfg) == doctest::Approx(-0.5));
    CHECK(compute_reward(Action::Go, 30.0, true, cfg) == doctest::Approx(-0.5));
    CHECK(compute_reward(Action::Stop, 0.0, true, cfg) == doctest::Approx(-1.0));
    CHECK(compute_reward(Action::Go, 0.0, false, cfg) == doctest::Approx(0.0));

    RewardConfig zero;
    zero.beta = 0.0;
    CHECK(compute_reward(Action::Go, 120.0, false, zero) == doctest::Approx(0.0));
    CHECK(compute_reward(Action::Stop, 120.0, true, zero) == doctest::Approx(-1.0));

    RewardConfig doubled;
    doubled.beta = 2.0;
    doubled.tau_scale = 30.0;
    CHECK(compute_reward(Action::Go, 15.0, false, doubled) == doctest::Approx(1.0));

    RewardConfig bad;
    bad.tau_scale = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("observation of a stopped queue") {
    const auto net = one_junction();
    TrafficEnv env(net, EnvConfig{SimParams{}, RewardConfig{}, 100.0});
    env.reset({}, 1);
    Simulator& sim = env.simulator();
    const int n = side(*net, CompassSide::North);
    const int s = side(*net, CompassSide::South);
    sim.place_vehicle(1, VehicleClass::RV, n, s, 0, 195.0, 0.0);
    sim.place_vehicle(2, VehicleClass::RV, n, s, 0, 185.0, 0.0);
    sim.place_vehicle(3, VehicleClass::HV, n, s, 0, 140.0, 0.0);  // 60 m out
    env.refresh_agents();
    REQUIRE(env.agents().size() == 2);
    REQUIRE(env.observations().size() == 2);

    Observation first = env.observations().at(1);
    CHECK(first.queue[0] == 2.0);
    CHECK(first.mean_wait[0] == 0.0);
    CHECK(first == env.observations().at(2));

    TrafficEnv::StepResult r;
    for (int k = 0; k < 5; ++k) r = env.step({{1, Action::Stop}, {2, Action::Stop}});
    const AgentStep& a = r.steps.at(1);
    CHECK(a.observation.mean_wait[0] == doctest::Approx(2.0));
    CHECK(a.reward == doctest::Approx(-2.0 / 60.0));
    CHECK_FALSE(a.done);
    CHECK(a.next_observation.mean_wait[0] == doctest::Approx(2.5));
    CHECK(a.next_observation.queue[0] == 2.0);
    for (std::size_t d = 1; d < 4; ++d) CHECK(a.next_observation.queue[d] == 0.0);
    CHECK(a.next_observation.occupied == std::array<double, 4>{});
    CHECK(env.agent_decisions() == 10);
    const auto flat = a.next_observation.to_array();
    CHECK(flat[0] == 2.0);
    CHECK(flat[1] == doctest::Approx(2.5));
}

TEST_CASE("agent lifecycle and box occupancy") {
    const auto net = one_junction();
    TrafficEnv env(net, EnvConfig{SimParams{}, RewardConfig{}, 100.0});
    env.reset({}, 1);
    Simulator& sim = env.simulator();
    sim.place_vehicle(1, VehicleClass::RV, side(*net, CompassSide::North), side(*net, CompassSide::South), 0, 199.0, 5.0);
    sim.place_vehicle(2, VehicleClass::RV, side(*net, CompassSide::East), side(*net, CompassSide::West), 0, 180.0, 0.0);
    env.refresh_agents();

    CHECK_THROWS_AS(env.step({{7, Action::Go}}), ContractViolation);

    const auto r = env.step({{1, Action::Go}});  // vehicle 2 defaults to Stop
    CHECK(r.steps.at(1).done);
    CHECK(r.steps.at(1).action == Action::Go);
    CHECK(r.steps.at(2).action == Action::Stop);
    CHECK_FALSE(r.steps.at(2).done);
    CHECK(env.agents().count(1) == 0);
    CHECK(env.observations().at(2).occupied[static_cast<std::size_t>(Direction::North)] == 1.0);
    CHECK(env.observations().at(2).occupied[static_cast<std::size_t>(Direction::East)] == 0.0);
}

TEST_CASE("conflict is charged to the entering agent") {
    const auto net = one_junction();
    TrafficEnv env(net, EnvConfig{SimParams{}, RewardConfig{}, 100.0});
    env.reset({}, 1);
    Simulator& sim = env.simulator();
    sim.place_vehicle(1, VehicleClass::RV, side(*net, CompassSide::North), side(*net, CompassSide::South), 0, 199.0, 5.0);
    sim.place_vehicle(2, VehicleClass::RV, side(*net, CompassSide::East), side(*net, CompassSide::West), 0, 190.0, 5.0);
    env.refresh_agents();
    int conflicts = 0;
    for (int k = 0; k < 8; ++k) {
        std::map<int, Action> go;
        for (const auto& [id, slot] : env.agents()) go.emplace(id, Action::Go);
        for (const auto& [id, s] : env.step(go).steps) {
            if (s.conflict) {
                ++conflicts;
                CHECK(id == 2);
                CHECK(s.reward == doctest::Approx(compute_reward(Action::Go, s.observation.mean_wait_from(s.approach),
                                                                 false, RewardConfig{}) - 1.0));
            }
        }
    }
    CHECK(conflicts == 1);
}

TEST_CASE("episode contracts under random actions") {
    const auto net = std::make_shared<const RoadNetwork>(build_grid(2, 2, 150.0, {0, 3}, SignalPlan{}));
    DemandConfig d;
    d.total_vehicles = 250;
    d.horizon = 200.0;
    d.penetration = 0.75;
    d.seed = 4;
    TrafficEnv env(net, EnvConfig{SimParams{}, RewardConfig{}, 200.0});
    env.reset(generate_spawn_schedule(d, od_pattern_from_experiment(6), *net), 4);
    std::mt19937_64 rng(9);
    int steps = 0;
    std::size_t transitions = 0;
    while (!env.episode_done()) {
        std::map<int, Action> actions;
        for (const auto& [id, slot] : env.agents()) {
            CHECK(env.simulator().vehicle(id).vehicle_class == VehicleClass::RV);
            CHECK(slot.distance_to_stop_line <= 30.0);
            actions.emplace(id, rng() % 2 ? Action::Go : Action::Stop);
        }
        const auto r = env.step(actions);
        ++steps;
        transitions += r.steps.size();
        CHECK(r.steps.size() == actions.size());
        for (const auto& [id, s] : r.steps) {
            CHECK(s.reward == doctest::Approx(compute_reward(s.action, s.observation.mean_wait_from(s.approach),
                                                             s.conflict, RewardConfig{})));
            for (const Observation* o : {&s.observation, &s.next_observation}) {
                for (std::size_t k = 0; k < 4; ++k) {
                    CHECK(o->queue[k] >= 0.0);
                    CHECK(o->queue[k] == std::floor(o->queue[k]));
                    CHECK(o->mean_wait[k] >= 0.0);
                    CHECK((o->occupied[k] == 0.0 || o->occupied[k] == 1.0));
                }
            }
        }
    }
    CHECK(steps == 400);
    CHECK(transitions > 0);
    CHECK(env.agent_decisions() == transitions);
}

TEST_CASE("signalized intersections have no observation") {
    const auto net = std::make_shared<const RoadNetwork>(build_grid(1, 2, 200.0, {0}, SignalPlan{}));
    Simulator sim(net, SimParams{});
    sim.reset({});
    CHECK_NOTHROW(build_observation(sim, 0));
    CHECK_THROWS_AS(build_observation(sim, 1), ContractViolation);
}
