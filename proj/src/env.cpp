#include "mtc/env.hpp"

#include "mtc/errors.hpp"

#include <cmath>
#include <set>
#include <string>

namespace mtc {

std::array<double, Observation::kSize> Observation::to_array() const {
    std::array<double, kSize> out{};
    for (std::size_t d = 0; d < 4; ++d) {
        out[2 * d] = queue[d];
        out[2 * d + 1] = mean_wait[d];
        out[8 + d] = occupied[d];
    }
    return out;
}

void RewardConfig::validate() const {
    if (!(beta >= 0)) throw ConfigError("reward.beta must be >= 0");
    if (!(tau_scale > 0)) throw ConfigError("reward.tau_scale must be > 0");
}

double compute_reward(Action action, double tau, bool conflict_occurred, const RewardConfig& cfg) {
    const double local = (action == Action::Go ? 1.0 : -1.0) * tau / cfg.tau_scale;
    const double penalty = conflict_occurred ? -1.0 : 0.0;
    return cfg.beta * local + penalty;
}

Observation build_observation(const Simulator& sim, int intersection) {
    const RoadNetwork& net = sim.network();
    const Intersection& in = net.intersection(intersection);
    if (in.control_mode != ControlMode::RvControlled) {
        throw ContractViolation("observation requested for signalized intersection " + std::to_string(intersection));
    }
    Observation obs;
    const double threshold = sim.params().waiting_speed_threshold;
    for (Direction d : kAllSides) {
        const auto idx = static_cast<std::size_t>(d);
        const auto lid = net.approach_link(intersection, d);
        if (!lid) continue;
        const double length = net.link(*lid).length;
        double waits = 0.0;
        int count = 0;
        for (int id : sim.lane(*lid)) {
            const VehicleState& v = sim.vehicle(id);
            if (length - v.position > in.control_zone_radius) break;
            if (v.speed < threshold) {
                ++count;
                waits += v.waiting_clock;
            }
        }
        obs.queue[idx] = count;
        obs.mean_wait[idx] = count > 0 ? waits / count : 0.0;
    }
    for (const BoxOccupant& occ : sim.box(intersection)) {
        obs.occupied[static_cast<std::size_t>(occ.movement.approach)] = 1.0;
    }
    return obs;
}

TrafficEnv::TrafficEnv(std::shared_ptr<const RoadNetwork> network, EnvConfig config)
    : config_(config), sim_(std::move(network), config.sim) {
    config_.reward.validate();
    if (!(config_.horizon > 0)) throw ConfigError("horizon must be > 0");
}

void TrafficEnv::refresh_agents() {
    slots_.clear();
    observations_.clear();
    for (const AgentSlot& s : sim_.eligible_agents()) {
        slots_.emplace(s.vehicle_id, s);
        observations_.emplace(s.vehicle_id, build_observation(sim_, s.intersection));
    }
}

const std::map<int, Observation>& TrafficEnv::reset(std::vector<SpawnEvent> schedule, std::uint64_t seed) {
    seed_ = seed;
    decisions_ = 0;
    sim_.reset(std::move(schedule));
    refresh_agents();
    return observations_;
}

TrafficEnv::StepResult TrafficEnv::step(const std::map<int, Action>& actions) {
    for (const auto& [id, a] : actions) {
        if (!slots_.count(id)) throw ContractViolation("unknown agent id " + std::to_string(id));
    }
    std::map<int, Action> resolved;
    for (const auto& [id, slot] : slots_) {
        const auto it = actions.find(id);
        resolved.emplace(id, it == actions.end() ? Action::Stop : it->second);
    }
    decisions_ += resolved.size();

    const auto before_slots = slots_;
    const auto before_obs = observations_;
    const std::vector<Event> events = sim_.step(resolved);

    std::set<int> conflicted;
    for (const Event& e : events) {
        if (e.kind == EventKind::Conflict) conflicted.insert(e.vehicle_id);
    }
    refresh_agents();

    StepResult result;
    for (const auto& [id, action] : resolved) {
        const AgentSlot& slot = before_slots.at(id);
        AgentStep s;
        s.agent_id = id;
        s.intersection = slot.intersection;
        s.approach = slot.approach;
        s.observation = before_obs.at(id);
        s.action = action;
        s.conflict = conflicted.count(id) > 0;
        s.reward = compute_reward(action, s.observation.mean_wait_from(slot.approach), s.conflict, config_.reward);
        const auto still = observations_.find(id);
        s.done = still == observations_.end();
        s.next_observation = s.done ? build_observation(sim_, slot.intersection) : still->second;
        result.steps.emplace(id, s);
    }
    result.episode_done = episode_done();
    return result;
}

}  // namespace mtc
