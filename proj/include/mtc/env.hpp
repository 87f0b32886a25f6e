#pragma once

#include "mtc/sim.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <vector>

namespace mtc {

/// Per-agent observation: (queue count, mean wait) for each approach in the
/// order N, S, E, W, followed by one box-occupancy flag per approach.
struct Observation {
    static constexpr std::size_t kSize = 12;

    std::array<double, 4> queue{};
    std::array<double, 4> mean_wait{};
    std::array<double, 4> occupied{};

    std::array<double, kSize> to_array() const;
    double mean_wait_from(Direction d) const { return mean_wait[static_cast<std::size_t>(d)]; }

    friend bool operator==(const Observation&, const Observation&) = default;
};

struct RewardConfig {
    double beta = 1.0;
    double tau_scale = 60.0;

    void validate() const;
};

/// beta * (+-tau / tau_scale) + (conflict ? -1 : 0); plus for Go, minus for Stop.
double compute_reward(Action action, double tau, bool conflict_occurred, const RewardConfig& cfg);

/// Observation at an RV-controlled intersection. Counts vehicles in the
/// control zone slower than the waiting threshold; throws ContractViolation
/// for signalized intersections.
Observation build_observation(const Simulator& sim, int intersection);

struct AgentStep {
    int agent_id = 0;
    int intersection = 0;
    Direction approach = Direction::North;
    Observation observation;
    Action action = Action::Stop;
    double reward = 0.0;
    Observation next_observation;
    bool conflict = false;
    /// The agent left the decision zone (entered the junction box).
    bool done = false;
};

struct EnvConfig {
    SimParams sim;
    RewardConfig reward;
    double horizon = 1000.0;
};

/// Multi-agent facade over the simulator. Every RV inside the control zone of
/// an RV-controlled intersection is an agent; its id is the vehicle id.
class TrafficEnv {
public:
    struct StepResult {
        std::map<int, AgentStep> steps;
        bool episode_done = false;
    };

    TrafficEnv(std::shared_ptr<const RoadNetwork> network, EnvConfig config);

    const std::map<int, Observation>& reset(std::vector<SpawnEvent> schedule, std::uint64_t seed);
    /// Eligible agents missing from `actions` Stop. Unknown ids throw ContractViolation.
    StepResult step(const std::map<int, Action>& actions);

    /// Observations of the agents that must act on the next step.
    const std::map<int, Observation>& observations() const { return observations_; }
    const std::map<int, AgentSlot>& agents() const { return slots_; }
    bool episode_done() const { return sim_.clock() >= config_.horizon; }
    std::uint64_t seed() const { return seed_; }
    std::size_t agent_decisions() const { return decisions_; }

    const EnvConfig& config() const { return config_; }
    const Simulator& simulator() const { return sim_; }
    /// Mutable access for scripted scenarios (placing vehicles before a step).
    Simulator& simulator() { return sim_; }
    /// Recomputes the agent set after scripted edits to the simulator.
    void refresh_agents();

private:
    EnvConfig config_;
    Simulator sim_;
    std::map<int, AgentSlot> slots_;
    std::map<int, Observation> observations_;
    std::uint64_t seed_ = 0;
    std::size_t decisions_ = 0;
};

}  // namespace mtc
