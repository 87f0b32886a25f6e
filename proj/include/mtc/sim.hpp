#pragma once

#include "mtc/demand.hpp"
#include "mtc/network.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

namespace mtc {

enum class Action { Go = 0, Stop = 1 };
inline constexpr std::size_t kNumActions = 2;

struct IdmParams {
    double desired_speed = 15.0;     // v0
    double time_headway = 1.0;       // T
    double min_gap = 2.0;            // s0
    double max_accel = 2.6;          // a_max
    double comfortable_decel = 4.5;  // b
    double exponent = 4.0;           // delta
    double vehicle_length = 5.0;
    double emergency_decel = 8.0;    // lower clamp on every acceleration

    void validate() const;
};

/// IDM acceleration, clamped to [-emergency_decel, max_accel]. With no
/// leader only the free-road term applies. A nonpositive gap to a leader
/// yields -emergency_decel; callers log that as a spacing violation.
double idm_acceleration(double speed, std::optional<double> gap, std::optional<double> leader_speed,
                        const IdmParams& p);

/// -v^2 / (2 d_int), clamped to >= -emergency_decel. A vehicle already at or
/// past the stop line gets -emergency_decel (0 when it is at rest).
double stop_deceleration(double speed, double distance_to_stop_line, const IdmParams& p);

/// Phase order: NS green, yellow, EW green, yellow; position = (t + offset) mod cycle.
bool signal_allows(const SignalPlan& plan, double t, Direction approach);
bool signal_is_yellow(const SignalPlan& plan, double t, Direction approach);

struct SimParams {
    IdmParams idm;
    double dt = 0.5;
    double waiting_speed_threshold = 0.1;
    double box_speed_cap = 7.0;
    double box_length_straight = 14.0;
    double box_length_right = 10.0;
    double box_length_left = 18.0;
    /// Conflicting head-of-queue HVs within this distance of their stop line
    /// take part in gap acceptance at RV-controlled junctions.
    double gap_acceptance_distance = 15.0;

    double box_length(Turn turn) const;
    void validate() const;
};

struct VehicleState {
    int id = 0;
    VehicleClass vehicle_class = VehicleClass::HV;
    OdPair od = OdPair::NS;
    std::shared_ptr<const Route> route;
    std::size_t route_index = 0;  // index into route->links
    double position = 0.0;        // front bumper, metres from link start
    double speed = 0.0;
    double waiting_clock = 0.0;
    bool done = false;

    bool in_box = false;
    double box_position = 0.0;
    double depart_time = 0.0;
    double zone_arrival = -1.0;  // time the vehicle entered the current approach's control zone
    std::vector<double> wait_by_intersection;

    int current_link() const { return route->links[route_index]; }
};

struct BoxOccupant {
    int vehicle_id = 0;
    Movement movement;
    double path_length = 0.0;
};

enum class EventKind { Spawn, Despawn, Conflict, SpacingViolation, StopLineHold };

struct Event {
    EventKind kind = EventKind::Spawn;
    double time = 0.0;
    int vehicle_id = -1;
    int intersection = -1;
    int other_vehicle = -1;

    friend bool operator==(const Event&, const Event&) = default;
};

/// Per-vehicle statistics, final once the vehicle has despawned.
struct VehicleStats {
    int vehicle_id = 0;
    OdPair od = OdPair::NS;
    VehicleClass vehicle_class = VehicleClass::HV;
    double waiting_clock = 0.0;
    std::vector<double> wait_by_intersection;
    int first_intersection = -1;
    double depart_time = 0.0;
    bool finished = false;
};

struct AgentSlot {
    int vehicle_id = 0;
    int intersection = 0;
    Direction approach = Direction::North;
    double distance_to_stop_line = 0.0;

    friend bool operator==(const AgentSlot&, const AgentSlot&) = default;
};

/// Discrete-time microscopic simulation over an immutable network. One
/// instance is single-threaded; independent instances share nothing mutable.
class Simulator {
public:
    Simulator(std::shared_ptr<const RoadNetwork> network, SimParams params);

    /// Clears all state and installs a spawn schedule (sorted by depart time).
    void reset(std::vector<SpawnEvent> schedule);

    /// Advances the clock by params().dt. `rv_actions` may only name vehicles
    /// listed by eligible_agents(); eligible RVs without an action Stop.
    std::vector<Event> step(const std::map<int, Action>& rv_actions = {});

    std::vector<AgentSlot> eligible_agents() const;

    /// Scripted-scenario helper: puts a vehicle on link `route_index` of the
    /// shortest route from origin to destination. Throws on overlap.
    void place_vehicle(int id, VehicleClass cls, int origin, int destination, std::size_t route_index,
                       double position, double speed);
    /// Replaces the behaviour law of a vehicle for the next step only.
    void override_acceleration(int vehicle_id, double accel);

    void set_trace(std::ostream* out);
    static void write_trace_header(std::ostream& out);

    double clock() const { return clock_; }
    std::uint64_t step_count() const { return steps_; }
    const RoadNetwork& network() const { return *network_; }
    std::shared_ptr<const RoadNetwork> network_ptr() const { return network_; }
    const SimParams& params() const { return params_; }

    const std::map<int, VehicleState>& vehicles() const { return vehicles_; }
    const VehicleState& vehicle(int id) const;
    /// Vehicles on `link`, ordered from the head (closest to the downstream node).
    const std::vector<int>& lane(int link) const { return lanes_.at(static_cast<std::size_t>(link)); }
    const std::vector<BoxOccupant>& box(int intersection) const {
        return boxes_.at(static_cast<std::size_t>(intersection));
    }

    std::size_t spawned() const { return spawned_; }
    std::size_t despawned() const { return despawned_; }
    std::size_t active() const { return vehicles_.size(); }
    std::size_t pending() const { return pending_.size(); }
    std::size_t conflicts() const { return conflicts_; }

    const std::vector<Event>& event_log() const { return log_; }
    const std::vector<VehicleStats>& finished() const { return finished_; }
    /// Finished vehicles plus the accumulated state of those still active.
    std::vector<VehicleStats> all_stats() const;

    /// Distance from a link vehicle's front bumper to its next stop line,
    /// or nullopt when the link ends at a boundary node.
    std::optional<double> distance_to_stop_line(const VehicleState& v) const;
    /// Intersection whose control zone currently contains the vehicle, or -1.
    int zone_of(const VehicleState& v) const;

private:
    struct Decision {
        double accel = 0.0;
        bool agent = false;
        Action action = Action::Stop;
    };

    std::shared_ptr<const Route> route_ptr(int origin, int destination);
    void inject_spawns(std::vector<Event>& events);
    bool downstream_room(const VehicleState& v) const;
    bool conflicting_occupant(int intersection, const Movement& m, int* who = nullptr) const;
    bool hv_may_enter(const VehicleState& v, int intersection, const Movement& m) const;
    bool entry_permitted(const VehicleState& v, double distance, bool at_crossing) const;
    Decision decide(const VehicleState& v, std::size_t lane_index, const std::vector<int>& lane,
                    const std::map<int, Action>& actions, const std::map<int, AgentSlot>& eligible,
                    std::vector<Event>& events);
    void advance_boxes();
    void advance_lane(int link, const std::map<int, Decision>& decisions, std::vector<Event>& events);
    void enter_box(VehicleState& v, double overshoot, std::vector<Event>& events);
    void despawn(VehicleState& v, std::vector<Event>& events);
    VehicleStats stats_of(const VehicleState& v) const;
    void write_trace();

    std::shared_ptr<const RoadNetwork> network_;
    SimParams params_;
    double clock_ = 0.0;
    std::uint64_t steps_ = 0;
    std::map<int, VehicleState> vehicles_;
    std::vector<std::vector<int>> lanes_;
    std::vector<std::vector<BoxOccupant>> boxes_;
    std::vector<SpawnEvent> pending_;
    std::map<std::pair<int, int>, std::shared_ptr<const Route>> routes_;
    std::map<int, double> overrides_;
    std::vector<Event> log_;
    std::vector<VehicleStats> finished_;
    std::size_t spawned_ = 0;
    std::size_t despawned_ = 0;
    std::size_t conflicts_ = 0;
    std::ostream* trace_ = nullptr;
};

}  // namespace mtc
