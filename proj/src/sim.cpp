#include "mtc/sim.hpp"

#include "mtc/errors.hpp"
#include "mtc/format.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <tuple>

namespace mtc {

void IdmParams::validate() const {
    if (!(desired_speed > 0 && time_headway > 0 && min_gap > 0 && max_accel > 0 && comfortable_decel > 0 &&
          vehicle_length > 0 && emergency_decel > 0)) {
        throw ConfigError("idm: all parameters must be > 0");
    }
    if (!(exponent >= 1.0)) throw ConfigError("idm: exponent must be >= 1");
}

double idm_acceleration(double speed, std::optional<double> gap, std::optional<double> leader_speed,
                        const IdmParams& p) {
    const double free_term = 1.0 - std::pow(speed / p.desired_speed, p.exponent);
    double a = p.max_accel * free_term;
    if (gap && leader_speed) {
        if (*gap <= 0.0) return -p.emergency_decel;
        const double dv = speed - *leader_speed;
        const double dynamic = speed * p.time_headway + speed * dv / (2.0 * std::sqrt(p.max_accel * p.comfortable_decel));
        const double s_star = p.min_gap + std::max(0.0, dynamic);
        const double ratio = s_star / *gap;
        a = p.max_accel * (free_term - ratio * ratio);
    }
    return std::clamp(a, -p.emergency_decel, p.max_accel);
}

double stop_deceleration(double speed, double distance_to_stop_line, const IdmParams& p) {
    if (speed <= 0.0) return 0.0;
    if (distance_to_stop_line <= 0.0) return -p.emergency_decel;
    return std::max(-speed * speed / (2.0 * distance_to_stop_line), -p.emergency_decel);
}

namespace {

double phase_position(const SignalPlan& plan, double t) {
    const double cycle = plan.cycle();
    double pos = std::fmod(t + plan.offset, cycle);
    if (pos < 0) pos += cycle;
    return pos;
}

bool is_ns(Direction d) { return d == Direction::North || d == Direction::South; }

}  // namespace

bool signal_allows(const SignalPlan& plan, double t, Direction approach) {
    const double pos = phase_position(plan, t);
    if (is_ns(approach)) return pos < plan.green_ns;
    const double ew_start = plan.green_ns + plan.yellow;
    return pos >= ew_start && pos < ew_start + plan.green_ew;
}

bool signal_is_yellow(const SignalPlan& plan, double t, Direction approach) {
    const double pos = phase_position(plan, t);
    if (is_ns(approach)) return pos >= plan.green_ns && pos < plan.green_ns + plan.yellow;
    return pos >= plan.cycle() - plan.yellow;
}

double SimParams::box_length(Turn turn) const {
    switch (turn) {
        case Turn::Left: return box_length_left;
        case Turn::Straight: return box_length_straight;
        case Turn::Right: return box_length_right;
    }
    return box_length_straight;
}

void SimParams::validate() const {
    idm.validate();
    if (!(dt > 0)) throw ConfigError("sim.dt must be > 0");
    if (!(waiting_speed_threshold > 0)) throw ConfigError("sim.waiting_speed_threshold must be > 0");
    if (!(box_speed_cap > 0 && box_length_straight > 0 && box_length_right > 0 && box_length_left > 0)) {
        throw ConfigError("sim: junction box parameters must be > 0");
    }
    if (!(gap_acceptance_distance >= 0)) throw ConfigError("sim.gap_acceptance_distance must be >= 0");
}

Simulator::Simulator(std::shared_ptr<const RoadNetwork> network, SimParams params)
    : network_(std::move(network)), params_(params) {
    if (!network_) throw ContractViolation("simulator needs a network");
    params_.validate();
    reset({});
}

void Simulator::reset(std::vector<SpawnEvent> schedule) {
    clock_ = 0.0;
    steps_ = 0;
    vehicles_.clear();
    lanes_.assign(network_->links().size(), {});
    boxes_.assign(network_->intersections().size(), {});
    std::stable_sort(schedule.begin(), schedule.end(),
                     [](const SpawnEvent& a, const SpawnEvent& b) { return a.depart_time < b.depart_time; });
    pending_ = std::move(schedule);
    overrides_.clear();
    log_.clear();
    finished_.clear();
    spawned_ = despawned_ = conflicts_ = 0;
}

std::shared_ptr<const Route> Simulator::route_ptr(int origin, int destination) {
    const auto key = std::make_pair(origin, destination);
    auto it = routes_.find(key);
    if (it == routes_.end()) {
        it = routes_.emplace(key, std::make_shared<const Route>(shortest_route(*network_, origin, destination))).first;
    }
    return it->second;
}

const VehicleState& Simulator::vehicle(int id) const {
    const auto it = vehicles_.find(id);
    if (it == vehicles_.end()) throw ContractViolation("no active vehicle " + std::to_string(id));
    return it->second;
}

std::optional<double> Simulator::distance_to_stop_line(const VehicleState& v) const {
    if (v.in_box) return std::nullopt;
    const Link& link = network_->link(v.current_link());
    if (!network_->node(link.to_node).intersection) return std::nullopt;
    return link.length - v.position;
}

int Simulator::zone_of(const VehicleState& v) const {
    if (v.in_box) return v.route->intersections[v.route_index];
    const Link& link = network_->link(v.current_link());
    const auto& to = network_->node(link.to_node);
    if (to.intersection &&
        link.length - v.position <= network_->intersection(*to.intersection).control_zone_radius) {
        return *to.intersection;
    }
    const auto& from = network_->node(link.from_node);
    if (from.intersection && v.position <= network_->intersection(*from.intersection).control_zone_radius) {
        return *from.intersection;
    }
    return -1;
}

std::vector<AgentSlot> Simulator::eligible_agents() const {
    std::vector<AgentSlot> out;
    for (const Intersection& in : network_->intersections()) {
        if (in.control_mode != ControlMode::RvControlled) continue;
        for (int lid : network_->in_links(in.id)) {
            const Link& link = network_->link(lid);
            for (int id : lanes_[static_cast<std::size_t>(lid)]) {
                const VehicleState& v = vehicles_.at(id);
                const double d = link.length - v.position;
                if (d > in.control_zone_radius) break;  // lane is ordered head first
                if (v.vehicle_class != VehicleClass::RV) continue;
                out.push_back(AgentSlot{id, in.id, approach_of(link.heading), d});
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const AgentSlot& a, const AgentSlot& b) { return a.vehicle_id < b.vehicle_id; });
    return out;
}

void Simulator::place_vehicle(int id, VehicleClass cls, int origin, int destination, std::size_t route_index,
                              double position, double speed) {
    if (vehicles_.count(id)) throw ContractViolation("vehicle id " + std::to_string(id) + " already active");
    auto route = route_ptr(origin, destination);
    if (route_index >= route->links.size()) throw ContractViolation("route_index beyond route length");
    const int lid = route->links[route_index];
    const Link& link = network_->link(lid);
    if (position < 0 || position > link.length || speed < 0) throw ContractViolation("invalid position or speed");

    auto& lane = lanes_[static_cast<std::size_t>(lid)];
    const double len = params_.idm.vehicle_length;
    auto pos_it = std::find_if(lane.begin(), lane.end(),
                               [&](int other) { return vehicles_.at(other).position < position; });
    if (pos_it != lane.begin() && vehicles_.at(*std::prev(pos_it)).position - len < position) {
        throw ContractViolation("placed vehicle overlaps its leader");
    }
    if (pos_it != lane.end() && position - len < vehicles_.at(*pos_it).position) {
        throw ContractViolation("placed vehicle overlaps its follower");
    }
    VehicleState v;
    v.id = id;
    v.vehicle_class = cls;
    v.route = route;
    v.route_index = route_index;
    v.position = position;
    v.speed = speed;
    v.depart_time = clock_;
    v.wait_by_intersection.assign(network_->intersections().size(), 0.0);
    for (OdPair od : kAllOdPairs) {
        if (origin_side(od) == *network_->node(origin).boundary &&
            destination_side(od) == *network_->node(destination).boundary) {
            v.od = od;
        }
    }
    lane.insert(pos_it, id);
    vehicles_.emplace(id, std::move(v));
    ++spawned_;
}

void Simulator::override_acceleration(int vehicle_id, double accel) {
    vehicle(vehicle_id);
    overrides_[vehicle_id] = accel;
}

void Simulator::set_trace(std::ostream* out) { trace_ = out; }

void Simulator::write_trace_header(std::ostream& out) {
    out << "time,vehicle_id,link,position,speed,waiting_clock,in_box\n";
}

void Simulator::write_trace() {
    for (const auto& [id, v] : vehicles_) {
        *trace_ << format_double(clock_) << ',' << id << ',' << v.current_link() << ','
                << format_double(v.in_box ? network_->link(v.current_link()).length : v.position) << ','
                << format_double(v.speed) << ',' << format_double(v.waiting_clock) << ',' << (v.in_box ? 1 : 0)
                << '\n';
    }
}

void Simulator::inject_spawns(std::vector<Event>& events) {
    const double until = clock_ + params_.dt;
    const IdmParams& p = params_.idm;
    std::vector<SpawnEvent> still;
    std::set<int> blocked;
    for (const SpawnEvent& e : pending_) {
        if (e.depart_time >= until || blocked.count(e.origin)) {
            still.push_back(e);
            continue;
        }
        auto route = route_ptr(e.origin, e.destination);
        const int lid = route->links.front();
        const Link& link = network_->link(lid);
        auto& lane = lanes_[static_cast<std::size_t>(lid)];
        const double v0 = std::min(p.desired_speed, link.speed_limit);
        double speed = v0;
        if (!lane.empty()) {
            const VehicleState& tail = vehicles_.at(lane.back());
            const double gap = tail.position - p.vehicle_length;
            if (gap < p.min_gap) {
                blocked.insert(e.origin);
                still.push_back(e);
                continue;
            }
            speed = std::min(v0, (gap - p.min_gap) / p.time_headway);
        }
        VehicleState v;
        v.id = e.vehicle_id;
        v.vehicle_class = e.vehicle_class;
        v.od = e.od;
        v.route = std::move(route);
        v.speed = speed;
        v.depart_time = e.depart_time;
        v.wait_by_intersection.assign(network_->intersections().size(), 0.0);
        lane.push_back(v.id);
        events.push_back(Event{EventKind::Spawn, clock_, v.id, -1, -1});
        vehicles_.emplace(v.id, std::move(v));
        ++spawned_;
    }
    pending_ = std::move(still);
}

bool Simulator::downstream_room(const VehicleState& v) const {
    if (v.route_index + 1 >= v.route->links.size()) return true;
    const int next = v.route->links[v.route_index + 1];
    const int junction = v.route->intersections[v.route_index];
    std::size_t ahead = 0;
    for (const BoxOccupant& occ : boxes_[static_cast<std::size_t>(junction)]) {
        const VehicleState& o = vehicles_.at(occ.vehicle_id);
        if (o.id != v.id && o.route->links[o.route_index + 1] == next) ++ahead;
    }
    const auto& lane = lanes_[static_cast<std::size_t>(next)];
    if (lane.empty() && ahead == 0) return true;
    const double len = params_.idm.vehicle_length;
    const double tail_rear = lane.empty() ? network_->link(next).length : vehicles_.at(lane.back()).position - len;
    return tail_rear >= static_cast<double>(ahead + 1) * (len + params_.idm.min_gap);
}

bool Simulator::conflicting_occupant(int intersection, const Movement& m, int* who) const {
    for (const BoxOccupant& occ : boxes_[static_cast<std::size_t>(intersection)]) {
        if (movements_conflict(occ.movement, m)) {
            if (who) *who = occ.vehicle_id;
            return true;
        }
    }
    return false;
}

bool Simulator::hv_may_enter(const VehicleState& v, int intersection, const Movement& m) const {
    if (conflicting_occupant(intersection, m) || !downstream_room(v)) return false;
    constexpr double kNever = std::numeric_limits<double>::infinity();
    const auto key = [&](const VehicleState& x) {
        return std::make_pair(x.zone_arrival < 0 ? kNever : x.zone_arrival, x.id);
    };
    const auto mine = key(v);
    for (Direction dir : kAllSides) {
        const auto lid = network_->approach_link(intersection, dir);
        if (!lid || *lid == v.current_link()) continue;
        const auto& lane = lanes_[static_cast<std::size_t>(*lid)];
        if (lane.empty()) continue;
        const VehicleState& h = vehicles_.at(lane.front());
        if (h.vehicle_class != VehicleClass::HV) continue;
        if (network_->link(*lid).length - h.position > params_.gap_acceptance_distance) continue;
        if (!movements_conflict(m, h.route->movements[h.route_index])) continue;
        if (!downstream_room(h)) continue;
        if (key(h) < mine) return false;
    }
    return true;
}

bool Simulator::entry_permitted(const VehicleState& v, double distance, bool at_crossing) const {
    const int junction = v.route->intersections[v.route_index];
    const Intersection& in = network_->intersection(junction);
    const Movement& m = v.route->movements[v.route_index];
    const bool in_zone = at_crossing || distance <= in.control_zone_radius;
    if (in.control_mode == ControlMode::Signalized) {
        const SignalPlan& plan = *in.signal_plan;
        if (!signal_allows(plan, clock_, m.approach)) {
            if (!signal_is_yellow(plan, clock_, m.approach)) return false;
            // Yellow: stop when a comfortable stop is still possible.
            if (!at_crossing && v.speed * v.speed / (2.0 * params_.idm.comfortable_decel) <= distance) return false;
        }
        if (!in_zone) return true;
        return !conflicting_occupant(junction, m) && downstream_room(v);
    }
    if (!in_zone) return true;
    return hv_may_enter(v, junction, m);
}

Simulator::Decision Simulator::decide(const VehicleState& v, std::size_t lane_index, const std::vector<int>& lane,
                                      const std::map<int, Action>& actions,
                                      const std::map<int, AgentSlot>& eligible, std::vector<Event>& events) {
    const Link& link = network_->link(v.current_link());
    IdmParams p = params_.idm;
    p.desired_speed = std::min(p.desired_speed, link.speed_limit);

    std::optional<double> gap;
    std::optional<double> leader_speed;
    if (lane_index > 0) {
        const VehicleState& leader = vehicles_.at(lane[lane_index - 1]);
        gap = leader.position - p.vehicle_length - v.position;
        leader_speed = leader.speed;
        if (*gap <= 0.0) events.push_back(Event{EventKind::SpacingViolation, clock_, v.id, -1, leader.id});
    }
    Decision dec{idm_acceleration(v.speed, gap, leader_speed, p)};

    if (const auto it = overrides_.find(v.id); it != overrides_.end()) {
        dec.accel = it->second;
        return dec;
    }
    const auto distance = distance_to_stop_line(v);
    if (!distance) return dec;

    const double virtual_leader = idm_acceleration(v.speed, *distance + p.min_gap, 0.0, p);
    if (eligible.count(v.id)) {
        dec.agent = true;
        const auto it = actions.find(v.id);
        dec.action = it == actions.end() ? Action::Stop : it->second;
        if (dec.action == Action::Go) {
            if (lane_index == 0 && !downstream_room(v)) dec.accel = std::min(dec.accel, virtual_leader);
        } else {
            dec.accel = std::min(dec.accel, stop_deceleration(v.speed, *distance, p));
        }
        return dec;
    }
    if (lane_index == 0 && !entry_permitted(v, *distance, false)) dec.accel = std::min(dec.accel, virtual_leader);
    return dec;
}

void Simulator::enter_box(VehicleState& v, double overshoot, std::vector<Event>& events) {
    const int junction = v.route->intersections[v.route_index];
    const Movement& m = v.route->movements[v.route_index];
    int other = -1;
    if (conflicting_occupant(junction, m, &other)) {
        events.push_back(Event{EventKind::Conflict, clock_, v.id, junction, other});
        ++conflicts_;
    }
    const double path = params_.box_length(m.turn);
    boxes_[static_cast<std::size_t>(junction)].push_back(BoxOccupant{v.id, m, path});
    v.in_box = true;
    v.box_position = std::min(std::max(overshoot, 0.0), path);
    v.speed = std::min(v.speed, params_.box_speed_cap);
}

VehicleStats Simulator::stats_of(const VehicleState& v) const {
    VehicleStats s;
    s.vehicle_id = v.id;
    s.od = v.od;
    s.vehicle_class = v.vehicle_class;
    s.waiting_clock = v.waiting_clock;
    s.wait_by_intersection = v.wait_by_intersection;
    s.first_intersection = v.route->intersections.empty() ? -1 : v.route->intersections.front();
    s.depart_time = v.depart_time;
    s.finished = v.done;
    return s;
}

void Simulator::despawn(VehicleState& v, std::vector<Event>& events) {
    v.done = true;
    finished_.push_back(stats_of(v));
    events.push_back(Event{EventKind::Despawn, clock_, v.id, -1, -1});
    ++despawned_;
}

void Simulator::advance_boxes() {
    const double dt = params_.dt;
    const IdmParams& p = params_.idm;
    for (auto& box : boxes_) {
        std::vector<BoxOccupant> keep;
        for (const BoxOccupant& occ : box) {
            VehicleState& v = vehicles_.at(occ.vehicle_id);
            v.speed = std::min(v.speed + p.max_accel * dt, params_.box_speed_cap);
            v.box_position += v.speed * dt;
            if (v.box_position < occ.path_length) {
                keep.push_back(occ);
                continue;
            }
            const int next = v.route->links[v.route_index + 1];
            auto& lane = lanes_[static_cast<std::size_t>(next)];
            double position = v.box_position - occ.path_length;
            if (!lane.empty()) {
                const VehicleState& tail = vehicles_.at(lane.back());
                const double allowed = tail.position - p.vehicle_length - p.min_gap;
                if (allowed < 0.0) {
                    v.box_position = occ.path_length;
                    v.speed = 0.0;
                    keep.push_back(occ);
                    continue;
                }
                if (position > allowed) {
                    position = allowed;
                    v.speed = std::min(v.speed, tail.speed);
                }
            }
            v.in_box = false;
            v.box_position = 0.0;
            ++v.route_index;
            v.position = position;
            v.zone_arrival = -1.0;
            lane.push_back(v.id);
        }
        box = std::move(keep);
    }
}

void Simulator::advance_lane(int link_id, const std::map<int, Decision>& decisions, std::vector<Event>& events) {
    const Link& link = network_->link(link_id);
    const bool to_junction = network_->node(link.to_node).intersection.has_value();
    const double dt = params_.dt;
    const double len = params_.idm.vehicle_length;
    auto& lane = lanes_[static_cast<std::size_t>(link_id)];
    std::vector<int> next_lane;
    next_lane.reserve(lane.size());
    std::vector<int> gone;

    for (int id : lane) {
        VehicleState& v = vehicles_.at(id);
        const auto dit = decisions.find(id);
        if (dit == decisions.end()) {  // arrived from a junction box this step
            next_lane.push_back(id);
            continue;
        }
        const Decision& dec = dit->second;
        const bool head = next_lane.empty();
        const double old_speed = v.speed;
        v.speed = std::max(0.0, v.speed + dec.accel * dt);
        double x = v.position + v.speed * dt;
        if (!head) {
            const VehicleState& leader = vehicles_.at(next_lane.back());
            const double rear = leader.position - len;
            if (x > rear) {
                x = rear;
                v.speed = std::min(v.speed, leader.speed);
                events.push_back(Event{EventKind::SpacingViolation, clock_, id, -1, leader.id});
            }
        }
        if (x >= link.length) {
            if (!to_junction) {
                despawn(v, events);
                gone.push_back(id);
                continue;
            }
            if (head) {
                const bool permitted = dec.agent ? (dec.action == Action::Go && downstream_room(v))
                                                 : entry_permitted(v, 0.0, true);
                if (permitted) {
                    enter_box(v, x - link.length, events);
                    continue;
                }
            }
            if (old_speed > 0.0 || x > link.length) {
                events.push_back(Event{EventKind::StopLineHold, clock_, id,
                                       v.route->intersections[v.route_index], -1});
            }
            x = link.length;
            v.speed = 0.0;
        }
        v.position = x;
        next_lane.push_back(id);
    }
    lane = std::move(next_lane);
    for (int id : gone) vehicles_.erase(id);
}

std::vector<Event> Simulator::step(const std::map<int, Action>& rv_actions) {
    std::map<int, AgentSlot> eligible;
    for (const AgentSlot& s : eligible_agents()) eligible.emplace(s.vehicle_id, s);
    for (const auto& [id, action] : rv_actions) {
        if (!eligible.count(id)) {
            throw ContractViolation("action supplied for vehicle " + std::to_string(id) +
                                    ", which is not an eligible agent");
        }
    }

    std::vector<Event> events;
    inject_spawns(events);

    std::map<int, Decision> decisions;
    for (std::size_t lid = 0; lid < lanes_.size(); ++lid) {
        const auto& lane = lanes_[lid];
        for (std::size_t k = 0; k < lane.size(); ++k) {
            decisions.emplace(lane[k], decide(vehicles_.at(lane[k]), k, lane, rv_actions, eligible, events));
        }
    }

    advance_boxes();
    for (std::size_t lid = 0; lid < lanes_.size(); ++lid) advance_lane(static_cast<int>(lid), decisions, events);

    const double dt = params_.dt;
    const double next_clock = clock_ + dt;
    for (auto& [id, v] : vehicles_) {
        const int zone = zone_of(v);
        if (zone >= 0 && v.speed < params_.waiting_speed_threshold) {
            v.waiting_clock += dt;
            v.wait_by_intersection[static_cast<std::size_t>(zone)] += dt;
        }
        if (!v.in_box && v.zone_arrival < 0.0) {
            const auto d = distance_to_stop_line(v);
            const Link& link = network_->link(v.current_link());
            if (d && *d <= network_->intersection(link.to_node).control_zone_radius) v.zone_arrival = next_clock;
        }
    }

    overrides_.clear();
    ++steps_;
    clock_ = static_cast<double>(steps_) * dt;
    log_.insert(log_.end(), events.begin(), events.end());
    if (trace_) write_trace();
    return events;
}

std::vector<VehicleStats> Simulator::all_stats() const {
    std::vector<VehicleStats> out = finished_;
    for (const auto& [id, v] : vehicles_) out.push_back(stats_of(v));
    std::sort(out.begin(), out.end(),
              [](const VehicleStats& a, const VehicleStats& b) { return a.vehicle_id < b.vehicle_id; });
    return out;
}

}  // namespace mtc
