#include "mtc/network.hpp"

#include "mtc/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <queue>
#include <string>
#include <utility>

namespace mtc {

CompassSide opposite(CompassSide side) {
    switch (side) {
        case CompassSide::North: return CompassSide::South;
        case CompassSide::South: return CompassSide::North;
        case CompassSide::East: return CompassSide::West;
        case CompassSide::West: return CompassSide::East;
    }
    return side;
}

Heading opposite(Heading heading) {
    switch (heading) {
        case Heading::North: return Heading::South;
        case Heading::South: return Heading::North;
        case Heading::East: return Heading::West;
        case Heading::West: return Heading::East;
    }
    return heading;
}

Direction approach_of(Heading heading) {
    // A southbound vehicle arrives from the north.
    switch (heading) {
        case Heading::North: return Direction::South;
        case Heading::South: return Direction::North;
        case Heading::East: return Direction::West;
        case Heading::West: return Direction::East;
    }
    return Direction::North;
}

namespace {

Heading clockwise(Heading h) {
    switch (h) {
        case Heading::North: return Heading::East;
        case Heading::East: return Heading::South;
        case Heading::South: return Heading::West;
        case Heading::West: return Heading::North;
    }
    return h;
}

}  // namespace

std::optional<Turn> classify_turn(Heading incoming, Heading outgoing) {
    if (incoming == outgoing) return Turn::Straight;
    if (outgoing == opposite(incoming)) return std::nullopt;
    if (outgoing == clockwise(incoming)) return Turn::Right;
    return Turn::Left;
}

std::string_view to_string(CompassSide side) {
    switch (side) {
        case CompassSide::North: return "N";
        case CompassSide::South: return "S";
        case CompassSide::East: return "E";
        case CompassSide::West: return "W";
    }
    return "?";
}

std::string_view to_string(Turn turn) {
    switch (turn) {
        case Turn::Left: return "Left";
        case Turn::Straight: return "Straight";
        case Turn::Right: return "Right";
    }
    return "?";
}

bool movements_conflict(const Movement& a, const Movement& b) {
    if (a.approach == b.approach) return false;
    const auto through_or_right = [](Turn t) { return t == Turn::Straight || t == Turn::Right; };
    if (a.approach == opposite(b.approach) && through_or_right(a.turn) && through_or_right(b.turn)) {
        return false;
    }
    if (a.turn == Turn::Right && b.turn == Turn::Right) return false;
    return true;
}

void SignalPlan::validate() const {
    if (green_ns < 0 || green_ew < 0 || yellow < 0) {
        throw ConfigError("signal_plan: phase durations must be >= 0");
    }
    if (!(cycle() > 0)) throw ConfigError("signal_plan: cycle length must be > 0");
}

RoadNetwork::RoadNetwork(std::vector<Node> nodes, std::vector<Link> links,
                         std::vector<Intersection> intersections)
    : nodes_(std::move(nodes)), links_(std::move(links)), intersections_(std::move(intersections)) {
    out_.resize(nodes_.size());
    in_.resize(nodes_.size());
    for (const Link& l : links_) {
        if (l.from_node < 0 || l.to_node < 0 || static_cast<std::size_t>(l.from_node) >= nodes_.size() ||
            static_cast<std::size_t>(l.to_node) >= nodes_.size()) {
            throw ConfigError("link " + std::to_string(l.id) + " references a missing node");
        }
        out_[static_cast<std::size_t>(l.from_node)].push_back(l.id);
        in_[static_cast<std::size_t>(l.to_node)].push_back(l.id);
    }
    for (const Node& n : nodes_) {
        if (n.boundary) boundary_[static_cast<std::size_t>(*n.boundary)].push_back(n.id);
    }
    validate();
}

void RoadNetwork::validate() const {
    for (std::size_t i = 0; i < links_.size(); ++i) {
        const Link& l = links_[i];
        if (l.id != static_cast<int>(i)) throw ConfigError("link ids must be dense");
        if (!(l.length > 0)) throw ConfigError("link " + std::to_string(l.id) + ": length must be > 0");
        if (!(l.speed_limit > 0)) throw ConfigError("link " + std::to_string(l.id) + ": speed_limit must be > 0");
    }
    for (std::size_t i = 0; i < intersections_.size(); ++i) {
        const Intersection& in = intersections_[i];
        if (in.id != static_cast<int>(i)) throw ConfigError("intersection ids must be dense");
        if ((in.control_mode == ControlMode::Signalized) != in.signal_plan.has_value()) {
            throw ConfigError("intersection " + std::to_string(in.id) +
                              ": signalized iff a signal plan is present");
        }
        if (in.signal_plan) in.signal_plan->validate();
        if (!(in.control_zone_radius > 0)) throw ConfigError("control_zone_radius must be > 0");
        if (!nodes_.at(i).intersection || *nodes_.at(i).intersection != in.id) {
            throw ConfigError("intersection node ids must match intersection ids");
        }
    }
    for (const auto& side : boundary_) {
        if (side.empty()) throw ConfigError("every compass side needs at least one boundary node");
    }
}

std::optional<int> RoadNetwork::approach_link(int intersection, Direction approach) const {
    for (int lid : in_links(intersection)) {
        if (approach_of(link(lid).heading) == approach) return lid;
    }
    return std::nullopt;
}

RoadNetwork RoadNetwork::all_signalized(const SignalPlan& plan) const {
    return with_rv_controlled({}, plan);
}

RoadNetwork RoadNetwork::with_rv_controlled(const std::set<int>& rv_ids, const SignalPlan& plan) const {
    std::vector<Intersection> copy = intersections_;
    for (int id : rv_ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= copy.size()) {
            throw ConfigError("rv_controlled id " + std::to_string(id) + " is not an intersection");
        }
    }
    for (Intersection& in : copy) {
        if (rv_ids.count(in.id)) {
            in.control_mode = ControlMode::RvControlled;
            in.signal_plan.reset();
        } else {
            in.control_mode = ControlMode::Signalized;
            if (!in.signal_plan) in.signal_plan = plan;
        }
    }
    return RoadNetwork(nodes_, links_, std::move(copy));
}

namespace {

Heading heading_between(const Node& a, const Node& b) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    if (std::abs(dx) >= std::abs(dy)) return dx > 0 ? Heading::East : Heading::West;
    return dy > 0 ? Heading::North : Heading::South;
}

}  // namespace

RoadNetwork build_grid(int rows, int cols, double link_length, const std::set<int>& rv_controlled_ids,
                       const SignalPlan& signal_plan, const GridOptions& options) {
    if (rows < 1 || cols < 1) throw ConfigError("grid: rows and cols must be >= 1");
    if (!(link_length > 0)) throw ConfigError("grid: link_length must be > 0");
    signal_plan.validate();
    const int n = rows * cols;
    for (int id : rv_controlled_ids) {
        if (id < 0 || id >= n) {
            throw ConfigError("rv_controlled id " + std::to_string(id) + " outside 0.." + std::to_string(n - 1));
        }
    }

    const double L = link_length;
    std::vector<Node> nodes;
    nodes.reserve(static_cast<std::size_t>(n + 2 * rows + 2 * cols));
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            nodes.push_back(Node{r * cols + c, c * L, -r * L, r * cols + c, std::nullopt});
        }
    }
    auto add_boundary = [&](double x, double y, CompassSide side) {
        const int id = static_cast<int>(nodes.size());
        nodes.push_back(Node{id, x, y, std::nullopt, side});
        return id;
    };
    std::vector<std::pair<int, int>> stubs;  // (boundary node, intersection)
    for (int c = 0; c < cols; ++c) stubs.emplace_back(add_boundary(c * L, L, CompassSide::North), c);
    for (int c = 0; c < cols; ++c) {
        stubs.emplace_back(add_boundary(c * L, -rows * L, CompassSide::South), (rows - 1) * cols + c);
    }
    for (int r = 0; r < rows; ++r) {
        stubs.emplace_back(add_boundary(cols * L, -r * L, CompassSide::East), r * cols + cols - 1);
    }
    for (int r = 0; r < rows; ++r) stubs.emplace_back(add_boundary(-L, -r * L, CompassSide::West), r * cols);

    std::vector<Link> links;
    auto add_pair = [&](int a, int b) {
        for (auto [from, to] : {std::pair{a, b}, std::pair{b, a}}) {
            const int id = static_cast<int>(links.size());
            links.push_back(Link{id, from, to, L, options.speed_limit,
                                 heading_between(nodes[static_cast<std::size_t>(from)],
                                                 nodes[static_cast<std::size_t>(to)])});
        }
    };
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c + 1 < cols; ++c) add_pair(r * cols + c, r * cols + c + 1);
    }
    for (int r = 0; r + 1 < rows; ++r) {
        for (int c = 0; c < cols; ++c) add_pair(r * cols + c, (r + 1) * cols + c);
    }
    for (auto [b, i] : stubs) add_pair(b, i);

    std::vector<Intersection> intersections;
    intersections.reserve(static_cast<std::size_t>(n));
    for (int id = 0; id < n; ++id) {
        Intersection in;
        in.id = id;
        in.control_zone_radius = options.control_zone_radius;
        if (rv_controlled_ids.count(id)) {
            in.control_mode = ControlMode::RvControlled;
        } else {
            in.control_mode = ControlMode::Signalized;
            in.signal_plan = signal_plan;
        }
        for (const Link& l : links) {
            if (l.to_node == id) in.approaches.push_back(approach_of(l.heading));
        }
        std::sort(in.approaches.begin(), in.approaches.end());
        intersections.push_back(std::move(in));
    }
    return RoadNetwork(std::move(nodes), std::move(links), std::move(intersections));
}

Route shortest_route(const RoadNetwork& network, int origin, int destination) {
    const auto& nodes = network.nodes();
    auto is_boundary = [&](int id) {
        return id >= 0 && static_cast<std::size_t>(id) < nodes.size() && nodes[static_cast<std::size_t>(id)].boundary;
    };
    if (!is_boundary(origin) || !is_boundary(destination)) {
        throw RoutingError("route endpoints must be boundary nodes");
    }
    if (origin == destination) throw RoutingError("origin equals destination");

    // Backward lexicographic Dijkstra over links: cost(l) = (links to the
    // destination including l, turns along the way).
    using Cost = std::pair<int, int>;
    constexpr Cost kInf{std::numeric_limits<int>::max(), std::numeric_limits<int>::max()};
    const auto& links = network.links();
    std::vector<Cost> cost(links.size(), kInf);
    std::vector<bool> done(links.size(), false);
    using Entry = std::pair<Cost, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    for (int lid : network.in_links(destination)) {
        cost[static_cast<std::size_t>(lid)] = {1, 0};
        open.push({{1, 0}, lid});
    }
    while (!open.empty()) {
        auto [c, lid] = open.top();
        open.pop();
        if (done[static_cast<std::size_t>(lid)]) continue;
        done[static_cast<std::size_t>(lid)] = true;
        const Link& next = network.link(lid);
        if (!nodes[static_cast<std::size_t>(next.from_node)].intersection) continue;
        for (int pid : network.in_links(next.from_node)) {
            const auto turn = classify_turn(network.link(pid).heading, next.heading);
            if (!turn) continue;
            const Cost candidate{c.first + 1, c.second + (*turn == Turn::Straight ? 0 : 1)};
            if (candidate < cost[static_cast<std::size_t>(pid)]) {
                cost[static_cast<std::size_t>(pid)] = candidate;
                open.push({candidate, pid});
            }
        }
    }

    const auto& starts = network.out_links(origin);
    if (starts.size() != 1) throw RoutingError("boundary node must have exactly one outgoing link");
    int current = starts.front();
    if (cost[static_cast<std::size_t>(current)] == kInf) {
        throw RoutingError("destination " + std::to_string(destination) + " unreachable from " +
                           std::to_string(origin));
    }

    Route route;
    route.links.push_back(current);
    while (network.link(current).to_node != destination) {
        const Link& cur = network.link(current);
        const Cost want = cost[static_cast<std::size_t>(current)];
        int best = -1;
        Turn best_turn = Turn::Straight;
        for (int nid : network.out_links(cur.to_node)) {
            const auto turn = classify_turn(cur.heading, network.link(nid).heading);
            if (!turn) continue;
            const Cost c = cost[static_cast<std::size_t>(nid)];
            if (c == kInf) continue;
            const Cost via{c.first + 1, c.second + (*turn == Turn::Straight ? 0 : 1)};
            if (via != want) continue;
            if (best < 0 || network.link(nid).to_node < network.link(best).to_node) {
                best = nid;
                best_turn = *turn;
            }
        }
        if (best < 0) throw RoutingError("route reconstruction failed");
        route.intersections.push_back(cur.to_node);
        route.movements.push_back(Movement{approach_of(cur.heading), best_turn});
        route.links.push_back(best);
        current = best;
    }
    return route;
}

PresetInfo resolve_preset(std::string_view name) {
    if (name == "colorado14-like") return PresetInfo{2, 7, {2, 9}};
    if (name == "desk-2x2") return PresetInfo{2, 2, {0, 3}};
    if (name.substr(0, 5) == "grid-") {
        const std::string_view dims = name.substr(5);
        const auto x = dims.find('x');
        if (x != std::string_view::npos) {
            int rows = 0;
            int cols = 0;
            const auto r1 = std::from_chars(dims.data(), dims.data() + x, rows);
            const auto r2 = std::from_chars(dims.data() + x + 1, dims.data() + dims.size(), cols);
            if (r1.ec == std::errc{} && r1.ptr == dims.data() + x && r2.ec == std::errc{} &&
                r2.ptr == dims.data() + dims.size() && rows >= 1 && cols >= 1) {
                return PresetInfo{rows, cols, {}};
            }
        }
    }
    throw ConfigError("unknown network preset '" + std::string(name) + "'");
}

}  // namespace mtc
