#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace mtc {

/// Compass side of the grid. Also used as the approach direction of an
/// incoming link ("from-N" is CompassSide::North).
enum class CompassSide { North = 0, South = 1, East = 2, West = 3 };
using Direction = CompassSide;

inline constexpr std::array<CompassSide, 4> kAllSides = {
    CompassSide::North, CompassSide::South, CompassSide::East, CompassSide::West};

/// Direction of travel along a link.
enum class Heading { North = 0, South = 1, East = 2, West = 3 };

enum class Turn { Left = 0, Straight = 1, Right = 2 };

enum class ControlMode { Signalized, RvControlled };

CompassSide opposite(CompassSide side);
Heading opposite(Heading heading);
/// The side a vehicle arrives from when travelling with `heading`.
Direction approach_of(Heading heading);

/// Turn classification for right-hand traffic. Returns nullopt for a U-turn.
std::optional<Turn> classify_turn(Heading incoming, Heading outgoing);

std::string_view to_string(CompassSide side);
std::string_view to_string(Turn turn);

struct Movement {
    Direction approach = Direction::North;
    Turn turn = Turn::Straight;

    friend bool operator==(const Movement&, const Movement&) = default;
};

/// Conflict relation between two movements through the same junction box.
/// Compatible pairs: same approach; opposite approaches that both go
/// straight or right; two right turns. Everything else conflicts.
bool movements_conflict(const Movement& a, const Movement& b);

struct SignalPlan {
    double green_ns = 30.0;
    double green_ew = 30.0;
    double yellow = 3.0;
    double offset = 0.0;

    double cycle() const { return green_ns + green_ew + 2.0 * yellow; }
    void validate() const;
};

struct Intersection {
    int id = 0;
    ControlMode control_mode = ControlMode::Signalized;
    std::vector<Direction> approaches;
    std::optional<SignalPlan> signal_plan;
    double control_zone_radius = 30.0;
};

struct Node {
    int id = 0;
    double x = 0.0;
    double y = 0.0;
    std::optional<int> intersection;       // set for junction nodes
    std::optional<CompassSide> boundary;   // set for origin/destination stubs
};

struct Link {
    int id = 0;
    int from_node = 0;
    int to_node = 0;
    double length = 0.0;
    double speed_limit = 0.0;
    Heading heading = Heading::North;
};

struct Route {
    std::vector<int> links;
    std::vector<int> intersections;   // traversed in order
    std::vector<Movement> movements;  // one per traversed intersection

    friend bool operator==(const Route&, const Route&) = default;
};

struct GridOptions {
    double speed_limit = 15.0;
    double control_zone_radius = 30.0;
};

/// Immutable road network. Node ids 0..n-1 are the intersections (node id ==
/// intersection id); boundary nodes follow, grouped N, S, E, W.
class RoadNetwork {
public:
    RoadNetwork(std::vector<Node> nodes, std::vector<Link> links,
                std::vector<Intersection> intersections);

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<Link>& links() const { return links_; }
    const std::vector<Intersection>& intersections() const { return intersections_; }
    const std::vector<int>& boundary_nodes(CompassSide side) const {
        return boundary_[static_cast<std::size_t>(side)];
    }

    const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
    const Link& link(int id) const { return links_.at(static_cast<std::size_t>(id)); }
    const Intersection& intersection(int id) const {
        return intersections_.at(static_cast<std::size_t>(id));
    }

    const std::vector<int>& out_links(int node) const { return out_.at(static_cast<std::size_t>(node)); }
    const std::vector<int>& in_links(int node) const { return in_.at(static_cast<std::size_t>(node)); }

    /// Incoming link of `intersection` arriving from `approach`, if any.
    std::optional<int> approach_link(int intersection, Direction approach) const;

    /// Copy with every intersection forced to signal control.
    RoadNetwork all_signalized(const SignalPlan& plan) const;

    /// Copy with the given intersections switched to RV control, the rest signalized.
    RoadNetwork with_rv_controlled(const std::set<int>& rv_ids, const SignalPlan& plan) const;

private:
    void validate() const;

    std::vector<Node> nodes_;
    std::vector<Link> links_;
    std::vector<Intersection> intersections_;
    std::array<std::vector<int>, 4> boundary_;
    std::vector<std::vector<int>> out_;
    std::vector<std::vector<int>> in_;
};

RoadNetwork build_grid(int rows, int cols, double link_length, const std::set<int>& rv_controlled_ids,
                       const SignalPlan& signal_plan, const GridOptions& options = {});

/// Minimal-hop route between two boundary nodes. Ties go to fewer turns, then
/// to the smallest next-node id at each branching point. U-turns are not used.
Route shortest_route(const RoadNetwork& network, int origin, int destination);

/// Resolves `grid-RxC` (no RV control by default), `desk-2x2` (2x2 grid,
/// intersections 0 and 3 under RV control) and `colorado14-like` (2x7 grid,
/// intersections 2 and 9 under RV control).
struct PresetInfo {
    int rows = 0;
    int cols = 0;
    std::set<int> default_rv_ids;
};
PresetInfo resolve_preset(std::string_view name);

}  // namespace mtc
