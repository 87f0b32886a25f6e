#pragma once

#include "mtc/network.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mtc {

/// Origin-destination classes named by entry side then exit side
/// (NS = enter from the north, leave to the south).
enum class OdPair { SN = 0, NS, NE, EN, NW, WN, SE, ES, SW, WS, WE, EW };

inline constexpr std::size_t kNumOdPairs = 12;
inline constexpr std::array<OdPair, kNumOdPairs> kAllOdPairs = {
    OdPair::SN, OdPair::NS, OdPair::NE, OdPair::EN, OdPair::NW, OdPair::WN,
    OdPair::SE, OdPair::ES, OdPair::SW, OdPair::WS, OdPair::WE, OdPair::EW};

CompassSide origin_side(OdPair od);
CompassSide destination_side(OdPair od);
std::string_view to_string(OdPair od);
std::optional<OdPair> parse_od_pair(std::string_view name);

enum class VehicleClass { HV, RV };
std::string_view to_string(VehicleClass cls);

struct OdPattern {
    std::array<double, kNumOdPairs> weights{};

    double weight(OdPair od) const { return weights[static_cast<std::size_t>(od)]; }
    /// Throws ConfigError unless weights are nonnegative and sum to 1 (1e-9).
    void validate() const;
};

/// Preset patterns for experiments 1-8: two emphasized pairs share the stated
/// concentration equally and the other ten split the remainder equally;
/// experiment 6 is uniform.
OdPattern od_pattern_from_experiment(int experiment_id);
std::string experiment_label(int experiment_id);

struct DemandConfig {
    int total_vehicles = 0;
    double horizon = 1000.0;
    double penetration = 0.0;
    std::uint64_t seed = 0;
    /// Departures are uniform on [0, departure_window * horizon].
    double departure_window = 0.8;

    void validate() const;
};

struct SpawnEvent {
    int vehicle_id = 0;
    double depart_time = 0.0;
    OdPair od = OdPair::NS;
    int origin = 0;
    int destination = 0;
    VehicleClass vehicle_class = VehicleClass::HV;

    friend bool operator==(const SpawnEvent&, const SpawnEvent&) = default;
};

/// Deterministic given (config, pattern, network). Events are sorted by
/// departure time and vehicle ids are assigned in that order.
std::vector<SpawnEvent> generate_spawn_schedule(const DemandConfig& config, const OdPattern& pattern,
                                                const RoadNetwork& network);

}  // namespace mtc
