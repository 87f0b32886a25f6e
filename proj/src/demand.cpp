#include "mtc/demand.hpp"

#include "mtc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace mtc {

namespace {

struct OdInfo {
    std::string_view name;
    CompassSide from;
    CompassSide to;
};

constexpr std::array<OdInfo, kNumOdPairs> kOdInfo = {{
    {"SN", CompassSide::South, CompassSide::North},
    {"NS", CompassSide::North, CompassSide::South},
    {"NE", CompassSide::North, CompassSide::East},
    {"EN", CompassSide::East, CompassSide::North},
    {"NW", CompassSide::North, CompassSide::West},
    {"WN", CompassSide::West, CompassSide::North},
    {"SE", CompassSide::South, CompassSide::East},
    {"ES", CompassSide::East, CompassSide::South},
    {"SW", CompassSide::South, CompassSide::West},
    {"WS", CompassSide::West, CompassSide::South},
    {"WE", CompassSide::West, CompassSide::East},
    {"EW", CompassSide::East, CompassSide::West},
}};

const OdInfo& info(OdPair od) { return kOdInfo[static_cast<std::size_t>(od)]; }

struct ExperimentDef {
    OdPair first;
    OdPair second;
    double concentration;  // 0 marks the uniform pattern
    std::string_view label;
};

constexpr std::array<ExperimentDef, 8> kExperiments = {{
    {OdPair::NS, OdPair::SN, 0.7, "NS+SN 70%"},
    {OdPair::NS, OdPair::SN, 0.9, "NS+SN 90%"},
    {OdPair::NW, OdPair::WN, 0.7, "NW+WN 70%"},
    {OdPair::NW, OdPair::WN, 0.9, "NW+WN 90%"},
    {OdPair::WE, OdPair::EW, 0.7, "WE+EW 70%"},
    {OdPair::NS, OdPair::SN, 0.0, "12 Dir. Uniform"},
    {OdPair::NE, OdPair::SW, 0.7, "NE+SW 70%"},
    {OdPair::SE, OdPair::NW, 0.7, "SE+NW 70%"},
}};

const ExperimentDef& experiment(int id) {
    if (id < 1 || id > 8) throw ConfigError("experiment id " + std::to_string(id) + " outside 1..8");
    return kExperiments[static_cast<std::size_t>(id - 1)];
}

}  // namespace

CompassSide origin_side(OdPair od) { return info(od).from; }
CompassSide destination_side(OdPair od) { return info(od).to; }
std::string_view to_string(OdPair od) { return info(od).name; }

std::optional<OdPair> parse_od_pair(std::string_view name) {
    for (OdPair od : kAllOdPairs) {
        if (info(od).name == name) return od;
    }
    return std::nullopt;
}

std::string_view to_string(VehicleClass cls) { return cls == VehicleClass::RV ? "RV" : "HV"; }

void OdPattern::validate() const {
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("od pattern: weights must be finite and >= 0");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("od pattern: weights sum to " + std::to_string(sum) + ", expected 1");
    }
}

OdPattern od_pattern_from_experiment(int experiment_id) {
    const ExperimentDef& def = experiment(experiment_id);
    OdPattern p;
    if (def.concentration == 0.0) {
        p.weights.fill(1.0 / static_cast<double>(kNumOdPairs));
        return p;
    }
    p.weights.fill((1.0 - def.concentration) / static_cast<double>(kNumOdPairs - 2));
    p.weights[static_cast<std::size_t>(def.first)] = def.concentration / 2.0;
    p.weights[static_cast<std::size_t>(def.second)] = def.concentration / 2.0;
    return p;
}

std::string experiment_label(int experiment_id) { return std::string(experiment(experiment_id).label); }

void DemandConfig::validate() const {
    if (total_vehicles < 0) throw ConfigError("demand.total_vehicles must be >= 0");
    if (!(horizon > 0)) throw ConfigError("demand.horizon must be > 0");
    if (!(penetration >= 0.0 && penetration <= 1.0)) throw ConfigError("demand.penetration must be in [0, 1]");
    if (!(departure_window > 0.0 && departure_window <= 1.0)) {
        throw ConfigError("demand.departure_window must be in (0, 1]");
    }
}

std::vector<SpawnEvent> generate_spawn_schedule(const DemandConfig& config, const OdPattern& pattern,
                                                const RoadNetwork& network) {
    config.validate();
    pattern.validate();
    const auto n = static_cast<std::size_t>(config.total_vehicles);
    std::vector<SpawnEvent> events;
    if (n == 0) return events;

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::array<double, kNumOdPairs> cdf{};
    std::partial_sum(pattern.weights.begin(), pattern.weights.end(), cdf.begin());

    const double window = config.departure_window * config.horizon;
    events.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = unit(rng) * cdf.back();
        std::size_t k = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        k = std::min(k, kNumOdPairs - 1);
        const auto od = static_cast<OdPair>(k);

        const auto& origins = network.boundary_nodes(origin_side(od));
        const auto& dests = network.boundary_nodes(destination_side(od));
        SpawnEvent e;
        e.od = od;
        e.origin = origins[std::uniform_int_distribution<std::size_t>(0, origins.size() - 1)(rng)];
        e.destination = dests[std::uniform_int_distribution<std::size_t>(0, dests.size() - 1)(rng)];
        e.depart_time = unit(rng) * window;
        events.push_back(e);
    }

    const auto rv_count = static_cast<std::size_t>(std::llround(config.penetration * static_cast<double>(n)));
    std::vector<VehicleClass> classes(n, VehicleClass::HV);
    std::fill_n(classes.begin(), std::min(rv_count, n), VehicleClass::RV);
    std::shuffle(classes.begin(), classes.end(), rng);
    for (std::size_t i = 0; i < n; ++i) events[i].vehicle_class = classes[i];

    std::stable_sort(events.begin(), events.end(),
                     [](const SpawnEvent& a, const SpawnEvent& b) { return a.depart_time < b.depart_time; });
    for (std::size_t i = 0; i < n; ++i) events[i].vehicle_id = static_cast<int>(i);
    return events;
}

}  // namespace mtc
