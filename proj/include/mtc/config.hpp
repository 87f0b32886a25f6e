#pragma once

#include "mtc/demand.hpp"
#include "mtc/env.hpp"
#include "mtc/network.hpp"
#include "mtc/rainbow/trainer.hpp"
#include "mtc/sim.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mtc {

struct NetworkSection {
    std::string preset = "desk-2x2";
    double link_length = 200.0;
    double speed_limit = 15.0;
    /// Intersections under RV control; nullopt uses the preset's default.
    std::optional<std::set<int>> rv_controlled;
    double control_zone_radius = 30.0;
    SignalPlan signal_plan;
};

struct DemandSection {
    std::vector<int> experiments{1, 2, 3, 4, 5, 6, 7, 8};
    /// When set, replaces the preset experiments with a single pattern (experiment id 0).
    std::optional<std::array<double, kNumOdPairs>> custom_weights;
    int total_vehicles = 400;
    double horizon = 300.0;
    std::vector<double> penetrations{1.0, 0.75, 0.5, 0.25};
    double departure_window = 0.8;
};

struct EvaluationSection {
    int runs = 20;
    std::uint64_t seed_base = 1000;  // run k uses seed_base + k
    int workers = 0;                 // 0 = hardware concurrency
    bool greedy = true;              // false evaluates a uniform-random policy
};

struct ExperimentConfig {
    NetworkSection network;
    DemandSection demand;
    rainbow::TrainConfig train;
    RewardConfig reward;
    SimParams sim;
    EvaluationSection evaluation;
    std::string output_dir = "out";
    std::uint64_t seed = 1;  // training seed

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// Experiment ids the config sweeps: {0} with custom weights, else demand.experiments.
std::vector<int> configured_experiments(const ExperimentConfig& cfg);
OdPattern pattern_for(const ExperimentConfig& cfg, int experiment_id);
std::string label_for(const ExperimentConfig& cfg, int experiment_id);

/// Strict parse: unknown keys and wrong types throw ConfigError with the field path.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);

}  // namespace mtc
