#include "mtc/config.hpp"

#include "mtc/errors.hpp"
#include "mtc/json_reader.hpp"
#include "mtc/rainbow/checkpoint.hpp"

#include <fstream>

namespace mtc {

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

}  // namespace

void ExperimentConfig::validate() const {
    const PresetInfo preset = resolve_preset(network.preset);
    require(network.link_length > 0.0, "network.link_length: must be > 0");
    require(network.speed_limit > 0.0, "network.speed_limit: must be > 0");
    require(network.control_zone_radius > 0.0, "network.control_zone_radius: must be > 0");
    if (network.rv_controlled) {
        for (int id : *network.rv_controlled) {
            require(id >= 0 && id < preset.rows * preset.cols,
                    "network.rv_controlled: intersection " + std::to_string(id) + " does not exist");
        }
    }
    try {
        network.signal_plan.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("network.signal_plan: ") + e.what());
    }
    if (!demand.custom_weights) {
        require(!demand.experiments.empty(), "demand.experiments: must not be empty");
        for (int e : demand.experiments) {
            require(e >= 1 && e <= 8, "demand.experiments: unknown experiment " + std::to_string(e));
        }
    } else {
        OdPattern p{*demand.custom_weights};
        try {
            p.validate();
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("demand.custom_weights: ") + e.what());
        }
    }
    require(demand.total_vehicles >= 0, "demand.total_vehicles: must be >= 0");
    require(demand.horizon > 0.0, "demand.horizon: must be > 0");
    require(!demand.penetrations.empty(), "demand.penetrations: must not be empty");
    for (double p : demand.penetrations) require(p >= 0.0 && p <= 1.0, "demand.penetrations: values must be in [0, 1]");
    require(demand.departure_window > 0.0 && demand.departure_window <= 1.0,
            "demand.departure_window: must be in (0, 1]");
    require(evaluation.runs >= 1, "evaluation.runs: must be >= 1");
    require(evaluation.workers >= 0, "evaluation.workers: must be >= 0");
    require(!output_dir.empty(), "output_dir: must not be empty");
    train.validate();
    reward.validate();
    sim.validate();
}

std::vector<int> configured_experiments(const ExperimentConfig& cfg) {
    if (cfg.demand.custom_weights) return {0};
    return cfg.demand.experiments;
}

OdPattern pattern_for(const ExperimentConfig& cfg, int experiment_id) {
    if (experiment_id == 0) {
        if (!cfg.demand.custom_weights) throw ConfigError("experiment 0 requires demand.custom_weights");
        OdPattern p{*cfg.demand.custom_weights};
        p.validate();
        return p;
    }
    return od_pattern_from_experiment(experiment_id);
}

std::string label_for(const ExperimentConfig& cfg, int experiment_id) {
    if (experiment_id == 0 && cfg.demand.custom_weights) return "Custom";
    return experiment_label(experiment_id);
}

ExperimentConfig parse_config(const nlohmann::json& j) {
    ExperimentConfig c;
    JsonReader root(j, "");
    if (root.has("network")) {
        JsonReader r = root.child("network");
        r.get("preset", c.network.preset);
        r.get("link_length", c.network.link_length);
        r.get("speed_limit", c.network.speed_limit);
        if (r.has("rv_controlled")) {
            const auto& v = r.raw("rv_controlled");
            if (v.is_null()) {
                c.network.rv_controlled.reset();
            } else {
                const auto ids = JsonReader::convert<std::vector<int>>(v, "network.rv_controlled");
                c.network.rv_controlled = std::set<int>(ids.begin(), ids.end());
            }
        }
        r.get("control_zone_radius", c.network.control_zone_radius);
        if (r.has("signal_plan")) {
            JsonReader s = r.child("signal_plan");
            s.get("green_ns", c.network.signal_plan.green_ns);
            s.get("green_ew", c.network.signal_plan.green_ew);
            s.get("yellow", c.network.signal_plan.yellow);
            s.get("offset", c.network.signal_plan.offset);
            s.finish();
        }
        r.finish();
    }
    if (root.has("demand")) {
        JsonReader r = root.child("demand");
        r.get("experiments", c.demand.experiments);
        if (r.has("custom_weights")) {
            const auto& v = r.raw("custom_weights");
            if (!v.is_null()) {
                JsonReader w(v, "demand.custom_weights");
                std::array<double, kNumOdPairs> weights{};
                for (OdPair od : kAllOdPairs) {
                    const std::string key(to_string(od));
                    if (!w.has(key)) throw ConfigError("demand.custom_weights." + key + ": missing");
                    w.get(key, weights[static_cast<std::size_t>(od)]);
                }
                w.finish();
                c.demand.custom_weights = weights;
            }
        }
        r.get("total_vehicles", c.demand.total_vehicles);
        r.get("horizon", c.demand.horizon);
        r.get("penetrations", c.demand.penetrations);
        r.get("departure_window", c.demand.departure_window);
        r.finish();
    }
    if (root.has("train") && root.raw("train").is_object() && root.raw("train").contains("seed")) {
        throw ConfigError("train.seed: set the top-level seed instead");
    }
    if (root.has("train")) c.train = rainbow::train_config_from_json(root.raw("train"), "train", c.train);
    if (root.has("reward")) {
        JsonReader r = root.child("reward");
        r.get("beta", c.reward.beta);
        r.get("tau_scale", c.reward.tau_scale);
        r.finish();
    }
    if (root.has("sim")) {
        JsonReader r = root.child("sim");
        r.get("dt", c.sim.dt);
        r.get("waiting_speed_threshold", c.sim.waiting_speed_threshold);
        r.get("box_speed_cap", c.sim.box_speed_cap);
        r.get("box_length_straight", c.sim.box_length_straight);
        r.get("box_length_right", c.sim.box_length_right);
        r.get("box_length_left", c.sim.box_length_left);
        r.get("gap_acceptance_distance", c.sim.gap_acceptance_distance);
        if (r.has("idm")) {
            JsonReader i = r.child("idm");
            i.get("desired_speed", c.sim.idm.desired_speed);
            i.get("time_headway", c.sim.idm.time_headway);
            i.get("min_gap", c.sim.idm.min_gap);
            i.get("max_accel", c.sim.idm.max_accel);
            i.get("comfortable_decel", c.sim.idm.comfortable_decel);
            i.get("exponent", c.sim.idm.exponent);
            i.get("vehicle_length", c.sim.idm.vehicle_length);
            i.get("emergency_decel", c.sim.idm.emergency_decel);
            i.finish();
        }
        r.finish();
    }
    if (root.has("evaluation")) {
        JsonReader r = root.child("evaluation");
        r.get("runs", c.evaluation.runs);
        r.get("seed_base", c.evaluation.seed_base);
        r.get("workers", c.evaluation.workers);
        r.get("greedy", c.evaluation.greedy);
        r.finish();
    }
    root.get("output_dir", c.output_dir);
    root.get("seed", c.seed);
    root.finish();
    c.train.seed = c.seed;
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_config(j);
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& c) {
    nlohmann::ordered_json j;
    auto& n = j["network"];
    n["preset"] = c.network.preset;
    n["link_length"] = c.network.link_length;
    n["speed_limit"] = c.network.speed_limit;
    n["rv_controlled"] = c.network.rv_controlled ? nlohmann::ordered_json(*c.network.rv_controlled) : nullptr;
    n["control_zone_radius"] = c.network.control_zone_radius;
    n["signal_plan"] = {{"green_ns", c.network.signal_plan.green_ns},
                        {"green_ew", c.network.signal_plan.green_ew},
                        {"yellow", c.network.signal_plan.yellow},
                        {"offset", c.network.signal_plan.offset}};
    auto& d = j["demand"];
    d["experiments"] = c.demand.experiments;
    if (c.demand.custom_weights) {
        nlohmann::ordered_json w;
        for (OdPair od : kAllOdPairs) w[std::string(to_string(od))] = (*c.demand.custom_weights)[static_cast<std::size_t>(od)];
        d["custom_weights"] = w;
    } else {
        d["custom_weights"] = nullptr;
    }
    d["total_vehicles"] = c.demand.total_vehicles;
    d["horizon"] = c.demand.horizon;
    d["penetrations"] = c.demand.penetrations;
    d["departure_window"] = c.demand.departure_window;
    j["train"] = rainbow::train_config_to_json(c.train);
    j["train"].erase("seed");
    j["reward"] = {{"beta", c.reward.beta}, {"tau_scale", c.reward.tau_scale}};
    auto& s = j["sim"];
    s["dt"] = c.sim.dt;
    s["waiting_speed_threshold"] = c.sim.waiting_speed_threshold;
    s["box_speed_cap"] = c.sim.box_speed_cap;
    s["box_length_straight"] = c.sim.box_length_straight;
    s["box_length_right"] = c.sim.box_length_right;
    s["box_length_left"] = c.sim.box_length_left;
    s["gap_acceptance_distance"] = c.sim.gap_acceptance_distance;
    s["idm"] = {{"desired_speed", c.sim.idm.desired_speed},     {"time_headway", c.sim.idm.time_headway},
                {"min_gap", c.sim.idm.min_gap},                 {"max_accel", c.sim.idm.max_accel},
                {"comfortable_decel", c.sim.idm.comfortable_decel}, {"exponent", c.sim.idm.exponent},
                {"vehicle_length", c.sim.idm.vehicle_length},   {"emergency_decel", c.sim.idm.emergency_decel}};
    j["evaluation"] = {{"runs", c.evaluation.runs},
                       {"seed_base", c.evaluation.seed_base},
                       {"workers", c.evaluation.workers},
                       {"greedy", c.evaluation.greedy}};
    j["output_dir"] = c.output_dir;
    j["seed"] = c.seed;
    return j;
}

}  // namespace mtc
