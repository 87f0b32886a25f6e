#pragma once

#include "mtc/rainbow/network.hpp"
#include "mtc/rainbow/trainer.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mtc::rainbow {

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
    TrainConfig config;
    NetShape shape;
    std::uint64_t seed = 0;
    std::uint64_t gradient_steps = 0;
    ParamVector<float> parameters;

    DuelingNetwork<float> network() const;
};

Checkpoint make_checkpoint(const TrainResult& result, const TrainConfig& config);

/// Layout: 8-byte magic "MTCCKPT1", little-endian uint64 manifest length, JSON
/// manifest (format version, train config, layer shapes, seed, gradient steps),
/// then every parameter as a little-endian float32 in manifest order.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Throws CheckpointError on a missing, truncated or inconsistent file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg);

/// Strict: unknown keys and type mismatches throw ConfigError naming `where`.key.
/// Missing keys keep their values from `base`.
TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& where, TrainConfig base = {});

}  // namespace mtc::rainbow
