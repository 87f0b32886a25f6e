#include "mtc/rainbow/checkpoint.hpp"

#include "mtc/errors.hpp"
#include "mtc/json_reader.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace mtc::rainbow {

namespace {

constexpr std::array<char, 8> kMagic{'M', 'T', 'C', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
    std::array<char, 8> b{};
    for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(b.data(), 8);
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

}  // namespace

DuelingNetwork<float> Checkpoint::network() const {
    DuelingNetwork<float> net(shape);
    if (net.parameter_count() != parameters.size()) throw CheckpointError("checkpoint parameter count mismatch");
    net.parameters() = parameters;
    return net;
}

Checkpoint make_checkpoint(const TrainResult& result, const TrainConfig& config) {
    Checkpoint c;
    c.config = config;
    c.shape = result.network.shape();
    c.seed = config.seed;
    c.gradient_steps = result.gradient_steps;
    c.parameters = result.network.parameters();
    return c;
}

nlohmann::ordered_json train_config_to_json(const TrainConfig& c) {
    nlohmann::ordered_json j;
    j["episodes"] = c.episodes;
    j["batch_size"] = c.batch_size;
    j["gamma"] = c.gamma;
    j["learning_rate"] = c.learning_rate;
    j["adam_beta1"] = c.adam_beta1;
    j["adam_beta2"] = c.adam_beta2;
    j["adam_epsilon"] = c.adam_epsilon;
    j["buffer_capacity"] = c.buffer_capacity;
    j["priority_alpha"] = c.priority_alpha;
    j["priority_eta_start"] = c.priority_eta_start;
    j["priority_eta_end"] = c.priority_eta_end;
    j["target_sync_interval"] = c.target_sync_interval;
    j["env_steps_per_update"] = c.env_steps_per_update;
    j["learning_starts"] = c.learning_starts;
    j["epsilon_start"] = c.epsilon_start;
    j["epsilon_end"] = c.epsilon_end;
    j["epsilon_decay_fraction"] = c.epsilon_decay_fraction;
    j["v_min"] = c.v_min;
    j["v_max"] = c.v_max;
    j["atoms"] = c.atoms;
    j["hidden"] = c.hidden;
    j["divergence_threshold"] = c.divergence_threshold;
    j["divergence_window"] = c.divergence_window;
    j["eval_interval"] = c.eval_interval;
    j["seed"] = c.seed;
    return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& where, TrainConfig c) {
    JsonReader r(j, where);
    r.get("episodes", c.episodes);
    r.get("batch_size", c.batch_size);
    r.get("gamma", c.gamma);
    r.get("learning_rate", c.learning_rate);
    r.get("adam_beta1", c.adam_beta1);
    r.get("adam_beta2", c.adam_beta2);
    r.get("adam_epsilon", c.adam_epsilon);
    r.get("buffer_capacity", c.buffer_capacity);
    r.get("priority_alpha", c.priority_alpha);
    r.get("priority_eta_start", c.priority_eta_start);
    r.get("priority_eta_end", c.priority_eta_end);
    r.get("target_sync_interval", c.target_sync_interval);
    r.get("env_steps_per_update", c.env_steps_per_update);
    r.get("learning_starts", c.learning_starts);
    r.get("epsilon_start", c.epsilon_start);
    r.get("epsilon_end", c.epsilon_end);
    r.get("epsilon_decay_fraction", c.epsilon_decay_fraction);
    r.get("v_min", c.v_min);
    r.get("v_max", c.v_max);
    r.get("atoms", c.atoms);
    r.get("hidden", c.hidden);
    r.get("divergence_threshold", c.divergence_threshold);
    r.get("divergence_window", c.divergence_window);
    r.get("eval_interval", c.eval_interval);
    r.get("seed", c.seed);
    r.finish();
    return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    nlohmann::ordered_json manifest;
    manifest["format_version"] = kCheckpointFormatVersion;
    manifest["train_config"] = train_config_to_json(ckpt.config);
    manifest["input_dim"] = ckpt.shape.input_dim;
    manifest["num_actions"] = ckpt.shape.num_actions;
    manifest["num_atoms"] = ckpt.shape.num_atoms;
    auto& layers = manifest["layers"] = nlohmann::ordered_json::array();
    for (const LayerShape& l : ckpt.shape.layers()) layers.push_back({{"name", l.name}, {"shape", {l.rows, l.cols}}});
    manifest["seed"] = ckpt.seed;
    manifest["gradient_steps"] = ckpt.gradient_steps;
    const std::string text = manifest.dump();

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(kMagic.data(), kMagic.size());
    put_u64(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (float f : ckpt.parameters) {
        const auto bits = std::bit_cast<std::uint32_t>(f);
        const std::array<char, 4> b{static_cast<char>(bits & 0xFF), static_cast<char>((bits >> 8) & 0xFF),
                                    static_cast<char>((bits >> 16) & 0xFF), static_cast<char>((bits >> 24) & 0xFF)};
        out.write(b.data(), 4);
    }
    if (!out) throw IoError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("checkpoint not found: " + path.string());
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
        throw CheckpointError(path.string() + ": not a checkpoint file");
    }
    const std::uint64_t manifest_len = get_u64(bytes.data() + 8);
    if (manifest_len > bytes.size() - 16) throw CheckpointError(path.string() + ": truncated manifest");

    Checkpoint c;
    try {
        const auto manifest = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(manifest_len));
        if (manifest.at("format_version").get<int>() != kCheckpointFormatVersion) {
            throw CheckpointError(path.string() + ": unsupported format version");
        }
        c.config = train_config_from_json(manifest.at("train_config"), "train_config");
        c.shape.input_dim = manifest.at("input_dim").get<std::size_t>();
        c.shape.num_actions = manifest.at("num_actions").get<std::size_t>();
        c.shape.num_atoms = manifest.at("num_atoms").get<std::size_t>();
        c.shape.hidden = c.config.hidden;
        c.seed = manifest.at("seed").get<std::uint64_t>();
        c.gradient_steps = manifest.at("gradient_steps").get<std::uint64_t>();
        const auto expected = c.shape.layers();
        const auto& layers = manifest.at("layers");
        if (layers.size() != expected.size()) throw CheckpointError(path.string() + ": layer list mismatch");
        for (std::size_t i = 0; i < expected.size(); ++i) {
            if (layers[i].at("name").get<std::string>() != expected[i].name ||
                layers[i].at("shape").at(0).get<std::size_t>() != expected[i].rows ||
                layers[i].at("shape").at(1).get<std::size_t>() != expected[i].cols) {
                throw CheckpointError(path.string() + ": layer " + expected[i].name + " shape mismatch");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(path.string() + ": bad manifest: " + e.what());
    } catch (const ConfigError& e) {
        throw CheckpointError(path.string() + ": bad manifest: " + e.what());
    }

    const std::size_t count = c.shape.parameter_count();
    const std::size_t offset = 16 + manifest_len;
    if (bytes.size() - offset != 4 * count) {
        throw CheckpointError(path.string() + ": expected " + std::to_string(count) + " parameters");
    }
    c.parameters.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const unsigned char* p = bytes.data() + offset + 4 * i;
        const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                                   (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
        c.parameters[i] = std::bit_cast<float>(bits);
    }
    return c;
}

}  // namespace mtc::rainbow
