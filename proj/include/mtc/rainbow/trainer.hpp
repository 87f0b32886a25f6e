#pragma once

#include "mtc/rainbow/adam.hpp"
#include "mtc/rainbow/categorical.hpp"
#include "mtc/rainbow/network.hpp"
#include "mtc/sim.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <vector>

namespace mtc::rainbow {

struct TrainConfig {
    int episodes = 1000;
    std::size_t batch_size = 32;
    double gamma = 0.99;
    double learning_rate = 5e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::size_t buffer_capacity = 50000;
    double priority_alpha = 0.5;
    double priority_eta_start = 0.4;
    double priority_eta_end = 1.0;
    std::size_t target_sync_interval = 500;   // gradient steps
    std::size_t env_steps_per_update = 4;
    std::size_t learning_starts = 0;          // transitions stored before the first update
    double epsilon_start = 1.0;
    double epsilon_end = 0.02;
    double epsilon_decay_fraction = 0.3;      // of the expected gradient steps
    double v_min = -20.0;
    double v_max = 20.0;
    std::size_t atoms = 51;
    std::vector<std::size_t> hidden{512, 512, 512};
    double divergence_threshold = 1e3;
    std::size_t divergence_window = 100;
    int eval_interval = 0;                    // episodes; 0 disables periodic evaluation
    std::uint64_t seed = 0;

    void validate() const;
    Support support() const { return Support{v_min, v_max, atoms}; }
    NetShape shape(std::size_t input_dim) const { return NetShape{input_dim, hidden, kNumActions, atoms}; }
    AdamConfig adam() const { return AdamConfig{learning_rate, adam_beta1, adam_beta2, adam_epsilon}; }

    bool operator==(const TrainConfig&) const = default;
};

/// One agent decision as seen by the learner.
struct EnvTransition {
    int agent = 0;
    std::vector<float> observation;
    Action action = Action::Stop;
    double reward = 0.0;
    std::vector<float> next_observation;
    bool done = false;
};

/// Multi-agent environment with a shared policy. Agents appear and disappear
/// between steps; every listed agent must receive an action.
class TrainingEnv {
public:
    virtual ~TrainingEnv() = default;
    virtual std::size_t observation_size() const = 0;
    /// Upper bound on steps per episode, used to size the exploration schedule.
    virtual std::size_t max_episode_steps() const = 0;
    virtual void reset(std::uint64_t episode_seed) = 0;
    virtual std::map<int, std::vector<float>> observations() const = 0;
    /// Appends one transition per acting agent; returns true when the episode is over.
    virtual bool step(const std::map<int, Action>& actions, std::vector<EnvTransition>& out) = 0;
};

struct TrainLogRow {
    int episode = 0;
    std::size_t env_steps = 0;
    std::size_t gradient_steps = 0;
    double mean_return = 0.0;   // mean over agents of sum_k gamma^k r_k
    std::size_t agents = 0;
    double mean_loss = 0.0;     // mean over this episode's updates; 0 when none
    double epsilon = 0.0;
    std::size_t buffer_size = 0;
    std::optional<double> eval_w_bar;
};

struct TrainHooks {
    std::function<void(int episode, const EnvTransition&)> on_transition;
    /// Called every eval_interval episodes; the value lands in TrainLogRow::eval_w_bar.
    std::function<double(const DuelingNetwork<float>&)> evaluate;
};

struct TrainResult {
    DuelingNetwork<float> network;
    std::vector<TrainLogRow> log;
    std::uint64_t gradient_steps = 0;
    bool diverged = false;
};

/// Episode k uses derive_seed(seed, k).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Linear decay from epsilon_start to epsilon_end over the first
/// epsilon_decay_fraction of `total_gradient_steps`, constant afterwards.
double epsilon_at(const TrainConfig& cfg, std::uint64_t gradient_step, std::uint64_t total_gradient_steps);

/// Linear anneal of the importance-sampling exponent over `total_gradient_steps`.
double eta_at(const TrainConfig& cfg, std::uint64_t gradient_step, std::uint64_t total_gradient_steps);

/// Greedy actions for a set of agents from a single batched forward pass.
std::map<int, Action> greedy_actions(const DuelingNetwork<float>& net, const std::map<int, std::vector<float>>& obs,
                                     const Support& support);

/// Trains a shared policy. When the running mean |loss| over the last
/// divergence_window updates exceeds divergence_threshold, training stops and
/// the result is flagged `diverged`.
TrainResult train(TrainingEnv& env, const TrainConfig& cfg, const TrainHooks& hooks = {});

void write_train_log(const std::vector<TrainLogRow>& log, const std::filesystem::path& path);

}  // namespace mtc::rainbow
