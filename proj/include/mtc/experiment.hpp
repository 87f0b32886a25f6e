#pragma once

#include "mtc/config.hpp"
#include "mtc/env.hpp"
#include "mtc/metrics.hpp"
#include "mtc/rainbow/checkpoint.hpp"
#include "mtc/rainbow/trainer.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <vector>

namespace mtc {

/// Network input features: queue counts divided by this value.
inline constexpr double kQueueFeatureScale = 5.0;

/// (q_d / 5, tau_d / tau_scale) per approach, then the occupancy flags.
std::vector<float> encode_observation(const Observation& obs, const RewardConfig& reward);

/// RV-controlled network for the config, or the all-signalized variant when `baseline`.
std::shared_ptr<const RoadNetwork> build_network(const ExperimentConfig& cfg, bool baseline);

std::vector<SpawnEvent> make_schedule(const ExperimentConfig& cfg, const RoadNetwork& net, int experiment_id,
                                      double penetration, std::uint64_t seed);

/// TrafficEnv seen through the learner interface. An agent's transition is
/// terminal once it enters the junction box; the horizon truncates without
/// marking transitions terminal.
class TrafficTrainingEnv : public rainbow::TrainingEnv {
public:
    TrafficTrainingEnv(const ExperimentConfig& cfg, int experiment_id, double penetration);

    std::size_t observation_size() const override { return Observation::kSize; }
    std::size_t max_episode_steps() const override;
    void reset(std::uint64_t episode_seed) override;
    std::map<int, std::vector<float>> observations() const override;
    bool step(const std::map<int, Action>& actions, std::vector<rainbow::EnvTransition>& out) override;

    const TrafficEnv& env() const { return env_; }

private:
    ExperimentConfig cfg_;
    int experiment_id_;
    double penetration_;
    std::shared_ptr<const RoadNetwork> network_;
    TrafficEnv env_;
};

enum class PolicyKind { Greedy, Random };

struct EpisodeOutcome {
    MetricsAccumulator metrics;
    std::size_t policy_queries = 0;
};

/// One evaluation episode. `policy` may be null for the baseline network,
/// which has no agents; RV-controlled networks require it for Greedy.
EpisodeOutcome run_episode(const ExperimentConfig& cfg, std::shared_ptr<const RoadNetwork> network,
                           int experiment_id, double penetration, std::uint64_t seed,
                           const rainbow::DuelingNetwork<float>* policy, PolicyKind kind, std::ostream* trace = nullptr);

struct EvalRequest {
    int experiment_id = 1;
    std::optional<double> penetration;  // nullopt = all-signalized baseline
    /// Demand penetration used by the baseline (classes do not affect signal control).
    double baseline_penetration = 0.0;
    int runs = 1;
    std::uint64_t seed_base = 1000;
    PolicyKind kind = PolicyKind::Greedy;
    int episodes_trained = 0;
    std::optional<std::filesystem::path> trace;  // per-step CSV of the first run
};

/// Runs seed_base + k for k < runs across evaluation workers. Rows come back in run order.
std::vector<ReportRow> evaluate(const ExperimentConfig& cfg, const EvalRequest& request,
                                const rainbow::DuelingNetwork<float>* policy, std::size_t* policy_queries = nullptr);

std::filesystem::path checkpoint_path(const ExperimentConfig& cfg, int experiment_id, double penetration);
std::filesystem::path train_log_path(const ExperimentConfig& cfg, int experiment_id, double penetration);

/// Writes the resolved config beside the outputs.
void write_config_echo(const ExperimentConfig& cfg, const std::filesystem::path& path);

struct TrainOutcome {
    std::filesystem::path checkpoint;
    std::filesystem::path log;
    bool diverged = false;
};

/// Trains one (experiment, penetration) configuration and writes its
/// checkpoint and log. A diverged run still writes both.
TrainOutcome train_configuration(const ExperimentConfig& cfg, int experiment_id, double penetration);

/// Loads a checkpoint and checks it fits the 12-feature, 2-action interface.
rainbow::DuelingNetwork<float> load_policy(const std::filesystem::path& path);

/// Every configured experiment x penetration plus a baseline column. Missing
/// checkpoints are trained when `train_missing`, else CheckpointError lists them.
std::vector<ReportRow> run_sweep(const ExperimentConfig& cfg, bool train_missing, std::ostream* progress = nullptr);

}  // namespace mtc
