#include "mtc/rainbow/trainer.hpp"

#include "mtc/errors.hpp"
#include "mtc/format.hpp"
#include "mtc/rainbow/learner.hpp"
#include "mtc/rainbow/replay.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <random>

namespace mtc::rainbow {

void TrainConfig::validate() const {
    if (episodes < 0) throw ConfigError("train.episodes must be >= 0");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("train.gamma must be in (0, 1]");
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw ConfigError("train.adam betas must be in [0, 1)");
    }
    if (!(adam_epsilon > 0.0)) throw ConfigError("train.adam_epsilon must be > 0");
    if (buffer_capacity < batch_size) throw ConfigError("train.buffer_capacity must be >= batch_size");
    if (!(priority_alpha >= 0.0)) throw ConfigError("train.priority_alpha must be >= 0");
    if (!(priority_eta_start >= 0.0 && priority_eta_end >= 0.0)) throw ConfigError("train.priority_eta must be >= 0");
    if (target_sync_interval < 1) throw ConfigError("train.target_sync_interval must be >= 1");
    if (env_steps_per_update < 1) throw ConfigError("train.env_steps_per_update must be >= 1");
    if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 && epsilon_end <= 1.0)) {
        throw ConfigError("train.epsilon values must be in [0, 1]");
    }
    if (!(epsilon_decay_fraction > 0.0 && epsilon_decay_fraction <= 1.0)) {
        throw ConfigError("train.epsilon_decay_fraction must be in (0, 1]");
    }
    support().validate();
    if (hidden.empty()) throw ConfigError("train.hidden must list at least one layer");
    for (std::size_t h : hidden) {
        if (h == 0) throw ConfigError("train.hidden widths must be > 0");
    }
    if (!(divergence_threshold > 0.0)) throw ConfigError("train.divergence_threshold must be > 0");
    if (divergence_window < 1) throw ConfigError("train.divergence_window must be >= 1");
    if (eval_interval < 0) throw ConfigError("train.eval_interval must be >= 0");
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    // splitmix64 finalizer over the combined value
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double epsilon_at(const TrainConfig& cfg, std::uint64_t gradient_step, std::uint64_t total_gradient_steps) {
    const double horizon = std::max(1.0, cfg.epsilon_decay_fraction * static_cast<double>(total_gradient_steps));
    const double frac = std::min(1.0, static_cast<double>(gradient_step) / horizon);
    return cfg.epsilon_start + frac * (cfg.epsilon_end - cfg.epsilon_start);
}

double eta_at(const TrainConfig& cfg, std::uint64_t gradient_step, std::uint64_t total_gradient_steps) {
    const double frac =
        std::min(1.0, static_cast<double>(gradient_step) / std::max<double>(1.0, static_cast<double>(total_gradient_steps)));
    return cfg.priority_eta_start + frac * (cfg.priority_eta_end - cfg.priority_eta_start);
}

std::map<int, Action> greedy_actions(const DuelingNetwork<float>& net, const std::map<int, std::vector<float>>& obs,
                                     const Support& support) {
    std::map<int, Action> out;
    if (obs.empty()) return out;
    std::vector<const std::vector<float>*> rows;
    for (const auto& [id, o] : obs) rows.push_back(&o);
    const auto probs = net.forward(stack_columns<float>(rows, net.shape().input_dim));
    Eigen::Index col = 0;
    for (const auto& [id, o] : obs) out.emplace(id, greedy_action(q_values<float>(probs, col++, support)));
    return out;
}

TrainResult train(TrainingEnv& env, const TrainConfig& cfg, const TrainHooks& hooks) {
    cfg.validate();
    const Support support = cfg.support();
    TrainResult result{DuelingNetwork<float>(cfg.shape(env.observation_size())), {}, 0, false};
    DuelingNetwork<float>& online = result.network;
    online.initialize(cfg.seed);
    DuelingNetwork<float> target = online;
    Adam<float> adam(online.parameter_count(), cfg.adam());
    PrioritizedReplay buffer(cfg.buffer_capacity, cfg.priority_alpha);
    std::mt19937_64 rng(derive_seed(cfg.seed, 0xACDC));

    const std::uint64_t expected_updates = std::max<std::uint64_t>(
        1, static_cast<std::uint64_t>(cfg.episodes) * env.max_episode_steps() / cfg.env_steps_per_update);
    const std::size_t warmup = std::max(cfg.learning_starts, cfg.batch_size);
    std::uint64_t env_steps = 0;
    std::uint64_t& grad_steps = result.gradient_steps;
    std::deque<double> recent_losses;
    double recent_sum = 0.0;

    std::vector<EnvTransition> transitions;
    for (int episode = 0; episode < cfg.episodes && !result.diverged; ++episode) {
        env.reset(derive_seed(cfg.seed, static_cast<std::uint64_t>(episode) + 1));
        std::map<int, std::pair<double, double>> returns;  // agent -> (sum, discount)
        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        std::size_t episode_steps = 0;
        double epsilon = epsilon_at(cfg, grad_steps, expected_updates);

        bool done = false;
        while (!done && !result.diverged) {
            const auto obs = env.observations();
            epsilon = epsilon_at(cfg, grad_steps, expected_updates);
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            std::map<int, Action> actions;
            std::map<int, std::vector<float>> greedy_obs;
            for (const auto& [id, o] : obs) {
                if (unit(rng) < epsilon) {
                    actions.emplace(id, unit(rng) < 0.5 ? Action::Go : Action::Stop);
                } else {
                    greedy_obs.emplace(id, o);
                }
            }
            for (const auto& [id, a] : greedy_actions(online, greedy_obs, support)) actions.emplace(id, a);

            transitions.clear();
            done = env.step(actions, transitions);
            ++env_steps;
            ++episode_steps;
            for (EnvTransition& t : transitions) {
                if (hooks.on_transition) hooks.on_transition(episode, t);
                auto& [sum, discount] = returns.try_emplace(t.agent, 0.0, 1.0).first->second;
                sum += discount * t.reward;
                discount *= cfg.gamma;
                buffer.push(Transition{std::move(t.observation), t.action, t.reward, std::move(t.next_observation), t.done});
            }

            if (env_steps % cfg.env_steps_per_update != 0 || buffer.size() < warmup) continue;
            const auto sample = buffer.sample(cfg.batch_size, eta_at(cfg, grad_steps, expected_updates), rng);
            std::vector<const Transition*> batch;
            for (std::size_t i : sample.indices) batch.push_back(&buffer.at(i));
            const auto loss = loss_and_gradient(online, target, batch, sample.is_weights, cfg.gamma, support);
            adam.step(online.parameters(), loss.grad);
            buffer.update(sample.indices, loss.priorities);
            ++grad_steps;
            if (grad_steps % cfg.target_sync_interval == 0) target = online;

            loss_sum += loss.loss;
            ++loss_count;
            recent_losses.push_back(std::abs(loss.loss));
            recent_sum += std::abs(loss.loss);
            if (recent_losses.size() > cfg.divergence_window) {
                recent_sum -= recent_losses.front();
                recent_losses.pop_front();
            }
            if (recent_sum / static_cast<double>(recent_losses.size()) > cfg.divergence_threshold) result.diverged = true;
        }

        TrainLogRow row;
        row.episode = episode;
        row.env_steps = episode_steps;
        row.gradient_steps = grad_steps;
        row.agents = returns.size();
        double total = 0.0;
        for (const auto& [id, r] : returns) total += r.first;
        row.mean_return = returns.empty() ? 0.0 : total / static_cast<double>(returns.size());
        row.mean_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
        row.epsilon = epsilon;
        row.buffer_size = buffer.size();
        if (hooks.evaluate && cfg.eval_interval > 0 && (episode + 1) % cfg.eval_interval == 0) {
            row.eval_w_bar = hooks.evaluate(online);
        }
        result.log.push_back(row);
    }
    return result;
}

void write_train_log(const std::vector<TrainLogRow>& log, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "episode,steps,gradient_steps,agents,mean_return,mean_loss,epsilon,buffer_size,eval_w_bar\n";
    for (const TrainLogRow& r : log) {
        out << r.episode << ',' << r.env_steps << ',' << r.gradient_steps << ',' << r.agents << ','
            << format_double(r.mean_return) << ',' << format_double(r.mean_loss) << ',' << format_double(r.epsilon)
            << ',' << r.buffer_size << ',' << (r.eval_w_bar ? format_double(*r.eval_w_bar) : "") << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace mtc::rainbow
