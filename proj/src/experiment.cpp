#include "mtc/experiment.hpp"

#include "mtc/errors.hpp"
#include "mtc/format.hpp"
#include "mtc/rainbow/learner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <random>
#include <thread>

namespace mtc {

std::vector<float> encode_observation(const Observation& obs, const RewardConfig& reward) {
    std::vector<float> out(Observation::kSize);
    for (std::size_t d = 0; d < 4; ++d) {
        out[2 * d] = static_cast<float>(obs.queue[d] / kQueueFeatureScale);
        out[2 * d + 1] = static_cast<float>(obs.mean_wait[d] / reward.tau_scale);
        out[8 + d] = static_cast<float>(obs.occupied[d]);
    }
    return out;
}

std::shared_ptr<const RoadNetwork> build_network(const ExperimentConfig& cfg, bool baseline) {
    const PresetInfo preset = resolve_preset(cfg.network.preset);
    std::set<int> rv_ids = cfg.network.rv_controlled.value_or(preset.default_rv_ids);
    if (baseline) rv_ids.clear();
    GridOptions options;
    options.speed_limit = cfg.network.speed_limit;
    options.control_zone_radius = cfg.network.control_zone_radius;
    return std::make_shared<const RoadNetwork>(
        build_grid(preset.rows, preset.cols, cfg.network.link_length, rv_ids, cfg.network.signal_plan, options));
}

std::vector<SpawnEvent> make_schedule(const ExperimentConfig& cfg, const RoadNetwork& net, int experiment_id,
                                      double penetration, std::uint64_t seed) {
    DemandConfig d;
    d.total_vehicles = cfg.demand.total_vehicles;
    d.horizon = cfg.demand.horizon;
    d.penetration = penetration;
    d.seed = seed;
    d.departure_window = cfg.demand.departure_window;
    return generate_spawn_schedule(d, pattern_for(cfg, experiment_id), net);
}

namespace {

EnvConfig env_config(const ExperimentConfig& cfg) {
    EnvConfig e;
    e.sim = cfg.sim;
    e.reward = cfg.reward;
    e.horizon = cfg.demand.horizon;
    return e;
}

std::string penetration_tag(double p) {
    std::string s = format_double(p);
    std::replace(s.begin(), s.end(), '.', '_');
    return s;
}

}  // namespace

TrafficTrainingEnv::TrafficTrainingEnv(const ExperimentConfig& cfg, int experiment_id, double penetration)
    : cfg_(cfg),
      experiment_id_(experiment_id),
      penetration_(penetration),
      network_(build_network(cfg, false)),
      env_(network_, env_config(cfg)) {}

std::size_t TrafficTrainingEnv::max_episode_steps() const {
    return static_cast<std::size_t>(std::ceil(cfg_.demand.horizon / cfg_.sim.dt));
}

void TrafficTrainingEnv::reset(std::uint64_t episode_seed) {
    env_.reset(make_schedule(cfg_, *network_, experiment_id_, penetration_, episode_seed), episode_seed);
}

std::map<int, std::vector<float>> TrafficTrainingEnv::observations() const {
    std::map<int, std::vector<float>> out;
    for (const auto& [id, obs] : env_.observations()) out.emplace(id, encode_observation(obs, cfg_.reward));
    return out;
}

bool TrafficTrainingEnv::step(const std::map<int, Action>& actions, std::vector<rainbow::EnvTransition>& out) {
    const auto result = env_.step(actions);
    for (const auto& [id, s] : result.steps) {
        out.push_back(rainbow::EnvTransition{id, encode_observation(s.observation, cfg_.reward), s.action, s.reward,
                                             encode_observation(s.next_observation, cfg_.reward), s.done});
    }
    return result.episode_done;
}

EpisodeOutcome run_episode(const ExperimentConfig& cfg, std::shared_ptr<const RoadNetwork> network,
                           int experiment_id, double penetration, std::uint64_t seed,
                           const rainbow::DuelingNetwork<float>* policy, PolicyKind kind, std::ostream* trace) {
    TrafficEnv env(network, env_config(cfg));
    env.reset(make_schedule(cfg, *network, experiment_id, penetration, seed), seed);
    if (trace) {
        Simulator::write_trace_header(*trace);
        env.simulator().set_trace(trace);
    }
    const rainbow::Support support = cfg.train.support();
    std::mt19937_64 rng(rainbow::derive_seed(seed, 0x5EED));
    std::uniform_int_distribution<int> coin(0, 1);
    EpisodeOutcome outcome;
    while (!env.episode_done()) {
        std::map<int, Action> actions;
        const auto& obs = env.observations();
        if (!obs.empty()) {
            outcome.policy_queries += obs.size();
            if (kind == PolicyKind::Random) {
                for (const auto& [id, o] : obs) actions.emplace(id, coin(rng) ? Action::Stop : Action::Go);
            } else {
                if (!policy) throw ContractViolation("greedy evaluation needs a policy network");
                std::map<int, std::vector<float>> encoded;
                for (const auto& [id, o] : obs) encoded.emplace(id, encode_observation(o, cfg.reward));
                actions = rainbow::greedy_actions(*policy, encoded, support);
            }
        }
        env.step(actions);
    }
    env.simulator().set_trace(nullptr);
    outcome.metrics = collect_metrics(env.simulator());
    return outcome;
}

std::vector<ReportRow> evaluate(const ExperimentConfig& cfg, const EvalRequest& request,
                                const rainbow::DuelingNetwork<float>* policy, std::size_t* policy_queries) {
    if (request.runs < 1) throw ConfigError("evaluation.runs: must be >= 1");
    const bool baseline = !request.penetration.has_value();
    const auto network = build_network(cfg, baseline);
    const double penetration = baseline ? request.baseline_penetration : *request.penetration;
    const auto runs = static_cast<std::size_t>(request.runs);

    std::vector<ReportRow> rows(runs);
    std::vector<std::size_t> queries(runs, 0);
    std::vector<std::exception_ptr> errors(runs);
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t k = next++; k < runs; k = next++) {
            try {
                const std::uint64_t seed = request.seed_base + k;
                std::ofstream trace_file;
                if (k == 0 && request.trace) {
                    if (request.trace->has_parent_path()) std::filesystem::create_directories(request.trace->parent_path());
                    trace_file.open(*request.trace, std::ios::binary | std::ios::trunc);
                    if (!trace_file) throw IoError("cannot write " + request.trace->string());
                }
                const EpisodeOutcome out = run_episode(cfg, network, request.experiment_id, penetration, seed, policy,
                                                       request.kind, trace_file.is_open() ? &trace_file : nullptr);
                ReportRow row;
                row.experiment_id = request.experiment_id;
                row.od_label = label_for(cfg, request.experiment_id);
                row.penetration = request.penetration;
                row.seed = seed;
                row.w_bar_s = out.metrics.average_waiting_time().seconds;
                row.conflicts = out.metrics.conflicts();
                row.throughput = out.metrics.throughput();
                row.spawned = out.metrics.spawned();
                row.episodes = request.episodes_trained;
                rows[k] = row;
                queries[k] = out.policy_queries;
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };

    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers =
        std::min(runs, cfg.evaluation.workers > 0 ? static_cast<std::size_t>(cfg.evaluation.workers) : hw);
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    if (policy_queries) {
        *policy_queries = 0;
        for (std::size_t q : queries) *policy_queries += q;
    }
    return rows;
}

std::filesystem::path checkpoint_path(const ExperimentConfig& cfg, int experiment_id, double penetration) {
    return std::filesystem::path(cfg.output_dir) / "checkpoints" /
           ("exp" + std::to_string(experiment_id) + "_p" + penetration_tag(penetration) + ".ckpt");
}

std::filesystem::path train_log_path(const ExperimentConfig& cfg, int experiment_id, double penetration) {
    return std::filesystem::path(cfg.output_dir) / "logs" /
           ("exp" + std::to_string(experiment_id) + "_p" + penetration_tag(penetration) + "_train.csv");
}

void write_config_echo(const ExperimentConfig& cfg, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << config_to_json(cfg).dump(2) << '\n';
}

TrainOutcome train_configuration(const ExperimentConfig& cfg, int experiment_id, double penetration) {
    TrafficTrainingEnv env(cfg, experiment_id, penetration);
    rainbow::TrainHooks hooks;
    if (cfg.train.eval_interval > 0) {
        hooks.evaluate = [&](const rainbow::DuelingNetwork<float>& net) {
            EvalRequest req;
            req.experiment_id = experiment_id;
            req.penetration = penetration;
            req.runs = std::min(cfg.evaluation.runs, 5);
            req.seed_base = cfg.evaluation.seed_base;
            const auto rows = evaluate(cfg, req, &net);
            double sum = 0.0;
            for (const auto& r : rows) sum += r.w_bar_s;
            return sum / static_cast<double>(rows.size());
        };
    }
    const auto result = rainbow::train(env, cfg.train, hooks);
    TrainOutcome out;
    out.checkpoint = checkpoint_path(cfg, experiment_id, penetration);
    out.log = train_log_path(cfg, experiment_id, penetration);
    out.diverged = result.diverged;
    rainbow::save_checkpoint(rainbow::make_checkpoint(result, cfg.train), out.checkpoint);
    rainbow::write_train_log(result.log, out.log);
    return out;
}

rainbow::DuelingNetwork<float> load_policy(const std::filesystem::path& path) {
    const rainbow::Checkpoint ckpt = rainbow::load_checkpoint(path);
    if (ckpt.shape.input_dim != Observation::kSize || ckpt.shape.num_actions != kNumActions) {
        throw CheckpointError(path.string() + ": network shape does not match the 12-feature, 2-action interface");
    }
    return ckpt.network();
}

std::vector<ReportRow> run_sweep(const ExperimentConfig& cfg, bool train_missing, std::ostream* progress) {
    const auto experiments = configured_experiments(cfg);
    std::vector<std::string> missing;
    for (int e : experiments) {
        for (double p : cfg.demand.penetrations) {
            const auto path = checkpoint_path(cfg, e, p);
            if (!std::filesystem::exists(path)) missing.push_back("experiment " + std::to_string(e) + " penetration " +
                                                                  format_double(p) + " (" + path.string() + ")");
        }
    }
    if (!missing.empty() && !train_missing) {
        std::string msg = "missing checkpoints; run `mtc train` for each or pass --train-missing:";
        for (const auto& m : missing) msg += "\n  " + m;
        throw CheckpointError(msg);
    }

    std::vector<ReportRow> rows;
    const PolicyKind kind = cfg.evaluation.greedy ? PolicyKind::Greedy : PolicyKind::Random;
    for (int e : experiments) {
        for (double p : cfg.demand.penetrations) {
            const auto path = checkpoint_path(cfg, e, p);
            if (!std::filesystem::exists(path)) {
                if (progress) *progress << "training experiment " << e << " penetration " << format_double(p) << '\n';
                const TrainOutcome t = train_configuration(cfg, e, p);
                if (t.diverged) throw NumericalError("training diverged for experiment " + std::to_string(e));
            }
            const auto policy = load_policy(path);
            EvalRequest req;
            req.experiment_id = e;
            req.penetration = p;
            req.runs = cfg.evaluation.runs;
            req.seed_base = cfg.evaluation.seed_base;
            req.kind = kind;
            req.episodes_trained = cfg.train.episodes;
            if (progress) *progress << "evaluating experiment " << e << " penetration " << format_double(p) << '\n';
            const auto part = evaluate(cfg, req, &policy);
            rows.insert(rows.end(), part.begin(), part.end());
        }
        EvalRequest base;
        base.experiment_id = e;
        base.runs = cfg.evaluation.runs;
        base.seed_base = cfg.evaluation.seed_base;
        if (progress) *progress << "evaluating experiment " << e << " baseline\n";
        const auto part = evaluate(cfg, base, nullptr);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    return rows;
}

}  // namespace mtc
