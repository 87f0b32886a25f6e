// mtc: train, evaluate and sweep mixed-traffic intersection controllers.

#include "mtc/config.hpp"
#include "mtc/errors.hpp"
#include "mtc/experiment.hpp"
#include "mtc/format.hpp"
#include "mtc/metrics.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> runs;
    std::vector<int> experiments;
    std::optional<double> penetration;
    std::optional<std::string> trace;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_runs) {
    cmd->add_option("--config", o.config, "JSON experiment config (built-in desk defaults when omitted)");
    cmd->add_option("--seed", o.seed, "Training seed override");
    cmd->add_option("--out", o.out, "Output directory override");
    cmd->add_option("--experiment", o.experiments, "Experiment id(s) 1-8, or 0 for custom weights");
    cmd->add_option("--penetration", o.penetration, "RV penetration rate in [0, 1]");
    if (with_runs) {
        cmd->add_option("--runs", o.runs, "Evaluation runs");
        cmd->add_option("--trace", o.trace, "Per-step CSV trace of the first evaluation run");
    }
}

mtc::ExperimentConfig resolve(const CommonOptions& o) {
    mtc::ExperimentConfig cfg = o.config.empty() ? mtc::parse_config(nlohmann::json::object()) : mtc::load_config(o.config);
    if (o.seed) {
        cfg.seed = *o.seed;
        cfg.train.seed = *o.seed;
    }
    if (o.out) cfg.output_dir = *o.out;
    if (o.runs) cfg.evaluation.runs = *o.runs;
    if (!o.experiments.empty()) {
        if (cfg.demand.custom_weights) {
            for (int e : o.experiments) {
                if (e != 0) throw mtc::ConfigError("--experiment: config uses custom weights, only 0 is valid");
            }
        } else {
            cfg.demand.experiments = o.experiments;
        }
    }
    if (o.penetration) cfg.demand.penetrations = {*o.penetration};
    cfg.validate();
    return cfg;
}

void print_rows(const std::vector<mtc::ReportRow>& rows) {
    for (const auto& r : rows) {
        std::cout << "experiment " << r.experiment_id << " (" << r.od_label << ") "
                  << mtc::penetration_label(r.penetration) << " seed " << r.seed << ": W_bar "
                  << mtc::format_double(r.w_bar_s) << " s, conflicts " << r.conflicts << ", throughput "
                  << r.throughput << "/" << r.spawned << '\n';
    }
}

int cmd_train(const CommonOptions& o) {
    const auto cfg = resolve(o);
    const std::filesystem::path out(cfg.output_dir);
    mtc::write_config_echo(cfg, out / "config_echo.json");
    bool diverged = false;
    for (int e : mtc::configured_experiments(cfg)) {
        for (double p : cfg.demand.penetrations) {
            std::cout << "training experiment " << e << " penetration " << mtc::format_double(p) << std::endl;
            const auto t = mtc::train_configuration(cfg, e, p);
            std::cout << "  checkpoint " << t.checkpoint.string() << "\n  log " << t.log.string() << '\n';
            if (t.diverged) {
                std::cerr << "training diverged (running mean |loss| above threshold); checkpoint written\n";
                diverged = true;
            }
        }
    }
    return diverged ? 4 : 0;
}

int cmd_eval(const CommonOptions& o, const std::optional<std::string>& checkpoint, const std::string& policy) {
    const auto cfg = resolve(o);
    const std::filesystem::path out(cfg.output_dir);
    mtc::write_config_echo(cfg, out / "config_echo.json");
    const auto kind = policy == "random" ? mtc::PolicyKind::Random : mtc::PolicyKind::Greedy;
    std::vector<mtc::ReportRow> rows;
    for (int e : mtc::configured_experiments(cfg)) {
        for (double p : cfg.demand.penetrations) {
            std::optional<mtc::rainbow::DuelingNetwork<float>> net;
            if (kind == mtc::PolicyKind::Greedy) {
                net.emplace(mtc::load_policy(checkpoint ? std::filesystem::path(*checkpoint) : mtc::checkpoint_path(cfg, e, p)));
            }
            mtc::EvalRequest req;
            req.experiment_id = e;
            req.penetration = p;
            req.runs = cfg.evaluation.runs;
            req.seed_base = cfg.evaluation.seed_base;
            req.kind = kind;
            req.episodes_trained = kind == mtc::PolicyKind::Greedy ? cfg.train.episodes : 0;
            if (o.trace) req.trace = *o.trace;
            std::size_t queries = 0;
            const auto part = mtc::evaluate(cfg, req, net ? &*net : nullptr, &queries);
            rows.insert(rows.end(), part.begin(), part.end());
            std::cout << "experiment " << e << " penetration " << mtc::format_double(p) << ": " << queries
                      << " policy queries\n";
        }
    }
    print_rows(rows);
    mtc::write_report(rows, out / "eval_report.csv");
    return 0;
}

int cmd_baseline(const CommonOptions& o) {
    const auto cfg = resolve(o);
    const std::filesystem::path out(cfg.output_dir);
    mtc::write_config_echo(cfg, out / "config_echo.json");
    std::vector<mtc::ReportRow> rows;
    for (int e : mtc::configured_experiments(cfg)) {
        mtc::EvalRequest req;
        req.experiment_id = e;
        req.baseline_penetration = o.penetration.value_or(0.0);
        req.runs = cfg.evaluation.runs;
        req.seed_base = cfg.evaluation.seed_base;
        if (o.trace) req.trace = *o.trace;
        std::size_t queries = 0;
        const auto part = mtc::evaluate(cfg, req, nullptr, &queries);
        rows.insert(rows.end(), part.begin(), part.end());
        std::cout << "experiment " << e << " baseline: " << queries << " policy queries\n";
    }
    print_rows(rows);
    mtc::write_report(rows, out / "baseline_report.csv");
    return 0;
}

int cmd_sweep(const CommonOptions& o, bool train_missing) {
    const auto cfg = resolve(o);
    const std::filesystem::path out(cfg.output_dir);
    mtc::write_config_echo(cfg, out / "config_echo.json");
    const auto rows = mtc::run_sweep(cfg, train_missing, &std::cout);
    mtc::write_report(rows, out / "sweep_report.csv");
    const auto table = mtc::summarize(rows);
    std::cout << "summary (" << table.experiments.size() << " x " << table.columns.size() << ", "
              << table.filled_cells() << " cells) written to " << (out / "sweep_report_summary.csv").string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mixed-traffic intersection control: simulation, training and evaluation"};
    app.require_subcommand(1);

    CommonOptions train_opts, eval_opts, baseline_opts, sweep_opts;
    std::optional<std::string> checkpoint;
    std::string policy = "greedy";
    bool train_missing = false;

    auto* train = app.add_subcommand("train", "Train one checkpoint per (experiment, penetration)");
    add_common(train, train_opts, false);
    auto* eval = app.add_subcommand("eval", "Evaluate a policy over seeded runs");
    add_common(eval, eval_opts, true);
    eval->add_option("--checkpoint", checkpoint, "Checkpoint file (default: the one `train` writes)");
    eval->add_option("--policy", policy, "greedy or random")->check(CLI::IsMember({"greedy", "random"}));
    auto* baseline = app.add_subcommand("baseline", "Evaluate with every intersection signalized");
    add_common(baseline, baseline_opts, true);
    auto* sweep = app.add_subcommand("sweep", "Evaluate all experiments x penetrations plus baseline");
    add_common(sweep, sweep_opts, true);
    sweep->add_flag("--train-missing", train_missing, "Train configurations without a checkpoint");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*train) return cmd_train(train_opts);
        if (*eval) return cmd_eval(eval_opts, checkpoint, policy);
        if (*baseline) return cmd_baseline(baseline_opts);
        if (*sweep) return cmd_sweep(sweep_opts, train_missing);
    } catch (const mtc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const mtc::CheckpointError& e) {
        std::cerr << "missing artifact: " << e.what() << '\n';
        return 3;
    } catch (const mtc::NumericalError& e) {
        std::cerr << "numerical abort: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
