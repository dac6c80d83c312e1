// attsolver_cli — one binary for the whole laboratory: dataset generation,
// training, evaluation, and the reproduction experiment drivers.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "attsolver/errors.hpp"
#include "attsolver/experiments.hpp"

namespace fs = std::filesystem;
using namespace attsolver;

namespace {

struct CommonArgs {
    std::string config;
    std::string seed;
    std::string out;
    std::string jobs;
    std::vector<std::string> sets;
    std::string checkpoint; // eval only
    std::string resume;     // train only
};

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config, "configuration file (key = value lines)")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", args.seed, "run seed (overrides the config file)");
    sub->add_option("--out", args.out, "output directory (default: config run.out)");
    sub->add_option("--jobs", args.jobs, "worker threads; 1 runs the serial reference path");
    sub->add_option("--set", args.sets,
                    "extra config override as key=value, repeatable (e.g. --set train.lr=1e-4)");
}

RunConfig resolve_config(const CommonArgs& args) {
    RunConfig cfg = args.config.empty() ? RunConfig{} : parse_config_file(args.config);
    for (const std::string& kv : args.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got '" + kv + "'");
        apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!args.seed.empty()) apply_override(cfg, "run.seed", args.seed);
    if (!args.jobs.empty()) apply_override(cfg, "run.jobs", args.jobs);
    if (!args.out.empty()) cfg.out = args.out;
    return cfg;
}

TrajectoryDataset load_split(const RunConfig& cfg, const std::string& split) {
    const fs::path path = fs::path(cfg.data.dir) / (split + ".atts");
    if (!fs::exists(path))
        throw ConfigError("missing dataset " + path.string() + " (run `generate` first)");
    return read_dataset(path);
}

void check_dataset_matches(const TrajectoryDataset& ds, const OdeSystem& system,
                           const std::string& split) {
    if (ds.dim() != system.dimension())
        throw ConfigError(split + " dataset dimension " + std::to_string(ds.dim()) +
                          " does not match system '" + std::string(system.id()) + "' (" +
                          std::to_string(system.dimension()) + ")");
}

int cmd_generate(const RunConfig& cfg) {
    const auto system = make_system(cfg.system);
    fs::create_directories(cfg.data.dir);
    for (const std::string split : {"train", "val", "test"}) {
        const TrajectoryDataset ds = generate_split(*system, cfg, split);
        const fs::path path = fs::path(cfg.data.dir) / (split + ".atts");
        write_dataset(ds, path);
        std::cout << "wrote " << path.string() << ": " << ds.size() << " trajectories x "
                  << ds.rows() << " rows (dim " << ds.dim() << ", dt " << ds.dt_coarse
                  << ", ground truth dt " << ds.dt_fine << ", " << ds.rejected
                  << " redraws)\n";
    }
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& resume) {
    const auto system = make_system(cfg.system);
    const TrajectoryDataset train = load_split(cfg, "train");
    const TrajectoryDataset val = load_split(cfg, "val");
    check_dataset_matches(train, *system, "train");
    check_dataset_matches(val, *system, "val");

    AttentionModule module;
    const ModuleOptions opts = cfg.module_options();
    int start_epoch = 0;
    if (resume.empty()) {
        module = init_module(system->dimension(), opts, cfg.seed);
    } else {
        module = load_module(resume, &opts);
        if (module.d != system->dimension())
            throw ConfigError("checkpoint dimension does not match the configured system");
        // Pick the epoch counter up where the checkpointed run stopped; the
        // sibling train.json records how many epochs it completed.
        const fs::path sibling = fs::path(resume).parent_path() / "train.json";
        if (fs::exists(sibling)) {
            std::ifstream is(sibling);
            nlohmann::json prior = nlohmann::json::parse(is);
            if (prior.contains("epochs_done"))
                start_epoch = prior["epochs_done"].get<int>();
        }
        if (start_epoch >= cfg.train.epochs)
            throw ConfigError("resume: checkpoint already trained for " +
                              std::to_string(start_epoch) +
                              " epochs; raise train.epochs to continue");
        std::cout << "resuming from " << resume << " at epoch " << start_epoch
                  << " (optimizer state starts fresh)\n";
    }

    const TrainReport report = fit(module, *system, train, val, cfg.scheme, cfg.mode, cfg.train,
                                   &std::cout, start_epoch);

    fs::create_directories(cfg.out);
    const fs::path model_path = fs::path(cfg.out) / "model.attw";
    save_module(module, model_path);
    write_curves_csv(report, fs::path(cfg.out) / "curves.csv");

    nlohmann::json summary;
    summary["command"] = "train";
    summary["system"] = cfg.system.id;
    summary["scheme"] = std::string(scheme_name(cfg.scheme));
    summary["mode"] = std::string(step_mode_name(cfg.mode));
    summary["seed"] = cfg.seed;
    summary["epochs"] = static_cast<int>(report.epochs.size());
    summary["epochs_done"] = start_epoch + static_cast<int>(report.epochs.size());
    summary["best_epoch"] = report.best_epoch;
    summary["best_val_loss"] = report.best_val_loss;
    summary["c_n"] = report.c_n_used;
    summary["skipped_updates"] = report.skipped_updates;
    summary["model"] = model_path.string();

    const fs::path test_path = fs::path(cfg.data.dir) / "test.atts";
    if (fs::exists(test_path)) {
        const TrajectoryDataset test = read_dataset(test_path);
        check_dataset_matches(test, *system, "test");
        const EvalResult att =
            evaluate_mse(&module, *system, cfg.scheme, cfg.mode, test, -1.0, cfg.jobs);
        const EvalResult classic = evaluate_mse(nullptr, *system, cfg.scheme, StepMode::Classic,
                                                test, -1.0, cfg.jobs);
        summary["test_mse"] = att.mse;
        summary["test_exploded"] = att.exploded;
        summary["classic_mse"] = classic.mse;
        std::cout << "test mse " << att.mse << " (classic " << classic.mse << ", "
                  << att.exploded << '/' << att.total << " exploded)\n";
    }
    write_report(summary, fs::path(cfg.out) / "train.json");
    std::cout << "saved " << model_path.string() << " (best val loss " << report.best_val_loss
              << " at epoch " << report.best_epoch << ")\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint) {
    const auto system = make_system(cfg.system);
    const TrajectoryDataset test = load_split(cfg, "test");
    check_dataset_matches(test, *system, "test");

    const ModuleOptions opts = cfg.module_options();
    AttentionModule module;
    if (checkpoint.empty()) {
        // Freshly initialized module: the final layer starts at zero, so this
        // reproduces the uncompensated baseline and serves as a smoke check.
        module = init_module(system->dimension(), opts, cfg.seed);
        std::cout << "no --checkpoint given; evaluating a fresh (neutral) module\n";
    } else {
        module = load_module(checkpoint, &opts);
        if (module.d != system->dimension())
            throw ConfigError("checkpoint dimension does not match the configured system");
    }

    const EvalResult att =
        evaluate_mse(&module, *system, cfg.scheme, cfg.mode, test, -1.0, cfg.jobs);
    const EvalResult classic =
        evaluate_mse(nullptr, *system, cfg.scheme, StepMode::Classic, test, -1.0, cfg.jobs);

    nlohmann::json summary;
    summary["command"] = "eval";
    summary["system"] = cfg.system.id;
    summary["scheme"] = std::string(scheme_name(cfg.scheme));
    summary["mode"] = std::string(step_mode_name(cfg.mode));
    summary["checkpoint"] = checkpoint;
    summary["mse"] = att.mse;
    summary["exploded"] = att.exploded;
    summary["total"] = att.total;
    summary["classic_mse"] = classic.mse;
    summary["classic_exploded"] = classic.exploded;
    fs::create_directories(cfg.out);
    write_report(summary, fs::path(cfg.out) / "eval.json");
    std::cout << "mse " << att.mse << " over " << att.total << " trajectories ("
              << att.exploded << " exploded); classic baseline " << classic.mse << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"attsolver: coarse ODE solvers with a learned compensation term"};
    app.require_subcommand(1);

    CommonArgs args;
    CLI::App* generate = app.add_subcommand("generate", "generate train/val/test datasets");
    CLI::App* train = app.add_subcommand("train", "train a compensation module");
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    CLI::App* sweep = app.add_subcommand("sweep", "data-reduction sweep");
    CLI::App* ablate = app.add_subcommand("ablate", "architecture/input ablation suite");
    CLI::App* multiplicative =
        app.add_subcommand("multiplicative", "additive vs multiplicative attention study");
    CLI::App* attack = app.add_subcommand("attack", "noise-attack robustness study");
    CLI::App* probe = app.add_subcommand("probe", "perturbation and convergence probes");
    CLI::App* bench = app.add_subcommand("bench", "speed benchmark (serial vs OpenMP)");
    for (CLI::App* sub :
         {generate, train, eval, sweep, ablate, multiplicative, attack, probe, bench})
        add_common(sub, args);
    train->add_option("--resume", args.resume,
                      "checkpoint to continue training from (optimizer state starts fresh)")
        ->check(CLI::ExistingFile);
    eval->add_option("--checkpoint", args.checkpoint, "trained module to evaluate")
        ->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        const RunConfig cfg = resolve_config(args);
        const fs::path out_dir = cfg.out;
        if (generate->parsed()) return cmd_generate(cfg);
        if (train->parsed()) return cmd_train(cfg, args.resume);
        if (eval->parsed()) return cmd_eval(cfg, args.checkpoint);
        if (sweep->parsed()) {
            data_reduction_sweep(cfg, out_dir);
            return 0;
        }
        if (ablate->parsed()) {
            ablation_suite(cfg, out_dir);
            return 0;
        }
        if (multiplicative->parsed()) {
            multiplicative_study(cfg, out_dir);
            return 0;
        }
        if (attack->parsed()) {
            noise_attack(cfg, out_dir);
            return 0;
        }
        if (probe->parsed()) {
            probe_report(cfg, out_dir);
            return 0;
        }
        if (bench->parsed()) {
            speed_benchmark(cfg, out_dir);
            return 0;
        }
        std::cerr << "error: no command selected\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
