#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "attsolver/config.hpp"
#include "attsolver/errors.hpp"

using namespace attsolver;
namespace fs = std::filesystem;

TEST_CASE("defaults describe the standard benchmark run") {
    const RunConfig cfg;
    CHECK(cfg.system.id == "spring_mass");
    CHECK(cfg.data.dt_fine == 1e-3);
    CHECK(cfg.data.dt_coarse == 2e-1);
    CHECK(cfg.data.t_end == 20.0);
    CHECK(cfg.data.test_dt_fine == 1e-5);
    CHECK(cfg.data.train == 500);
    CHECK(cfg.scheme == Scheme::Euler);
    CHECK(cfg.mode == StepMode::Additive);
    CHECK(cfg.model.d1 == 1024);
    CHECK(cfg.model.h == 2);
    CHECK(cfg.model.train_activations);
    CHECK_FALSE(cfg.model.skip_connection);
    CHECK(cfg.train.lr == 1e-3);
    CHECK(cfg.train.epochs == 400);
    CHECK(cfg.train.batch_size == 32);
    CHECK(cfg.train.teacher_forcing);
    CHECK(cfg.train.optimizer == "adam");
    CHECK(cfg.seeds == std::vector<std::uint64_t>{0, 1, 2});
    CHECK(cfg.fractions == std::vector<double>{1.0, 0.5, 0.25, 0.1});
    CHECK(cfg.jobs == 1);
}

TEST_CASE("output offset follows the step mode") {
    RunConfig cfg;
    cfg.mode = StepMode::Additive;
    CHECK(cfg.output_offset_for_mode() == 0.0);
    cfg.mode = StepMode::Multiplicative;
    CHECK(cfg.output_offset_for_mode() == 1.0);
    CHECK(cfg.module_options().output_offset == 1.0);
    cfg.mode = StepMode::NormalizedMultiplicative;
    CHECK(cfg.output_offset_for_mode() == 0.0);
    cfg.mode = StepMode::NeurVec;
    CHECK(cfg.output_offset_for_mode() == 0.0);

    cfg.model.d1 = 77;
    cfg.model.skip_connection = true;
    const ModuleOptions opts = cfg.module_options();
    CHECK(opts.d1 == 77);
    CHECK(opts.skip_connection);
}

TEST_CASE("config text parses dotted keys, comments, and whitespace") {
    const std::string text = R"(
# benchmark setup
system.id = elastic_pendulum
system.k = 42.5

data.dt_coarse = 0.1   # coarse grid
data.train = 12
solver.scheme = rk4
step.mode = multiplicative
model.d1 = 64
model.skip = true
model.input_scaled = yes
train.lr = 5e-4
train.epochs = 7
train.batch = 4
train.optimizer = sgd
train.teacher_forcing = off
train.sigma = 1e-5
run.seed = 9
run.seeds = 3, 4, 5
run.out = results
run.jobs = 2
experiment.fractions = 0.5, 0.1
)";
    const RunConfig cfg = parse_config_text(text);
    CHECK(cfg.system.id == "elastic_pendulum");
    CHECK(cfg.system.k == 42.5);
    CHECK(cfg.data.dt_coarse == 0.1);
    CHECK(cfg.data.train == 12);
    CHECK(cfg.scheme == Scheme::RK4);
    CHECK(cfg.mode == StepMode::Multiplicative);
    CHECK(cfg.model.d1 == 64);
    CHECK(cfg.model.skip_connection);
    CHECK(cfg.model.input_scaled);
    CHECK(cfg.train.lr == 5e-4);
    CHECK(cfg.train.epochs == 7);
    CHECK(cfg.train.batch_size == 4);
    CHECK(cfg.train.optimizer == "sgd");
    CHECK_FALSE(cfg.train.teacher_forcing);
    CHECK(cfg.train.sigma == 1e-5);
    CHECK(cfg.seed == 9);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 4, 5});
    CHECK(cfg.out == "results");
    CHECK(cfg.jobs == 2);
    CHECK(cfg.fractions == std::vector<double>{0.5, 0.1});
    // The run-level seed and worker count mirror into the training config.
    CHECK(cfg.train.seed == 9);
    CHECK(cfg.train.jobs == 2);
}

TEST_CASE("invalid config input is rejected with the offending key named") {
    try {
        parse_config_text("solver.stepper = rk4\n");
        FAIL("unknown key should throw ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("solver.stepper") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config_text("train.lr 0.1\n"), ConfigError);       // missing '='
    CHECK_THROWS_AS(parse_config_text("train.lr =\n"), ConfigError);         // empty value
    CHECK_THROWS_AS(parse_config_text("train.lr = fast\n"), ConfigError);    // not a number
    CHECK_THROWS_AS(parse_config_text("train.epochs = 2.5\n"), ConfigError); // not an integer
    CHECK_THROWS_AS(parse_config_text("model.skip = maybe\n"), ConfigError); // not a bool
    CHECK_THROWS_AS(parse_config_text("solver.scheme = rk5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("step.mode = turbo\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("train.optimizer = rmsprop\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("run.seeds = \n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("experiment.fractions = 0.0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("experiment.fractions = 1.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("experiment.fractions = 0.5, 0\n"), ConfigError);
}

TEST_CASE("apply_override mutates a single key") {
    RunConfig cfg;
    apply_override(cfg, "train.epochs", "50");
    CHECK(cfg.train.epochs == 50);
    apply_override(cfg, "run.seed", "77");
    CHECK(cfg.seed == 77);
    CHECK(cfg.train.seed == 77);
    apply_override(cfg, "run.jobs", "4");
    CHECK(cfg.jobs == 4);
    CHECK(cfg.train.jobs == 4);
    apply_override(cfg, "data.dir", "scratch/datasets");
    CHECK(cfg.data.dir == "scratch/datasets");
    CHECK_THROWS_AS(apply_override(cfg, "nope", "1"), ConfigError);
}

TEST_CASE("config files round-trip through the parser") {
    const fs::path path = fs::temp_directory_path() / "attsolver_config_test.cfg";
    {
        std::ofstream os(path);
        os << "system.id = klink\n"
           << "system.links = 3\n"
           << "train.epochs = 11\n";
    }
    const RunConfig cfg = parse_config_file(path);
    CHECK(cfg.system.id == "klink");
    CHECK(cfg.system.links == 3);
    CHECK(cfg.train.epochs == 11);
    fs::remove(path);

    CHECK_THROWS_AS(parse_config_file(fs::temp_directory_path() / "attsolver_missing.cfg"),
                    ConfigError);
}

TEST_CASE("config_keys lists every accepted key exactly once") {
    const std::vector<std::string> keys = config_keys();
    CHECK(keys.size() == 38);
    std::vector<std::string> sorted = keys;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
    // Every advertised key must be accepted by the parser (value "1" for
    // numerics; strings get type-appropriate samples).
    for (const std::string& key : keys) {
        RunConfig cfg;
        std::string value = "1";
        if (key == "system.id") value = "harmonic";
        if (key == "data.dir" || key == "run.out") value = "somewhere";
        if (key == "solver.scheme") value = "rk3";
        if (key == "step.mode") value = "additive";
        if (key == "train.optimizer") value = "sgd";
        CHECK_NOTHROW(apply_override(cfg, key, value));
    }
}
