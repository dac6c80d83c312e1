#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

// End-to-end checks of the command-line binary. Each invocation goes through
// std::system with stdout/stderr captured to a log file so failures can assert
// on the user-facing messages.

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "attsolver_cli_tests";

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd =
        std::string("\"") + ATTSOLVER_CLI_PATH + "\" " + args + " > \"" + log.string() +
        "\" 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is.good());
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    for (std::string line; std::getline(is, line);)
        if (!line.empty()) out.push_back(line);
    return out;
}

nlohmann::json parse_json_file(const fs::path& path) {
    std::ifstream is(path);
    REQUIRE(is.good());
    return nlohmann::json::parse(is);
}

// A micro-scale run (harmonic oscillator, six short trajectories, a 4-unit
// module) so every CLI invocation finishes in well under a second.
const fs::path& micro_config() {
    static const fs::path path = [] {
        fs::remove_all(kRoot);
        fs::create_directories(kRoot);
        const fs::path cfg = kRoot / "micro.cfg";
        std::ofstream os(cfg);
        os << "system.id = harmonic\n"
           << "data.dt_fine = 1e-3\n"
           << "data.dt_coarse = 1e-1\n"
           << "data.t_end = 0.5\n"
           << "data.test_dt_fine = 1e-3\n"
           << "data.train = 6\n"
           << "data.val = 2\n"
           << "data.test = 2\n"
           << "data.dir = " << (kRoot / "data").string() << "\n"
           << "solver.scheme = euler\n"
           << "step.mode = additive\n"
           << "model.d1 = 4\n"
           << "model.h = 2\n"
           << "train.lr = 1e-2\n"
           << "train.epochs = 2\n"
           << "train.batch = 4\n"
           << "run.seed = 0\n"
           << "run.out = " << (kRoot / "out").string() << "\n";
        return cfg;
    }();
    return path;
}

std::string with_config(const std::string& args) {
    return args + " --config \"" + micro_config().string() + "\"";
}

// Generates the micro datasets once; later cases reuse them.
void ensure_generated() {
    static const bool done = [] {
        const int rc = run_cli(with_config("generate"), kRoot / "generate.log");
        REQUIRE(rc == 0);
        return true;
    }();
    CHECK(done);
}

} // namespace

TEST_CASE("cli generate writes all three splits and is deterministic") {
    ensure_generated();
    const std::string log = slurp(kRoot / "generate.log");
    CHECK(log.find("wrote") != std::string::npos);
    for (const std::string split : {"train", "val", "test"}) {
        const fs::path atts = kRoot / "data" / (split + ".atts");
        CHECK(fs::exists(atts));
        const nlohmann::json sidecar = parse_json_file(kRoot / "data" / (split + ".atts.json"));
        CHECK(sidecar["system"] == "harmonic");
        CHECK(sidecar["split"] == split);
    }
    CHECK(parse_json_file(kRoot / "data" / "train.atts.json")["trajectories"] == 6);
    CHECK(parse_json_file(kRoot / "data" / "val.atts.json")["trajectories"] == 2);

    // Re-running the generator must reproduce the dataset byte for byte.
    const std::string before = slurp(kRoot / "data" / "train.atts");
    fs::remove(kRoot / "data" / "train.atts");
    CHECK(run_cli(with_config("generate"), kRoot / "generate2.log") == 0);
    CHECK(slurp(kRoot / "data" / "train.atts") == before);
}

TEST_CASE("cli train produces a checkpoint, curves, and a summary") {
    ensure_generated();
    CHECK(run_cli(with_config("train"), kRoot / "train.log") == 0);
    const std::string log = slurp(kRoot / "train.log");
    CHECK(log.find("epoch 0") != std::string::npos);
    CHECK(log.find("saved") != std::string::npos);
    CHECK(fs::exists(kRoot / "out" / "model.attw"));

    const std::vector<std::string> curves = lines_of(slurp(kRoot / "out" / "curves.csv"));
    REQUIRE(curves.size() == 3); // header + one row per epoch
    CHECK(curves[0] == "epoch,train_loss,val_loss,seconds");
    CHECK(curves[1].rfind("0,", 0) == 0);
    CHECK(curves[2].rfind("1,", 0) == 0);

    const nlohmann::json summary = parse_json_file(kRoot / "out" / "train.json");
    CHECK(summary["command"] == "train");
    CHECK(summary["system"] == "harmonic");
    CHECK(summary["scheme"] == "euler");
    CHECK(summary["mode"] == "additive");
    CHECK(summary["epochs_done"] == 2);
    CHECK(summary["best_val_loss"].get<double>() > 0.0);
    // A test split is present, so the summary reports the final comparison.
    CHECK(summary.contains("test_mse"));
    CHECK(summary["classic_mse"].get<double>() > 0.0);
}

TEST_CASE("cli train honours --seed and records it") {
    ensure_generated();
    const fs::path out = kRoot / "seeded";
    CHECK(run_cli(with_config("train --seed 7 --out \"" + out.string() + "\""),
                  kRoot / "seeded.log") == 0);
    const nlohmann::json summary = parse_json_file(out / "train.json");
    CHECK(summary["seed"] == 7);
}

TEST_CASE("cli train without datasets points the user at generate") {
    fs::create_directories(kRoot);
    const int rc = run_cli(with_config("train --set data.dir=" +
                                       (kRoot / "nowhere").string() + " --out \"" +
                                       (kRoot / "noout").string() + "\""),
                           kRoot / "missing.log");
    CHECK(rc != 0);
    const std::string log = slurp(kRoot / "missing.log");
    CHECK(log.find("run `generate` first") != std::string::npos);
    CHECK_FALSE(fs::exists(kRoot / "noout" / "model.attw"));
}

TEST_CASE("cli rejects invalid configuration values") {
    // dt_fine does not divide dt_coarse, so generation must refuse to run.
    const int rc = run_cli(with_config("generate --set data.dt_fine=3e-4"),
                           kRoot / "badratio.log");
    CHECK(rc != 0);
    CHECK(slurp(kRoot / "badratio.log").find("error:") != std::string::npos);

    CHECK(run_cli(with_config("train --set train.optimizer=rmsprop"),
                  kRoot / "badopt.log") != 0);
    CHECK(run_cli(with_config("train --set train.lr"), kRoot / "badset.log") != 0);
    CHECK(slurp(kRoot / "badset.log").find("key=value") != std::string::npos);
}

TEST_CASE("cli eval without a checkpoint reproduces the classic baseline") {
    ensure_generated();
    const fs::path out = kRoot / "eval_fresh";
    CHECK(run_cli(with_config("eval --out \"" + out.string() + "\""),
                  kRoot / "eval_fresh.log") == 0);
    CHECK(slurp(kRoot / "eval_fresh.log").find("no --checkpoint given") != std::string::npos);
    const nlohmann::json summary = parse_json_file(out / "eval.json");
    // A freshly initialized module has a zero final layer, so the compensated
    // rollout coincides with the uncompensated one bit for bit.
    CHECK(summary["mse"].get<double>() == summary["classic_mse"].get<double>());
    CHECK(summary["exploded"] == 0);
    CHECK(summary["total"] == 2);
}

TEST_CASE("cli eval accepts --set overrides") {
    ensure_generated();
    const fs::path out = kRoot / "eval_rk4";
    CHECK(run_cli(with_config("eval --set solver.scheme=rk4 --out \"" + out.string() + "\""),
                  kRoot / "eval_rk4.log") == 0);
    const nlohmann::json summary = parse_json_file(out / "eval.json");
    CHECK(summary["scheme"] == "rk4");
    CHECK(summary["mse"].get<double>() == summary["classic_mse"].get<double>());
}

TEST_CASE("cli resume continues the epoch schedule where training stopped") {
    ensure_generated();
    const fs::path first = kRoot / "resume_a";
    const fs::path second = kRoot / "resume_b";
    CHECK(run_cli(with_config("train --out \"" + first.string() + "\""),
                  kRoot / "resume1.log") == 0);
    CHECK(parse_json_file(first / "train.json")["epochs_done"] == 2);

    const std::string resume_args = "train --set train.epochs=4 --resume \"" +
                                    (first / "model.attw").string() + "\" --out \"" +
                                    second.string() + "\"";
    CHECK(run_cli(with_config(resume_args), kRoot / "resume2.log") == 0);
    const std::string log = slurp(kRoot / "resume2.log");
    CHECK(log.find("resuming from") != std::string::npos);
    CHECK(log.find("at epoch 2") != std::string::npos);

    CHECK(parse_json_file(second / "train.json")["epochs_done"] == 4);
    const std::vector<std::string> curves = lines_of(slurp(second / "curves.csv"));
    REQUIRE(curves.size() == 3); // header + epochs 2 and 3
    CHECK(curves[1].rfind("2,", 0) == 0);
    CHECK(curves[2].rfind("3,", 0) == 0);

    // Resuming a run that already reached train.epochs is an error, not a no-op.
    const std::string stale_args = "train --resume \"" + (first / "model.attw").string() +
                                   "\" --out \"" + (kRoot / "resume_c").string() + "\"";
    CHECK(run_cli(with_config(stale_args), kRoot / "resume3.log") != 0);
    CHECK(slurp(kRoot / "resume3.log").find("raise train.epochs") != std::string::npos);
}

TEST_CASE("cli eval loads a trained checkpoint") {
    ensure_generated();
    const fs::path train_out = kRoot / "ckpt";
    CHECK(run_cli(with_config("train --out \"" + train_out.string() + "\""),
                  kRoot / "ckpt_train.log") == 0);
    const fs::path out = kRoot / "eval_ckpt";
    CHECK(run_cli(with_config("eval --checkpoint \"" + (train_out / "model.attw").string() +
                              "\" --out \"" + out.string() + "\""),
                  kRoot / "eval_ckpt.log") == 0);
    const nlohmann::json summary = parse_json_file(out / "eval.json");
    CHECK(summary["checkpoint"] == (train_out / "model.attw").string());
    CHECK(std::isfinite(summary["mse"].get<double>()));
    // The checkpoint matches the config the CLI reconstructs, and the trained
    // module should actually differ from the classic baseline.
    CHECK(summary["mse"].get<double>() != summary["classic_mse"].get<double>());
}

TEST_CASE("cli rejects bad invocations") {
    fs::create_directories(kRoot);
    CHECK(run_cli("frobnicate", kRoot / "unknown.log") != 0);
    CHECK(run_cli("", kRoot / "nosub.log") != 0);
    CHECK(run_cli("eval --checkpoint /definitely/not/there.attw", kRoot / "nockpt.log") != 0);
    CHECK(run_cli(with_config("train --set nope=1"), kRoot / "badkey.log") != 0);
    CHECK(slurp(kRoot / "badkey.log").find("nope") != std::string::npos);
}

TEST_CASE("cli cleanup") {
    // Not a behavior check; removes the scratch tree after the cases above.
    std::error_code ec;
    fs::remove_all(kRoot, ec);
    CHECK_FALSE(fs::exists(kRoot));
}
