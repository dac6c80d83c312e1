#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "attsolver/attention.hpp"
#include "attsolver/rollout.hpp"
#include "attsolver/systems.hpp"
#include "attsolver/training.hpp"

namespace attsolver {

/// One structured configuration for every command. Every field has a
/// default; parsing is fail-closed (unknown keys are rejected).
struct RunConfig {
    SystemParams system;

    struct DataConfig {
        double dt_fine = 1e-3;
        double dt_coarse = 2e-1;
        double t_end = 20.0;
        double test_dt_fine = 1e-5; // finer ground truth for the test split
        int train = 500;
        int val = 100;
        int test = 100;
        std::string dir = "data";
    } data;

    Scheme scheme = Scheme::Euler;
    StepMode mode = StepMode::Additive;
    ModuleOptions model;
    TrainConfig train;

    std::uint64_t seed = 0;
    std::vector<std::uint64_t> seeds = {0, 1, 2}; // experiment seed list
    std::string out = "out";
    int jobs = 1;
    std::vector<double> fractions = {1.0, 0.5, 0.25, 0.1}; // data-reduction sweep

    /// Output offset implied by the step mode: multiplicative arms start at
    /// the all-ones attention vector.
    double output_offset_for_mode() const {
        return mode == StepMode::Multiplicative ? 1.0 : 0.0;
    }

    /// ModuleOptions with the mode-implied output offset filled in.
    ModuleOptions module_options() const {
        ModuleOptions opts = model;
        opts.output_offset = output_offset_for_mode();
        return opts;
    }
};

/// Parses `key = value` lines ('#' starts a comment). Dotted keys, e.g.
/// train.lr = 1e-3. Unknown keys raise ConfigError naming the key.
RunConfig parse_config_file(const std::filesystem::path& path);

/// Parses config text (same grammar) from a string; base gives the defaults.
RunConfig parse_config_text(const std::string& text, RunConfig base = {});

/// Applies one dotted-path override, e.g. ("train.epochs", "50").
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

/// The full key set, for error messages and docs.
std::vector<std::string> config_keys();

} // namespace attsolver
