#pragma once

#include <filesystem>
#include <memory>

#include <json.hpp>

#include "attsolver/config.hpp"

namespace attsolver {

/// Test-set evaluation outcome. Exploded rollouts contribute their frozen
/// states to the MSE and are counted separately.
struct EvalResult {
    double mse = 0.0;
    int exploded = 0;
    int total = 0;
};

/// Mean over test trajectories of (1/N) sum_{t=1..N} ||u_hat_t - u_t||_2^2,
/// full rollout from each stored initial condition. t_end <= 0 evaluates the
/// whole stored horizon; otherwise only the first t_end/dt_coarse steps.
EvalResult evaluate_mse(const AttentionModule* module, const OdeSystem& system, Scheme scheme,
                        StepMode mode, const TrajectoryDataset& test, double t_end, int jobs);

/// Paired-rollout sensitivity probe: epsilon_t = ||rollout(u0 + eps0 e1) -
/// rollout(u0)||_2 per step, with per-step growth factors.
struct PerturbationProbe {
    double epsilon0 = 0.0;
    std::vector<double> epsilon; // length N+1
    std::vector<double> growth;  // epsilon_{t+1}/epsilon_t while finite and nonzero
    bool exploded = false;
};

PerturbationProbe perturbation_probe(const AttentionModule* module, const OdeSystem& system,
                                     Scheme scheme, StepMode mode, const StateVector& u0,
                                     double dt, int n_steps, double epsilon0);

/// In-memory benchmark bundle shared by the experiment drivers.
struct BenchmarkData {
    std::unique_ptr<OdeSystem> system;
    TrajectoryDataset train, val, test;
};

/// Generates one named split ("train" | "val" | "test") from its own
/// seed stream. The val/test splits use the finer data.test_dt_fine ground
/// truth; sizes come from cfg.data. The CLI `generate` command and the
/// in-memory experiment drivers share this, so datasets written to disk
/// reproduce the drivers' internal ones bit for bit.
TrajectoryDataset generate_split(const OdeSystem& system, const RunConfig& cfg,
                                 const std::string& split);

/// Generates train/val/test splits for the configured benchmark.
BenchmarkData prepare_benchmark(const RunConfig& cfg);

// ---------------------------------------------------------------------------
// Reproduction drivers. Each trains/evaluates per its contract, writes a JSON
// report plus flat CSVs under out_dir, and returns the report.
// ---------------------------------------------------------------------------

/// Trains one module per data fraction per seed; reports MSE vs fraction
/// against the classic baseline. Verifies subset nesting before training.
nlohmann::json data_reduction_sweep(const RunConfig& cfg, const std::filesystem::path& out_dir);

/// Eight architecture/input arms (depth, width, skip connection, input form)
/// on a fixed dataset and seed list; reports MSE and relative inference speed.
nlohmann::json ablation_suite(const RunConfig& cfg, const std::filesystem::path& out_dir);

/// Additive vs Multiplicative vs NormalizedMultiplicative arms; logs the
/// per-epoch mean attention value of the multiplicative arm.
nlohmann::json multiplicative_study(const RunConfig& cfg, const std::filesystem::path& out_dir);

/// Trains Additive and NeurVec arms under per-step constant noise at each
/// data fraction; reports loss curves, test MSE, and explosion rates.
nlohmann::json noise_attack(const RunConfig& cfg, const std::filesystem::path& out_dir);

/// Perturbation-growth probe (with the analytic operator-norm bound on the
/// linear spring-mass benchmark) plus the convergence probe (error at dt and
/// dt/2 against the bound's qualitative shape).
nlohmann::json probe_report(const RunConfig& cfg, const std::filesystem::path& out_dir);

/// Per-scheme step timings, classic-fine vs classic-coarse vs compensated
/// rollout speedups, and serial-vs-OpenMP kernel comparison.
nlohmann::json speed_benchmark(const RunConfig& cfg, const std::filesystem::path& out_dir);

/// Shared helper: writes `report` as pretty JSON to path.
void write_report(const nlohmann::json& report, const std::filesystem::path& path);

} // namespace attsolver
