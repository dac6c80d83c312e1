#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "attsolver/attention.hpp"
#include "attsolver/dataset.hpp"
#include "attsolver/rollout.hpp"

namespace attsolver {

struct TrainConfig {
    double lr = 1e-3;
    int epochs = 400;
    int batch_size = 32;          // trajectories per parameter update
    double c_n = 0.0;             // loss scale; 0 = auto (see auto_loss_scale)
    bool teacher_forcing = true;  // integration term from ground-truth states
    double sigma = 0.0;           // per-step constant noise on the accumulator
    bool gaussian_noise = false;  // Gaussian alternative to the constant offset
    std::string optimizer = "adam"; // adam | sgd
    bool cosine_decay = false;    // cosine learning-rate schedule
    std::uint64_t seed = 0;
    int jobs = 1;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double seconds = 0.0;        // isolated timing column; excluded from
                                 // byte-comparison of results
    double mean_attention = 0.0; // mean module output across training steps
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;
    double best_val_loss = std::numeric_limits<double>::infinity();
    double c_n_used = 1.0;
    long skipped_updates = 0; // batches dropped due to non-finite gradients
};

/// Default loss scale: 1 / (mean squared state magnitude over the training
/// split), clamped to [1, 1e6]; counteracts losses too small to optimize.
double auto_loss_scale(const TrajectoryDataset& train);

/// R_e = c_n * (1/N) * sum_{t=1..N} ||u_hat_t - u_t||_2^2 over matching
/// (N+1) x d trajectories; the shared initial row is excluded.
double compute_loss(const Matrix& u_hat, const Matrix& u, double c_n);

/// Per-step behavior of the training unroll.
struct UnrollConfig {
    Scheme scheme = Scheme::Euler;
    StepMode mode = StepMode::Additive;
    double dt = 0.0;
    double c_n = 1.0;
    bool teacher_forcing = true;
    double sigma = 0.0;
    bool gaussian_noise = false;
};

struct UnrollStats {
    double attention_sum = 0.0; // summed module output components
    long attention_count = 0;
};

/// Frozen per-step quantities of one unroll; lets tests re-evaluate the loss
/// under perturbed parameters with the integration-term sequence held fixed
/// (the gradient contract cuts differentiation through f).
struct UnrollRecord {
    std::vector<std::vector<double>> module_inputs; // x_t fed to the module
    std::vector<std::vector<double>> s_dt;          // S_t * dt
    Matrix u_hat;                                   // accumulated states
};

/// Unrolls one trajectory against ground truth, accumulates exact parameter
/// gradients of R_e into grads, and returns the trajectory loss.
/// Teacher-forced: S_t from the ground-truth state; otherwise from the
/// accumulated state (identity chain kept, no differentiation through f).
double trajectory_gradient(const AttentionModule& module, const OdeSystem& system,
                           const Matrix& truth, const UnrollConfig& cfg, GradientSet& grads,
                           UnrollStats* stats = nullptr, UnrollRecord* record = nullptr,
                           Rng* noise_rng = nullptr);

/// Loss of the recorded unroll re-evaluated with the module's current
/// parameters but the frozen integration-term sequence. Finite-difference
/// oracle companion of trajectory_gradient.
double frozen_unroll_loss(const AttentionModule& module, const Matrix& truth,
                          const UnrollRecord& record, const UnrollConfig& cfg);

/// Adam moment buffers (unused under SGD).
struct OptimizerState {
    GradientSet m, v;
    long t = 0;
    static OptimizerState zeros_like(const AttentionModule& module);
};

/// phi <- phi - lr * step(grads); Adam (beta1=0.9, beta2=0.999, eps=1e-8,
/// bias-corrected) or plain SGD. Frozen activation coefficients and the
/// output offset are left untouched. Non-finite grads: no-op (caller logs).
void update_parameters(AttentionModule& module, const GradientSet& grads, OptimizerState& state,
                       const TrainConfig& cfg, double lr_now);

/// One pass over the training split in shuffled batches; returns mean
/// per-trajectory loss. Deterministic for fixed (module, dataset, cfg,
/// epoch_index) and bitwise identical for any jobs setting.
double train_epoch(AttentionModule& module, const OdeSystem& system,
                   const TrajectoryDataset& train, Scheme scheme, StepMode mode,
                   const TrainConfig& cfg, double c_n, OptimizerState& opt, int epoch_index,
                   double* mean_attention = nullptr, long* skipped = nullptr);

/// Mean R_e over the dataset using full (never teacher-forced, never noisy)
/// rollouts — the deployment condition. module may be null for Classic.
double evaluate_loss(const AttentionModule* module, const OdeSystem& system,
                     const TrajectoryDataset& ds, Scheme scheme, StepMode mode, double c_n,
                     int jobs);

/// Algorithm: epochs of train_epoch + full-rollout validation; the module is
/// left at the best-validation parameters. start_epoch offsets the epoch
/// counter (shuffle stream, cosine schedule, reported indices) so a resumed
/// run continues where the checkpointed one stopped; cfg.epochs is the total
/// including already-completed epochs.
TrainReport fit(AttentionModule& module, const OdeSystem& system, const TrajectoryDataset& train,
                const TrajectoryDataset& val, Scheme scheme, StepMode mode,
                const TrainConfig& cfg, std::ostream* log = nullptr, int start_epoch = 0);

/// CSV: epoch,train_loss,val_loss,seconds
void write_curves_csv(const TrainReport& report, const std::filesystem::path& path);

} // namespace attsolver
