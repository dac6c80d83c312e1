#include "attsolver/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "attsolver/errors.hpp"
#include "attsolver/parallel.hpp"

namespace attsolver {

double auto_loss_scale(const TrajectoryDataset& train) {
    double sum = 0.0;
    long count = 0;
    for (const Matrix& traj : train.trajectories) {
        for (double v : traj.a) sum += v * v;
        count += traj.rows;
    }
    if (count == 0) return 1.0;
    const double mean_sq = sum / static_cast<double>(count);
    if (!(mean_sq > 0.0)) return 1e6;
    return std::clamp(1.0 / mean_sq, 1.0, 1e6);
}

double compute_loss(const Matrix& u_hat, const Matrix& u, double c_n) {
    if (u_hat.rows != u.rows || u_hat.cols != u.cols)
        throw ContractError("compute_loss: trajectory shapes differ");
    if (u.rows < 2) throw ContractError("compute_loss: need at least one step row");
    const int n = u.rows - 1;
    double acc = 0.0;
    for (int t = 1; t <= n; ++t) {
        const auto a = u_hat.row(t);
        const auto b = u.row(t);
        for (int i = 0; i < u.cols; ++i) {
            const double diff = a[i] - b[i];
            acc += diff * diff;
        }
    }
    return c_n * acc / static_cast<double>(n);
}

namespace {

/// u_next = u_cur + (S dt) combined with comp according to mode.
void combine_step(StepMode mode, std::span<const double> u_cur, std::span<const double> s_dt,
                  std::span<const double> comp, std::span<double> u_next) {
    const int d = static_cast<int>(u_cur.size());
    switch (mode) {
        case StepMode::Additive:
        case StepMode::NeurVec:
            for (int i = 0; i < d; ++i) u_next[i] = u_cur[i] + s_dt[i] + comp[i];
            return;
        case StepMode::Multiplicative:
            for (int i = 0; i < d; ++i) u_next[i] = u_cur[i] + s_dt[i] * comp[i];
            return;
        case StepMode::NormalizedMultiplicative:
            for (int i = 0; i < d; ++i) u_next[i] = u_cur[i] + s_dt[i] * (1.0 + comp[i]);
            return;
        case StepMode::Classic:
            throw ContractError("combine_step: Classic mode has no compensation");
    }
    throw ContractError("combine_step: unknown mode");
}

void apply_noise(std::span<double> state, const UnrollConfig& cfg, Rng* noise_rng) {
    if (cfg.sigma <= 0.0) return;
    if (cfg.gaussian_noise) {
        if (noise_rng == nullptr)
            throw ContractError("training unroll: gaussian noise needs an rng");
        inject_noise_gaussian(state, cfg.sigma, *noise_rng);
    } else {
        inject_noise(state, cfg.sigma);
    }
}

} // namespace

double trajectory_gradient(const AttentionModule& module, const OdeSystem& system,
                           const Matrix& truth, const UnrollConfig& cfg, GradientSet& grads,
                           UnrollStats* stats, UnrollRecord* record, Rng* noise_rng) {
    const int n = truth.rows - 1;
    const int d = truth.cols;
    if (n < 1) throw ContractError("trajectory_gradient: trajectory has no steps");
    if (module.d != d || system.dimension() != d)
        throw ContractError("trajectory_gradient: module/system/trajectory dims disagree");
    if (cfg.mode == StepMode::Classic)
        throw ContractError("trajectory_gradient: Classic mode has no parameters to train");
    if (!(cfg.dt > 0.0)) throw ContractError("trajectory_gradient: dt must be positive");

    // ---- forward: accumulate u_hat, caching per-step module state ----
    const std::size_t nn = static_cast<std::size_t>(n);
    const std::size_t dd = static_cast<std::size_t>(d);
    Matrix u_hat(n + 1, d);
    std::vector<ForwardCache> caches(nn);
    std::vector<std::vector<double>> s_dt(nn, std::vector<double>(dd));
    SchemeWorkspace scheme_ws;
    std::vector<double> cur(dd), s(dd), x(dd), comp(dd);

    for (int i = 0; i < d; ++i) {
        u_hat(0, i) = truth(0, i);
        cur[static_cast<std::size_t>(i)] = truth(0, i);
    }

    for (int t = 0; t < n; ++t) {
        apply_noise(cur, cfg, noise_rng); // u_hat_t <- u_hat_t + sigma
        const std::span<const double> state_for_s =
            cfg.teacher_forcing ? truth.row(t) : std::span<const double>(cur);
        integration_term(cfg.scheme, system, state_for_s, cfg.dt, s, scheme_ws);
        for (int i = 0; i < d; ++i) s_dt[t][static_cast<std::size_t>(i)] = s[i] * cfg.dt;

        if (cfg.mode == StepMode::NeurVec) {
            for (int i = 0; i < d; ++i) x[static_cast<std::size_t>(i)] = state_for_s[i];
        } else if (module.input_scaled) {
            x.assign(s_dt[t].begin(), s_dt[t].end());
        } else {
            x.assign(s.begin(), s.end());
        }
        mlp_forward(module, x, comp, caches[t]);
        if (stats != nullptr) {
            for (double c : comp) stats->attention_sum += c;
            stats->attention_count += d;
        }
        combine_step(cfg.mode, cur, s_dt[t], comp, u_hat.row(t + 1));
        for (int i = 0; i < d; ++i) cur[static_cast<std::size_t>(i)] = u_hat(t + 1, i);
    }

    const double loss = compute_loss(u_hat, truth, cfg.c_n);

    // ---- backward: dL/d u_hat_t accumulates as a suffix sum; the per-step
    // state chain is the identity (teacher-forced S_t is constant; the
    // non-teacher-forced variant deliberately does not differentiate f) ----
    std::vector<double> g_acc(dd, 0.0), upstream(dd);
    const double scale = 2.0 * cfg.c_n / static_cast<double>(n);
    for (int t = n - 1; t >= 0; --t) {
        for (int i = 0; i < d; ++i)
            g_acc[static_cast<std::size_t>(i)] += scale * (u_hat(t + 1, i) - truth(t + 1, i));
        if (cfg.mode == StepMode::Multiplicative ||
            cfg.mode == StepMode::NormalizedMultiplicative) {
            for (int i = 0; i < d; ++i)
                upstream[static_cast<std::size_t>(i)] =
                    g_acc[static_cast<std::size_t>(i)] * s_dt[t][static_cast<std::size_t>(i)];
        } else {
            upstream = g_acc;
        }
        mlp_backward(module, caches[t], upstream, grads);
    }

    if (record != nullptr) {
        record->module_inputs.resize(nn);
        for (int t = 0; t < n; ++t) record->module_inputs[t] = caches[t].input;
        record->s_dt = s_dt;
        record->u_hat = u_hat;
    }
    return loss;
}

double frozen_unroll_loss(const AttentionModule& module, const Matrix& truth,
                          const UnrollRecord& record, const UnrollConfig& cfg) {
    const int n = truth.rows - 1;
    const int d = truth.cols;
    if (static_cast<int>(record.module_inputs.size()) != n ||
        static_cast<int>(record.s_dt.size()) != n)
        throw ContractError("frozen_unroll_loss: record does not match trajectory");
    if (cfg.gaussian_noise && cfg.sigma > 0.0)
        throw ContractError("frozen_unroll_loss: gaussian noise is not replayable here");

    Matrix u_hat(n + 1, d);
    std::vector<double> cur(static_cast<std::size_t>(d)), comp(static_cast<std::size_t>(d));
    ForwardCache cache;
    for (int i = 0; i < d; ++i) {
        u_hat(0, i) = truth(0, i);
        cur[static_cast<std::size_t>(i)] = truth(0, i);
    }
    for (int t = 0; t < n; ++t) {
        if (cfg.sigma > 0.0) inject_noise(cur, cfg.sigma);
        mlp_forward(module, record.module_inputs[t], comp, cache);
        combine_step(cfg.mode, cur, record.s_dt[t], comp, u_hat.row(t + 1));
        for (int i = 0; i < d; ++i) cur[static_cast<std::size_t>(i)] = u_hat(t + 1, i);
    }
    return compute_loss(u_hat, truth, cfg.c_n);
}

OptimizerState OptimizerState::zeros_like(const AttentionModule& module) {
    OptimizerState s;
    s.m = GradientSet::zeros_like(module);
    s.v = GradientSet::zeros_like(module);
    s.t = 0;
    return s;
}

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

void adam_update(std::span<double> p, std::span<const double> g, std::span<double> m,
                 std::span<double> v, double lr, double bias1, double bias2) {
    for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g[i];
        v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
        const double m_hat = m[i] / bias1;
        const double v_hat = v[i] / bias2;
        p[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
    }
}

void sgd_update(std::span<double> p, std::span<const double> g, double lr) {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
}

} // namespace

void update_parameters(AttentionModule& module, const GradientSet& grads, OptimizerState& state,
                       const TrainConfig& cfg, double lr_now) {
    if (grads.weights.size() != module.weights.size() || grads.acts.size() != module.acts.size())
        throw ContractError("update_parameters: gradient shapes do not match module");
    for (std::size_t l = 0; l < grads.weights.size(); ++l)
        if (grads.weights[l].rows != module.weights[l].rows ||
            grads.weights[l].cols != module.weights[l].cols)
            throw ContractError("update_parameters: gradient shapes do not match module");
    if (cfg.optimizer != "adam" && cfg.optimizer != "sgd")
        throw ConfigError("update_parameters: optimizer must be adam or sgd, got '" +
                          cfg.optimizer + "'");
    if (!grads.finite())
        throw ContractError("update_parameters: non-finite gradients (caller must skip)");

    const bool adam = cfg.optimizer == "adam";
    double bias1 = 1.0, bias2 = 1.0;
    if (adam) {
        state.t += 1;
        bias1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.t));
        bias2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.t));
    }

    for (std::size_t l = 0; l < module.weights.size(); ++l) {
        if (adam)
            adam_update(module.weights[l].a, grads.weights[l].a, state.m.weights[l].a,
                        state.v.weights[l].a, lr_now, bias1, bias2);
        else
            sgd_update(module.weights[l].a, grads.weights[l].a, lr_now);
    }
    for (std::size_t l = 0; l < module.acts.size(); ++l) {
        if (!module.train_activations || !module.acts[l].learnable) continue;
        std::array<double, 7>& mm = state.m.acts[l];
        std::array<double, 7>& vv = state.v.acts[l];
        const std::array<double, 7>& gg = grads.acts[l];
        // coefficient order mirrors GradientSet: p0..p3 then q0..q2
        std::array<double, 7> coeffs{module.acts[l].p[0], module.acts[l].p[1],
                                     module.acts[l].p[2], module.acts[l].p[3],
                                     module.acts[l].q[0], module.acts[l].q[1],
                                     module.acts[l].q[2]};
        if (adam)
            adam_update(coeffs, gg, mm, vv, lr_now, bias1, bias2);
        else
            sgd_update(coeffs, gg, lr_now);
        module.acts[l].p = {coeffs[0], coeffs[1], coeffs[2], coeffs[3]};
        module.acts[l].q = {coeffs[4], coeffs[5], coeffs[6]};
    }
    // output_offset stays fixed: it only anchors the multiplicative arms at 1.
}

double train_epoch(AttentionModule& module, const OdeSystem& system,
                   const TrajectoryDataset& train, Scheme scheme, StepMode mode,
                   const TrainConfig& cfg, double c_n, OptimizerState& opt, int epoch_index,
                   double* mean_attention, long* skipped) {
    const int m = train.size();
    if (m == 0) throw ConfigError("train_epoch: empty training dataset");
    if (cfg.batch_size < 1) throw ConfigError("train_epoch: batch_size must be >= 1");
    if (cfg.lr < 0.0) throw ConfigError("train_epoch: learning rate must be >= 0");

    UnrollConfig unroll;
    unroll.scheme = scheme;
    unroll.mode = mode;
    unroll.dt = train.dt_coarse;
    unroll.c_n = c_n;
    unroll.teacher_forcing = cfg.teacher_forcing;
    unroll.sigma = cfg.sigma;
    unroll.gaussian_noise = cfg.gaussian_noise;

    double lr_now = cfg.lr;
    if (cfg.cosine_decay && cfg.epochs > 1)
        lr_now = cfg.lr * 0.5 *
                 (1.0 + std::cos(3.14159265358979323846 * static_cast<double>(epoch_index) /
                                 static_cast<double>(cfg.epochs)));

    std::vector<int> order(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng shuffle_rng(mix_seed(cfg.seed, 0xe90c'0000ULL + static_cast<std::uint64_t>(epoch_index)));
    shuffle(order, shuffle_rng);

    const int batch = std::min(cfg.batch_size, m);
    std::vector<GradientSet> slots;
    slots.reserve(static_cast<std::size_t>(batch));
    for (int i = 0; i < batch; ++i) slots.push_back(GradientSet::zeros_like(module));
    std::vector<double> slot_loss(static_cast<std::size_t>(batch), 0.0);
    std::vector<UnrollStats> slot_stats(static_cast<std::size_t>(batch));
    GradientSet batch_grads = GradientSet::zeros_like(module);

    double loss_sum = 0.0;
    double att_sum = 0.0;
    long att_count = 0;

    for (int start = 0; start < m; start += batch) {
        const int count = std::min(batch, m - start);
        parallel_for(count, cfg.jobs, [&](int slot) {
            const int traj_idx = order[static_cast<std::size_t>(start + slot)];
            slots[static_cast<std::size_t>(slot)].reset();
            slot_stats[static_cast<std::size_t>(slot)] = UnrollStats{};
            Rng noise_rng(mix_seed(cfg.seed, (static_cast<std::uint64_t>(epoch_index) << 32) ^
                                                 static_cast<std::uint64_t>(traj_idx)));
            slot_loss[static_cast<std::size_t>(slot)] = trajectory_gradient(
                module, system, train.trajectories[static_cast<std::size_t>(traj_idx)], unroll,
                slots[static_cast<std::size_t>(slot)],
                mean_attention ? &slot_stats[static_cast<std::size_t>(slot)] : nullptr, nullptr,
                cfg.gaussian_noise ? &noise_rng : nullptr);
        });

        batch_grads.reset();
        for (int slot = 0; slot < count; ++slot) {
            batch_grads.add(slots[static_cast<std::size_t>(slot)]);
            loss_sum += slot_loss[static_cast<std::size_t>(slot)];
            att_sum += slot_stats[static_cast<std::size_t>(slot)].attention_sum;
            att_count += slot_stats[static_cast<std::size_t>(slot)].attention_count;
        }
        batch_grads.scale(1.0 / static_cast<double>(count));
        if (!batch_grads.finite()) {
            if (skipped != nullptr) ++(*skipped);
            continue;
        }
        update_parameters(module, batch_grads, opt, cfg, lr_now);
    }

    if (mean_attention != nullptr)
        *mean_attention = att_count > 0 ? att_sum / static_cast<double>(att_count) : 0.0;
    return loss_sum / static_cast<double>(m);
}

double evaluate_loss(const AttentionModule* module, const OdeSystem& system,
                     const TrajectoryDataset& ds, Scheme scheme, StepMode mode, double c_n,
                     int jobs) {
    const int m = ds.size();
    if (m == 0) throw ConfigError("evaluate_loss: empty dataset");
    StepOptions opts{mode, module};
    std::vector<double> losses(static_cast<std::size_t>(m), 0.0);
    parallel_for(m, jobs, [&](int i) {
        const Matrix& truth = ds.trajectories[static_cast<std::size_t>(i)];
        StateVector u0(truth.row(0).begin(), truth.row(0).end());
        const Trajectory sim = rollout(u0, scheme, system, ds.dt_coarse, truth.rows - 1, opts);
        losses[static_cast<std::size_t>(i)] = compute_loss(sim.states, truth, c_n);
    });
    double acc = 0.0;
    for (double l : losses) acc += l;
    return acc / static_cast<double>(m);
}

TrainReport fit(AttentionModule& module, const OdeSystem& system, const TrajectoryDataset& train,
                const TrajectoryDataset& val, Scheme scheme, StepMode mode,
                const TrainConfig& cfg, std::ostream* log, int start_epoch) {
    if (cfg.epochs < 1) throw ConfigError("fit: epochs must be >= 1");
    if (start_epoch < 0 || start_epoch >= cfg.epochs)
        throw ConfigError("fit: start_epoch must lie in [0, epochs)");
    if (train.size() == 0 || val.size() == 0)
        throw ConfigError("fit: train and validation splits must be non-empty");

    TrainReport report;
    report.c_n_used = cfg.c_n > 0.0 ? cfg.c_n : auto_loss_scale(train);
    OptimizerState opt = OptimizerState::zeros_like(module);

    AttentionModule best = module;
    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = train_epoch(module, system, train, scheme, mode, cfg, report.c_n_used,
                                       opt, epoch, &stats.mean_attention,
                                       &report.skipped_updates);
        stats.val_loss =
            evaluate_loss(&module, system, val, scheme, mode, report.c_n_used, cfg.jobs);
        stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                            .count();
        report.epochs.push_back(stats);
        if (stats.val_loss < report.best_val_loss) {
            report.best_val_loss = stats.val_loss;
            report.best_epoch = epoch;
            best = module;
        }
        if (log != nullptr)
            *log << "epoch " << epoch << " train_loss " << stats.train_loss << " val_loss "
                 << stats.val_loss << " (" << stats.seconds << " s)\n";
    }
    module = best; // leave the caller at the best-validation checkpoint
    return report;
}

void write_curves_csv(const TrainReport& report, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open curves CSV for writing: " + path.string());
    os.precision(17);
    os << "epoch,train_loss,val_loss,seconds\n";
    for (const EpochStats& e : report.epochs)
        os << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.seconds << '\n';
}

} // namespace attsolver
