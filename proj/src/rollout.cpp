#include "attsolver/rollout.hpp"

#include <cmath>

#include "attsolver/errors.hpp"

namespace attsolver {

std::string_view step_mode_name(StepMode mode) {
    switch (mode) {
        case StepMode::Classic: return "classic";
        case StepMode::Additive: return "additive";
        case StepMode::Multiplicative: return "multiplicative";
        case StepMode::NormalizedMultiplicative: return "normalized_multiplicative";
        case StepMode::NeurVec: return "neurvec";
    }
    throw ContractError("step_mode_name: unknown mode");
}

StepMode step_mode_from_name(std::string_view name) {
    if (name == "classic") return StepMode::Classic;
    if (name == "additive") return StepMode::Additive;
    if (name == "multiplicative") return StepMode::Multiplicative;
    if (name == "normalized_multiplicative") return StepMode::NormalizedMultiplicative;
    if (name == "neurvec") return StepMode::NeurVec;
    throw ConfigError("unknown step mode '" + std::string(name) +
                      "' (expected classic | additive | multiplicative | "
                      "normalized_multiplicative | neurvec)");
}

void step(std::span<const double> u, Scheme scheme, const OdeSystem& system, double dt,
          const StepOptions& opts, std::span<double> out, StepWorkspace& ws) {
    const int d = system.dimension();
    check_dimension(u, d, "step");
    if (static_cast<int>(out.size()) != d)
        throw ContractError("step: output length != system dimension");
    if (opts.mode != StepMode::Classic && opts.module == nullptr)
        throw ConfigError("step: mode '" + std::string(step_mode_name(opts.mode)) +
                          "' requires an attention module");

    ws.s.resize(d);
    integration_term(scheme, system, u, dt, ws.s, ws.scheme);

    if (opts.mode == StepMode::Classic) {
        for (int i = 0; i < d; ++i) out[i] = u[i] + ws.s[i] * dt;
        return;
    }

    const AttentionModule& module = *opts.module;
    if (module.d != d)
        throw ConfigError("step: module dimension " + std::to_string(module.d) +
                          " != system dimension " + std::to_string(d));

    ws.module_in.resize(d);
    if (opts.mode == StepMode::NeurVec) {
        for (int i = 0; i < d; ++i) ws.module_in[i] = u[i];
    } else if (module.input_scaled) {
        for (int i = 0; i < d; ++i) ws.module_in[i] = ws.s[i] * dt;
    } else {
        for (int i = 0; i < d; ++i) ws.module_in[i] = ws.s[i];
    }
    ws.comp.resize(d);
    mlp_forward(module, ws.module_in, ws.comp, ws.cache);

    switch (opts.mode) {
        case StepMode::Additive:
        case StepMode::NeurVec:
            for (int i = 0; i < d; ++i) out[i] = u[i] + ws.s[i] * dt + ws.comp[i];
            return;
        case StepMode::Multiplicative:
            for (int i = 0; i < d; ++i) out[i] = u[i] + ws.s[i] * dt * ws.comp[i];
            return;
        case StepMode::NormalizedMultiplicative:
            for (int i = 0; i < d; ++i) out[i] = u[i] + ws.s[i] * dt * (1.0 + ws.comp[i]);
            return;
        case StepMode::Classic: break; // handled above
    }
    throw ContractError("step: unknown mode");
}

StateVector step(const StateVector& u, Scheme scheme, const OdeSystem& system, double dt,
                 const StepOptions& opts) {
    StateVector out(u.size());
    StepWorkspace ws;
    step(u, scheme, system, dt, opts, out, ws);
    return out;
}

Trajectory rollout(const StateVector& u0, Scheme scheme, const OdeSystem& system, double dt,
                   int n_steps, const StepOptions& opts) {
    const int d = system.dimension();
    check_state(u0, d, "rollout");
    if (n_steps < 1) throw ContractError("rollout: need at least one step");

    Trajectory traj;
    traj.states = Matrix(n_steps + 1, d);
    traj.dt = dt;
    for (int i = 0; i < d; ++i) traj.states(0, i) = u0[i];

    StepWorkspace ws;
    for (int t = 0; t < n_steps; ++t) {
        const auto cur = traj.states.row(t);
        auto next = traj.states.row(t + 1);
        bool ok = true;
        try {
            step(cur, scheme, system, dt, opts, next, ws);
        } catch (const SingularStateError&) {
            ok = false;
        } catch (const SingularMatrixError&) {
            ok = false;
        } catch (const ActivationSingularityError&) {
            ok = false;
        }
        if (ok && !all_finite(next)) ok = false;
        if (!ok) {
            traj.exploded = true;
            traj.explosion_step = t + 1;
            for (int r = t + 1; r <= n_steps; ++r)
                for (int i = 0; i < d; ++i) traj.states(r, i) = traj.states(t, i);
            break;
        }
    }
    return traj;
}

double observed_order(Scheme scheme, const HarmonicOscillatorSystem& system, double t_end,
                      double dt) {
    const StateVector u0{1.0, 0.0};
    const StateVector exact = HarmonicOscillatorSystem::exact(u0, t_end);

    auto global_error = [&](double step_size) {
        const int n = static_cast<int>(std::llround(t_end / step_size));
        const Trajectory traj = rollout(u0, scheme, system, step_size, n);
        const auto last = traj.states.row(traj.rows() - 1);
        double acc = 0.0;
        for (int i = 0; i < 2; ++i) acc += (last[i] - exact[i]) * (last[i] - exact[i]);
        return std::sqrt(acc);
    };

    return std::log2(global_error(dt) / global_error(dt * 0.5));
}

} // namespace attsolver
