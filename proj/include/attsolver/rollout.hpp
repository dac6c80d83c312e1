#pragma once

#include <string_view>

#include "attsolver/attention.hpp"
#include "attsolver/schemes.hpp"

namespace attsolver {

/// How one coarse step combines the integration term with the learned module:
///   Classic:                  u + S dt
///   Additive:                 u + S dt + Q[S]            (AttSolver)
///   Multiplicative:           u + (S dt) ⊙ Q[S]
///   NormalizedMultiplicative: u + (S dt) ⊙ (1 + Q~[S])
///   NeurVec:                  u + S dt + Net(u)          (module consumes u)
enum class StepMode { Classic, Additive, Multiplicative, NormalizedMultiplicative, NeurVec };

std::string_view step_mode_name(StepMode mode);
StepMode step_mode_from_name(std::string_view name);

struct StepOptions {
    StepMode mode = StepMode::Classic;
    const AttentionModule* module = nullptr; // required for every mode but Classic
};

/// Reusable buffers for step/rollout hot loops.
struct StepWorkspace {
    SchemeWorkspace scheme;
    std::vector<double> s;         // integration term
    std::vector<double> module_in; // S, S*dt, or u depending on mode/options
    std::vector<double> comp;      // module output
    ForwardCache cache;
};

/// Coarse-grid trajectory; row 0 is the initial condition.
struct Trajectory {
    Matrix states; // (N+1) x d
    double dt = 0.0;
    double t0 = 0.0;
    bool exploded = false;
    int explosion_step = -1; // first row index whose state went non-finite

    int rows() const { return states.rows; }
    int dim() const { return states.cols; }
};

/// One step u -> u_next. Throws ConfigError if a learned mode lacks a module.
/// Domain singularities (r <= 0, singular mass matrix, activation poles)
/// propagate as exceptions; rollout converts them into the exploded flag.
void step(std::span<const double> u, Scheme scheme, const OdeSystem& system, double dt,
          const StepOptions& opts, std::span<double> out, StepWorkspace& ws);

/// Allocating convenience overload.
StateVector step(const StateVector& u, Scheme scheme, const OdeSystem& system, double dt,
                 const StepOptions& opts = {});

/// Iterates step() n_steps times. Explosion is data, not an error: on the
/// first non-finite state (or singular-state/matrix/activation throw) the
/// remaining rows repeat the last finite state and the flag is set.
Trajectory rollout(const StateVector& u0, Scheme scheme, const OdeSystem& system, double dt,
                   int n_steps, const StepOptions& opts = {});

/// Richardson order estimate log2(err(dt)/err(dt/2)) of the global error at
/// T=1 on the closed-form harmonic oscillator. dt=2e-2 keeps even the RK4
/// error (~5e-9) far above accumulated roundoff.
double observed_order(Scheme scheme, const HarmonicOscillatorSystem& system, double t_end = 1.0,
                      double dt = 2e-2);

} // namespace attsolver
