#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "attsolver/state.hpp"
#include "attsolver/systems.hpp"

namespace attsolver {

/// Classical explicit integration schemes; ordered by global truncation order.
enum class Scheme { Euler, ImprovedEuler, RK3, RK4 };

int scheme_order(Scheme scheme);
std::string_view scheme_name(Scheme scheme);
Scheme scheme_from_name(std::string_view name);

/// Stage buffers for integration_term; reusable across steps to avoid
/// per-step allocation in hot loops.
struct SchemeWorkspace {
    std::vector<double> k1, k2, k3, k4, tmp;
    void resize(int d) {
        k1.resize(d); k2.resize(d); k3.resize(d); k4.resize(d); tmp.resize(d);
    }
};

/// Returns the integration term S(f, u, dt) — the slope combination, NOT
/// multiplied by dt. One explicit step is u + S * dt.
///
///   Euler:          S = f(u)
///   ImprovedEuler:  S = 1/2 [f(u) + f(u + dt f(u))]
///   RK3:            S = 1/6 K1 + 2/3 K2 + 1/6 K3,
///                   K1 = f(u), K2 = f(u + dt/2 K1), K3 = f(u - dt K1 + 2 dt K2)
///   RK4:            S = 1/6 J1 + 1/3 J2 + 1/3 J3 + 1/6 J4,
///                   J1 = f(u), J2 = f(u + dt/2 J1), J3 = f(u + dt/2 J2),
///                   J4 = f(u + dt J3)
void integration_term(Scheme scheme, const OdeSystem& system, std::span<const double> u,
                      double dt, std::span<double> s, SchemeWorkspace& ws);

/// Allocating convenience overload.
StateVector integration_term(Scheme scheme, const OdeSystem& system, const StateVector& u,
                             double dt);

} // namespace attsolver
