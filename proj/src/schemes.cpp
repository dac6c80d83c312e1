#include "attsolver/schemes.hpp"

#include "attsolver/errors.hpp"

namespace attsolver {

int scheme_order(Scheme scheme) {
    switch (scheme) {
        case Scheme::Euler: return 1;
        case Scheme::ImprovedEuler: return 2;
        case Scheme::RK3: return 3;
        case Scheme::RK4: return 4;
    }
    throw ContractError("scheme_order: unknown scheme");
}

std::string_view scheme_name(Scheme scheme) {
    switch (scheme) {
        case Scheme::Euler: return "euler";
        case Scheme::ImprovedEuler: return "improved_euler";
        case Scheme::RK3: return "rk3";
        case Scheme::RK4: return "rk4";
    }
    throw ContractError("scheme_name: unknown scheme");
}

Scheme scheme_from_name(std::string_view name) {
    if (name == "euler") return Scheme::Euler;
    if (name == "improved_euler") return Scheme::ImprovedEuler;
    if (name == "rk3") return Scheme::RK3;
    if (name == "rk4") return Scheme::RK4;
    throw ConfigError("unknown scheme '" + std::string(name) +
                      "' (expected euler | improved_euler | rk3 | rk4)");
}

void integration_term(Scheme scheme, const OdeSystem& system, std::span<const double> u,
                      double dt, std::span<double> s, SchemeWorkspace& ws) {
    const int d = system.dimension();
    check_dimension(u, d, "integration_term");
    if (static_cast<int>(s.size()) != d)
        throw ContractError("integration_term: output length != system dimension");
    if (!(dt > 0.0)) throw ContractError("integration_term: dt must be positive");
    ws.resize(d);

    switch (scheme) {
        case Scheme::Euler: {
            system.rhs(u, s);
            return;
        }
        case Scheme::ImprovedEuler: {
            system.rhs(u, ws.k1);
            for (int i = 0; i < d; ++i) ws.tmp[i] = u[i] + dt * ws.k1[i];
            system.rhs(ws.tmp, ws.k2);
            for (int i = 0; i < d; ++i) s[i] = 0.5 * (ws.k1[i] + ws.k2[i]);
            return;
        }
        case Scheme::RK3: {
            system.rhs(u, ws.k1);
            for (int i = 0; i < d; ++i) ws.tmp[i] = u[i] + 0.5 * dt * ws.k1[i];
            system.rhs(ws.tmp, ws.k2);
            for (int i = 0; i < d; ++i) ws.tmp[i] = u[i] - dt * ws.k1[i] + 2.0 * dt * ws.k2[i];
            system.rhs(ws.tmp, ws.k3);
            for (int i = 0; i < d; ++i)
                s[i] = (1.0 / 6.0) * ws.k1[i] + (2.0 / 3.0) * ws.k2[i] + (1.0 / 6.0) * ws.k3[i];
            return;
        }
        case Scheme::RK4: {
            system.rhs(u, ws.k1);
            for (int i = 0; i < d; ++i) ws.tmp[i] = u[i] + 0.5 * dt * ws.k1[i];
            system.rhs(ws.tmp, ws.k2);
            for (int i = 0; i < d; ++i) ws.tmp[i] = u[i] + 0.5 * dt * ws.k2[i];
            system.rhs(ws.tmp, ws.k3);
            for (int i = 0; i < d; ++i) ws.tmp[i] = u[i] + dt * ws.k3[i];
            system.rhs(ws.tmp, ws.k4);
            for (int i = 0; i < d; ++i)
                s[i] = (1.0 / 6.0) * ws.k1[i] + (1.0 / 3.0) * ws.k2[i] + (1.0 / 3.0) * ws.k3[i] +
                       (1.0 / 6.0) * ws.k4[i];
            return;
        }
    }
    throw ContractError("integration_term: unknown scheme");
}

StateVector integration_term(Scheme scheme, const OdeSystem& system, const StateVector& u,
                             double dt) {
    StateVector s(u.size());
    SchemeWorkspace ws;
    integration_term(scheme, system, u, dt, s, ws);
    return s;
}

} // namespace attsolver
