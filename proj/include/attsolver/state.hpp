#pragma once

#include <span>
#include <vector>

#include "attsolver/errors.hpp"
#include "attsolver/linalg.hpp"

namespace attsolver {

/// d-dimensional real state of an ODE system.
using StateVector = std::vector<double>;

/// Length check used inside rhs evaluators. Deliberately does not test for
/// finiteness: mid-rollout states may carry Inf/NaN (numerical explosion is a
/// measured outcome, not a usage error) and IEEE arithmetic propagates them.
inline void check_dimension(std::span<const double> u, int expected_dim, const char* where) {
    if (static_cast<int>(u.size()) != expected_dim)
        throw ContractError(std::string(where) + ": state length " + std::to_string(u.size()) +
                            " != system dimension " + std::to_string(expected_dim));
}

/// Full validation for states handed in at API boundaries (initial conditions).
inline void check_state(std::span<const double> u, int expected_dim, const char* where) {
    check_dimension(u, expected_dim, where);
    if (!all_finite(u))
        throw ContractError(std::string(where) + ": state contains non-finite entries");
}

} // namespace attsolver
