#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "attsolver/linalg.hpp"
#include "attsolver/state.hpp"

namespace attsolver {

/// Right-hand side f(u) of an autonomous first-order ODE u' = f(u).
class OdeSystem {
  public:
    virtual ~OdeSystem() = default;

    virtual int dimension() const = 0;
    virtual std::string_view id() const = 0;

    /// Writes f(u) into du. Pure: same input gives bitwise-identical output.
    virtual void rhs(std::span<const double> u, std::span<double> du) const = 0;

    StateVector rhs(const StateVector& u) const {
        StateVector du(u.size());
        rhs(std::span<const double>(u), std::span<double>(du));
        return du;
    }
};

/// Chain of n masses between two walls, springs k_1..k_{n+1}, layout
/// u = [q_1..q_n, p_1..p_n] with boundary q_0 = q_{n+1} = 0:
///   dq_i/dt = p_i / m_i
///   dp_i/dt = k_i (q_{i-1} - q_i) + k_{i+1} (q_{i+1} - q_i)
class SpringMassSystem final : public OdeSystem {
  public:
    SpringMassSystem(int n_masses, double mass = 1.0, double spring_k = 1.0);
    SpringMassSystem(std::vector<double> masses, std::vector<double> springs);

    int dimension() const override { return 2 * static_cast<int>(masses_.size()); }
    std::string_view id() const override { return "spring_mass"; }
    using OdeSystem::rhs;
    void rhs(std::span<const double> u, std::span<double> du) const override;

    int n_masses() const { return static_cast<int>(masses_.size()); }
    const std::vector<double>& masses() const { return masses_; }
    const std::vector<double>& springs() const { return springs_; }

    /// H = sum p_i^2 / (2 m_i) + sum_{i=1..n+1} k_i (q_i - q_{i-1})^2 / 2
    /// with the wall convention q_0 = q_{n+1} = 0. Conserved by the exact flow.
    double energy(std::span<const double> u) const;

    /// Exact Jacobian of the (linear) dynamics: f(u) = A u.
    Matrix system_matrix() const;

  private:
    std::vector<double> masses_;  // m_1..m_n
    std::vector<double> springs_; // k_1..k_{n+1}
};

/// Pendulum on a spring, state u = (theta, r, theta_dot, r_dot):
///   theta'' = (1/r)(-g sin theta - theta_dot r_dot)
///   r''     = r theta_dot^2 - (k/m)(r - l0) + g cos theta
/// r <= 0 is a singular state (division by r).
class ElasticPendulumSystem final : public OdeSystem {
  public:
    ElasticPendulumSystem(double k = 40.0, double m = 1.0, double l0 = 10.0, double g = 9.8);

    int dimension() const override { return 4; }
    std::string_view id() const override { return "elastic_pendulum"; }
    using OdeSystem::rhs;
    void rhs(std::span<const double> u, std::span<double> du) const override;

    double k() const { return k_; }
    double m() const { return m_; }
    double l0() const { return l0_; }
    double g() const { return g_; }

  private:
    double k_, m_, l0_, g_;
};

/// K rigid links (unit length, unit mass) hanging from a pivot, state
/// u = (theta_1..theta_K, omega_1..omega_K). Accelerations solve A x = b with
///   A_ij = [K - max(i,j) + 1] cos(theta_i - theta_j)
///   b_i  = -sum_j [K - max(i,j) + 1] omega_j^2 sin(theta_i - theta_j)
///          - (K - i + 1) g sin(theta_i)
class KLinkPendulumSystem final : public OdeSystem {
  public:
    explicit KLinkPendulumSystem(int links, double g = 9.8);

    int dimension() const override { return 2 * links_; }
    std::string_view id() const override { return "klink"; }
    using OdeSystem::rhs;
    void rhs(std::span<const double> u, std::span<double> du) const override;

    /// Builds the mass matrix A and torque vector b for the current state.
    LinearSystem assemble(std::span<const double> u) const;

    int links() const { return links_; }
    double g() const { return g_; }

  private:
    int links_;
    double g_;
};

/// q' = p, p' = -q. Closed-form solution q(t) = q0 cos t + p0 sin t; used by
/// order-verification and convergence probes.
class HarmonicOscillatorSystem final : public OdeSystem {
  public:
    int dimension() const override { return 2; }
    std::string_view id() const override { return "harmonic"; }
    using OdeSystem::rhs;
    void rhs(std::span<const double> u, std::span<double> du) const override;

    static StateVector exact(const StateVector& u0, double t);
};

/// System parameters as read from config (only the fields relevant to the
/// chosen id are used).
struct SystemParams {
    std::string id = "spring_mass";
    int masses = 2;       // spring_mass
    double mass = 1.0;    // spring_mass per-mass m_i
    double spring_k = 1.0;// spring_mass per-spring k_i
    double k = 40.0;      // elastic_pendulum spring constant
    double m = 1.0;       // elastic_pendulum ball mass
    double l0 = 10.0;     // elastic_pendulum rest length
    int links = 2;        // klink
    double g = 9.8;       // elastic_pendulum / klink gravity
};

std::unique_ptr<OdeSystem> make_system(const SystemParams& params);

} // namespace attsolver
