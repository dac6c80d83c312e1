#include "attsolver/systems.hpp"

#include <cmath>

#include "attsolver/errors.hpp"

namespace attsolver {

SpringMassSystem::SpringMassSystem(int n_masses, double mass, double spring_k) {
    if (n_masses < 1) throw ContractError("SpringMassSystem: need at least one mass");
    if (!(mass > 0.0) || !(spring_k > 0.0))
        throw ContractError("SpringMassSystem: masses and spring constants must be positive");
    masses_.assign(static_cast<std::size_t>(n_masses), mass);
    springs_.assign(static_cast<std::size_t>(n_masses) + 1, spring_k);
}

SpringMassSystem::SpringMassSystem(std::vector<double> masses, std::vector<double> springs)
    : masses_(std::move(masses)), springs_(std::move(springs)) {
    if (masses_.empty() || springs_.size() != masses_.size() + 1)
        throw ContractError("SpringMassSystem: need n masses and n+1 springs");
    for (double m : masses_)
        if (!(m > 0.0)) throw ContractError("SpringMassSystem: masses must be positive");
    for (double k : springs_)
        if (!(k > 0.0)) throw ContractError("SpringMassSystem: spring constants must be positive");
}

void SpringMassSystem::rhs(std::span<const double> u, std::span<double> du) const {
    const int n = n_masses();
    check_dimension(u, 2 * n, "SpringMassSystem::rhs");
    const double* q = u.data();
    const double* p = u.data() + n;
    for (int i = 0; i < n; ++i) du[i] = p[i] / masses_[i];
    for (int i = 0; i < n; ++i) {
        const double q_prev = (i == 0) ? 0.0 : q[i - 1];   // wall: q_0 = 0
        const double q_next = (i == n - 1) ? 0.0 : q[i + 1]; // wall: q_{n+1} = 0
        du[n + i] = springs_[i] * (q_prev - q[i]) + springs_[i + 1] * (q_next - q[i]);
    }
}

double SpringMassSystem::energy(std::span<const double> u) const {
    const int n = n_masses();
    check_state(u, 2 * n, "SpringMassSystem::energy");
    const double* q = u.data();
    const double* p = u.data() + n;
    double h = 0.0;
    for (int i = 0; i < n; ++i) h += p[i] * p[i] / (2.0 * masses_[i]);
    for (int i = 0; i <= n; ++i) {
        const double left = (i == 0) ? 0.0 : q[i - 1];
        const double right = (i == n) ? 0.0 : q[i];
        const double stretch = right - left;
        h += 0.5 * springs_[i] * stretch * stretch;
    }
    return h;
}

Matrix SpringMassSystem::system_matrix() const {
    const int n = n_masses();
    Matrix a(2 * n, 2 * n);
    for (int i = 0; i < n; ++i) a(i, n + i) = 1.0 / masses_[i];
    for (int i = 0; i < n; ++i) {
        a(n + i, i) = -(springs_[i] + springs_[i + 1]);
        if (i > 0) a(n + i, i - 1) = springs_[i];
        if (i < n - 1) a(n + i, i + 1) = springs_[i + 1];
    }
    return a;
}

ElasticPendulumSystem::ElasticPendulumSystem(double k, double m, double l0, double g)
    : k_(k), m_(m), l0_(l0), g_(g) {
    if (!(k > 0.0) || !(m > 0.0) || !(l0 > 0.0) || !(g > 0.0))
        throw ContractError("ElasticPendulumSystem: k, m, l0, g must be positive");
}

void ElasticPendulumSystem::rhs(std::span<const double> u, std::span<double> du) const {
    check_dimension(u, 4, "ElasticPendulumSystem::rhs");
    const double theta = u[0], r = u[1], theta_dot = u[2], r_dot = u[3];
    if (r <= 0.0)
        throw SingularStateError("ElasticPendulumSystem: r <= 0 (pendulum length collapsed)");
    du[0] = theta_dot;
    du[1] = r_dot;
    du[2] = (-g_ * std::sin(theta) - theta_dot * r_dot) / r;
    du[3] = r * theta_dot * theta_dot - (k_ / m_) * (r - l0_) + g_ * std::cos(theta);
}

KLinkPendulumSystem::KLinkPendulumSystem(int links, double g) : links_(links), g_(g) {
    if (links < 1) throw ContractError("KLinkPendulumSystem: K must be >= 1");
    if (!(g > 0.0)) throw ContractError("KLinkPendulumSystem: g must be positive");
}

LinearSystem KLinkPendulumSystem::assemble(std::span<const double> u) const {
    const int k = links_;
    check_dimension(u, 2 * k, "KLinkPendulumSystem::assemble");
    const double* theta = u.data();
    const double* omega = u.data() + k;

    LinearSystem sys;
    sys.A = Matrix(k, k);
    sys.b.assign(static_cast<std::size_t>(k), 0.0);
    for (int i = 0; i < k; ++i) {
        double bi = 0.0;
        for (int j = 0; j < k; ++j) {
            // 1-based coefficient K - max(i,j) + 1 == k - max(i,j) in 0-based indexing.
            const double c = static_cast<double>(k - std::max(i, j));
            const double delta = theta[i] - theta[j];
            sys.A(i, j) = c * std::cos(delta);
            bi -= c * omega[j] * omega[j] * std::sin(delta);
        }
        bi -= static_cast<double>(k - i) * g_ * std::sin(theta[i]);
        sys.b[i] = bi;
    }
    return sys;
}

void KLinkPendulumSystem::rhs(std::span<const double> u, std::span<double> du) const {
    const int k = links_;
    const LinearSystem sys = assemble(u);
    const std::vector<double> acc = solve_linear(sys);
    for (int i = 0; i < k; ++i) du[i] = u[k + i];
    for (int i = 0; i < k; ++i) du[k + i] = acc[i];
}

void HarmonicOscillatorSystem::rhs(std::span<const double> u, std::span<double> du) const {
    check_dimension(u, 2, "HarmonicOscillatorSystem::rhs");
    du[0] = u[1];
    du[1] = -u[0];
}

StateVector HarmonicOscillatorSystem::exact(const StateVector& u0, double t) {
    const double c = std::cos(t), s = std::sin(t);
    return {u0[0] * c + u0[1] * s, -u0[0] * s + u0[1] * c};
}

std::unique_ptr<OdeSystem> make_system(const SystemParams& params) {
    if (params.id == "spring_mass")
        return std::make_unique<SpringMassSystem>(params.masses, params.mass, params.spring_k);
    if (params.id == "elastic_pendulum")
        return std::make_unique<ElasticPendulumSystem>(params.k, params.m, params.l0, params.g);
    if (params.id == "klink")
        return std::make_unique<KLinkPendulumSystem>(params.links, params.g);
    if (params.id == "harmonic")
        return std::make_unique<HarmonicOscillatorSystem>();
    throw ConfigError("unknown system id '" + params.id +
                      "' (expected spring_mass | elastic_pendulum | klink | harmonic)");
}

} // namespace attsolver
