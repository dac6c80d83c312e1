#pragma once

#include <array>
#include <span>

namespace attsolver {

/// Elementwise trainable nonlinearity a(x) = P(x) / Qden(x) with
/// P cubic (p[0..3]) and Qden quadratic (q[0..2]). The initial coefficients
/// approximate ReLU and keep Qden root-free: q1^2 - 4 q0 q2 < 0, q2 > 0.
struct RationalActivation {
    std::array<double, 4> p{0.0, 1.0, 0.0, 0.0}; // numerator a0..a3
    std::array<double, 3> q{1.0, 0.0, 0.0};      // denominator b0..b2
    bool learnable = true;

    static constexpr double kSingularityEps = 1e-12;
    static constexpr int kCoeffCount = 7; // p0..p3, q0..q2

    double numerator(double x) const { return p[0] + x * (p[1] + x * (p[2] + x * p[3])); }
    double denominator(double x) const { return q[0] + x * (q[1] + x * q[2]); }

    /// a(x); throws ActivationSingularityError if |Qden(x)| < 1e-12
    /// (coordinate reported by the vector overloads).
    double eval(double x) const;

    /// Value and derivative d a/d x at x (single Qden check).
    void eval_with_derivative(double x, double& value, double& dvalue_dx) const;

    /// Partial derivatives of a(x) w.r.t. the 7 coefficients, written to
    /// dcoeff[0..3] = d a / d p_k, dcoeff[4..6] = d a / d q_k.
    void coefficient_gradients(double x, std::span<double> dcoeff) const;

    /// Elementwise application; reports the offending coordinate on singularity.
    void apply(std::span<const double> x, std::span<double> out) const;

    bool operator==(const RationalActivation&) const = default;
};

/// Identity map: P(x) = x, Qden(x) = 1.
RationalActivation identity_activation();

/// Deterministic ReLU fit of a (3,2) rational on [-3, 3]: a Sanathanan-Koerner
/// least-squares start refined by Lawson-weighted Gauss-Newton in a
/// root-free denominator parameterization. Max fit error ~0.066 (< 0.1 bound).
/// The fit runs once per process and is cached.
const RationalActivation& relu_fit_activation();

/// Max |a(x) - relu(x)| over the fit grid; recorded so tests can assert < 0.1.
double relu_fit_max_error();

} // namespace attsolver
