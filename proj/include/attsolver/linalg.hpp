#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace attsolver {

/// Dense row-major matrix of doubles.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }
    std::span<double> row(int i) { return {a.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)}; }
    std::span<const double> row(int i) const { return {a.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)}; }

    bool operator==(const Matrix&) const = default;
};

/// Square linear system A x = b.
struct LinearSystem {
    Matrix A;
    std::vector<double> b;
};

// y = M x
void gemv(const Matrix& m, std::span<const double> x, std::span<double> y);
// y = M^T x
void gemv_transposed(const Matrix& m, std::span<const double> x, std::span<double> y);
// M += g x^T (outer-product accumulate)
void rank1_update(Matrix& m, std::span<const double> g, std::span<const double> x);

/// LU solve with partial pivoting. Throws SingularMatrixError when a pivot
/// falls below 1e-14 * max-row-sum norm of A.
std::vector<double> solve_linear(const LinearSystem& sys);

/// Largest singular value via power iteration on M^T M.
double spectral_norm(const Matrix& m);

double norm2(std::span<const double> v);
double norm_inf(std::span<const double> v);
bool all_finite(std::span<const double> v);

} // namespace attsolver
