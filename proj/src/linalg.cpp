#include "attsolver/linalg.hpp"

#include <cmath>
#include <cstdlib>

#include "attsolver/errors.hpp"
#include "attsolver/rng.hpp"

namespace attsolver {

void gemv(const Matrix& m, std::span<const double> x, std::span<double> y) {
    for (int i = 0; i < m.rows; ++i) {
        const double* row = m.a.data() + static_cast<std::size_t>(i) * m.cols;
        double acc = 0.0;
        for (int j = 0; j < m.cols; ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
}

void gemv_transposed(const Matrix& m, std::span<const double> x, std::span<double> y) {
    for (int j = 0; j < m.cols; ++j) y[j] = 0.0;
    for (int i = 0; i < m.rows; ++i) {
        const double* row = m.a.data() + static_cast<std::size_t>(i) * m.cols;
        const double xi = x[i];
        for (int j = 0; j < m.cols; ++j) y[j] += row[j] * xi;
    }
}

void rank1_update(Matrix& m, std::span<const double> g, std::span<const double> x) {
    for (int i = 0; i < m.rows; ++i) {
        double* row = m.a.data() + static_cast<std::size_t>(i) * m.cols;
        const double gi = g[i];
        for (int j = 0; j < m.cols; ++j) row[j] += gi * x[j];
    }
}

std::vector<double> solve_linear(const LinearSystem& sys) {
    const int n = sys.A.rows;
    if (sys.A.cols != n || static_cast<int>(sys.b.size()) != n)
        throw ContractError("solve_linear: A must be square and match b");

    double norm = 0.0; // max-row-sum norm ||A||_inf
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += std::abs(sys.A(i, j));
        norm = std::max(norm, s);
    }
    const double pivot_floor = 1e-14 * norm;

    Matrix lu = sys.A;
    std::vector<double> x = sys.b;
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;

    for (int col = 0; col < n; ++col) {
        int piv = col;
        double best = std::abs(lu(col, col));
        for (int r = col + 1; r < n; ++r) {
            const double v = std::abs(lu(r, col));
            if (v > best) {
                best = v;
                piv = r;
            }
        }
        if (!(best > pivot_floor))
            throw SingularMatrixError("solve_linear: matrix is numerically singular");
        if (piv != col) {
            for (int j = 0; j < n; ++j) std::swap(lu(piv, j), lu(col, j));
            std::swap(x[piv], x[col]);
        }
        const double d = lu(col, col);
        for (int r = col + 1; r < n; ++r) {
            const double f = lu(r, col) / d;
            lu(r, col) = f;
            for (int j = col + 1; j < n; ++j) lu(r, j) -= f * lu(col, j);
            x[r] -= f * x[col];
        }
    }
    for (int i = n - 1; i >= 0; --i) {
        double acc = x[i];
        for (int j = i + 1; j < n; ++j) acc -= lu(i, j) * x[j];
        x[i] = acc / lu(i, i);
    }
    return x;
}

double spectral_norm(const Matrix& m) {
    if (m.rows == 0 || m.cols == 0) return 0.0;
    std::vector<double> v(m.cols), mv(m.rows), w(m.cols);
    Rng rng(0x5eed5eedULL);
    for (double& vi : v) vi = rng.uniform(-1.0, 1.0);

    double sigma = 0.0;
    for (int it = 0; it < 500; ++it) {
        gemv(m, v, mv);
        gemv_transposed(m, mv, w);
        const double nw = norm2(w);
        if (nw == 0.0) return 0.0;
        for (int j = 0; j < m.cols; ++j) v[j] = w[j] / nw;
        const double next = std::sqrt(nw); // ||M^T M v|| -> sigma^2 at convergence
        if (it > 10 && std::abs(next - sigma) < 1e-14 * std::max(1.0, next)) {
            sigma = next;
            break;
        }
        sigma = next;
    }
    return sigma;
}

double norm2(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

double norm_inf(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc = std::max(acc, std::abs(x));
    return acc;
}

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

} // namespace attsolver
