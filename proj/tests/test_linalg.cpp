#include <doctest.h>

#include <cmath>
#include <limits>

#include "attsolver/errors.hpp"
#include "attsolver/linalg.hpp"
#include "attsolver/rng.hpp"

using namespace attsolver;

TEST_CASE("solve_linear: identity system returns b") {
    LinearSystem sys;
    sys.A = Matrix(2, 2);
    sys.A(0, 0) = 1.0;
    sys.A(1, 1) = 1.0;
    sys.b = {3.0, -1.0};
    const auto x = solve_linear(sys);
    CHECK(x[0] == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(x[1] == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("solve_linear: 2x2 hand elimination") {
    // [[2,1],[1,1]] x = (1,0) has the unique solution x = (1,-1).
    LinearSystem sys;
    sys.A = Matrix(2, 2);
    sys.A(0, 0) = 2.0;
    sys.A(0, 1) = 1.0;
    sys.A(1, 0) = 1.0;
    sys.A(1, 1) = 1.0;
    sys.b = {1.0, 0.0};
    const auto x = solve_linear(sys);
    CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(x[1] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("solve_linear: zero matrix is singular") {
    LinearSystem sys;
    sys.A = Matrix(3, 3);
    sys.b = {1.0, 2.0, 3.0};
    CHECK_THROWS_AS(solve_linear(sys), SingularMatrixError);
}

TEST_CASE("solve_linear: non-finite pivot column is singular, not silent") {
    LinearSystem sys;
    sys.A = Matrix(2, 2);
    sys.A(0, 0) = std::numeric_limits<double>::quiet_NaN();
    sys.A(0, 1) = 1.0;
    sys.A(1, 0) = std::numeric_limits<double>::quiet_NaN();
    sys.A(1, 1) = 1.0;
    sys.b = {1.0, 1.0};
    CHECK_THROWS_AS(solve_linear(sys), SingularMatrixError);
}

TEST_CASE("solve_linear: residual bound on random well-conditioned systems") {
    Rng rng(12345);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(5));
        LinearSystem sys;
        sys.A = Matrix(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) sys.A(i, j) = rng.uniform(-1.0, 1.0);
            sys.A(i, i) += static_cast<double>(n); // diagonal dominance
        }
        sys.b.resize(n);
        for (int i = 0; i < n; ++i) sys.b[i] = rng.uniform(-5.0, 5.0);
        const auto x = solve_linear(sys);
        std::vector<double> ax(n, 0.0);
        gemv(sys.A, x, ax);
        double resid = 0.0, bnorm = 0.0;
        for (int i = 0; i < n; ++i) {
            resid = std::max(resid, std::abs(ax[i] - sys.b[i]));
            bnorm = std::max(bnorm, std::abs(sys.b[i]));
        }
        CHECK(resid < 1e-10 * std::max(1.0, bnorm));
    }
}

TEST_CASE("gemv and gemv_transposed hand example") {
    Matrix m(2, 3);
    // [[1,2,3],[4,5,6]]
    m(0, 0) = 1;
    m(0, 1) = 2;
    m(0, 2) = 3;
    m(1, 0) = 4;
    m(1, 1) = 5;
    m(1, 2) = 6;
    std::vector<double> x = {1.0, 0.0, -1.0};
    std::vector<double> y(2);
    gemv(m, x, y);
    CHECK(y[0] == doctest::Approx(-2.0)); // 1 - 3
    CHECK(y[1] == doctest::Approx(-2.0)); // 4 - 6
    std::vector<double> g = {1.0, 1.0};
    std::vector<double> z(3);
    gemv_transposed(m, g, z);
    CHECK(z[0] == doctest::Approx(5.0));
    CHECK(z[1] == doctest::Approx(7.0));
    CHECK(z[2] == doctest::Approx(9.0));
}

TEST_CASE("rank1_update accumulates g x^T") {
    Matrix m(2, 2);
    std::vector<double> g = {1.0, 2.0};
    std::vector<double> x = {3.0, 4.0};
    rank1_update(m, g, x);
    rank1_update(m, g, x);
    CHECK(m(0, 0) == doctest::Approx(6.0));
    CHECK(m(0, 1) == doctest::Approx(8.0));
    CHECK(m(1, 0) == doctest::Approx(12.0));
    CHECK(m(1, 1) == doctest::Approx(16.0));
}

TEST_CASE("spectral_norm on known matrices") {
    Matrix diag(2, 2);
    diag(0, 0) = 3.0;
    diag(1, 1) = 1.0;
    CHECK(spectral_norm(diag) == doctest::Approx(3.0).epsilon(1e-8));

    Matrix nil(2, 2);
    nil(0, 1) = 2.0; // singular values (2, 0)
    CHECK(spectral_norm(nil) == doctest::Approx(2.0).epsilon(1e-8));

    Matrix eye(4, 4);
    for (int i = 0; i < 4; ++i) eye(i, i) = 1.0;
    CHECK(spectral_norm(eye) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("norms and finiteness helpers") {
    std::vector<double> v = {3.0, -4.0};
    CHECK(norm2(v) == doctest::Approx(5.0));
    CHECK(norm_inf(v) == doctest::Approx(4.0));
    CHECK(all_finite(v));
    v[1] = std::numeric_limits<double>::infinity();
    CHECK(!all_finite(v));
    v[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK(!all_finite(v));
}
