#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "attsolver/attention.hpp"
#include "attsolver/errors.hpp"
#include "attsolver/rng.hpp"

using namespace attsolver;
namespace fs = std::filesystem;

namespace {

/// Module with every tensor (including the final layer) randomized, so
/// gradient probes see nonzero signal everywhere.
AttentionModule random_module(int d, int d1, int h, std::uint64_t seed,
                              bool train_acts = true) {
    ModuleOptions opts;
    opts.d1 = d1;
    opts.h = h;
    opts.train_activations = train_acts;
    AttentionModule m = init_module(d, opts, seed);
    Rng rng(mix_seed(seed, 777));
    Matrix& last = m.weights.back();
    const double bound = std::sqrt(6.0 / (m.layer_input_size(h - 1) + d));
    for (double& w : last.a) w = rng.uniform(-bound, bound);
    m.output_offset = rng.uniform(-0.5, 0.5);
    return m;
}

/// Scalar probe loss J = sum_i g_i * out_i, whose parameter gradient is what
/// mlp_backward accumulates for upstream = g.
double probe_loss(const AttentionModule& m, const std::vector<double>& x,
                  const std::vector<double>& g) {
    const StateVector out = mlp_forward(m, x);
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * out[i];
    return acc;
}

struct MaxRelError {
    double value = 0.0;
    void update(double analytic, double fd) {
        // The 1e-4 floor turns the bound into an absolute 1e-9 for components
        // below the central-difference noise floor (~1e-16/eps = 1e-10).
        const double denom = std::max(std::abs(analytic) + std::abs(fd), 1e-4);
        value = std::max(value, std::abs(analytic - fd) / denom);
    }
};

fs::path temp_file(const char* name) {
    return fs::temp_directory_path() / name;
}

} // namespace

TEST_CASE("all-zero weights produce the zero vector") {
    ModuleOptions opts;
    opts.d1 = 8;
    const AttentionModule m = init_module(3, opts, 1);
    AttentionModule zeroed = m;
    for (Matrix& w : zeroed.weights)
        for (double& x : w.a) x = 0.0;
    const StateVector out = mlp_forward(zeroed, {0.5, -1.0, 2.0});
    for (double v : out) CHECK(v == 0.0);
}

TEST_CASE("hand matrix product: ones row and ones column sum the input") {
    AttentionModule m;
    m.d = 3;
    m.d1 = 1;
    m.h = 2;
    m.weights = {Matrix(1, 3), Matrix(3, 1)};
    for (double& w : m.weights[0].a) w = 1.0;
    for (double& w : m.weights[1].a) w = 1.0;
    m.acts = {identity_activation()};
    const StateVector out = mlp_forward(m, {1.0, 2.0, 3.0});
    REQUIRE(out.size() == 3);
    for (double v : out) CHECK(v == doctest::Approx(6.0));
}

TEST_CASE("output shape equals input shape for random weights") {
    const AttentionModule m = random_module(4, 8, 3, 11);
    const StateVector out = mlp_forward(m, {0.1, 0.2, 0.3, 0.4});
    CHECK(out.size() == 4);
}

TEST_CASE("fresh module is neutral for any input") {
    ModuleOptions opts;
    opts.d1 = 16;
    const AttentionModule m = init_module(5, opts, 99);
    const StateVector out = mlp_forward(m, {1.0, -2.0, 0.5, 3.0, -0.1});
    for (double v : out) CHECK(v == 0.0);
}

TEST_CASE("hidden weights respect the Glorot bound, final layer is zero") {
    ModuleOptions opts;
    opts.d1 = 32;
    opts.h = 3;
    const AttentionModule m = init_module(4, opts, 5);
    for (int l = 0; l + 1 < m.h; ++l) {
        const double bound =
            std::sqrt(6.0 / (m.layer_input_size(l) + m.layer_output_size(l)));
        for (double w : m.weights[l].a) {
            CHECK(std::abs(w) <= bound);
        }
    }
    for (double w : m.weights.back().a) CHECK(w == 0.0);
}

TEST_CASE("init is deterministic per seed") {
    ModuleOptions opts;
    opts.d1 = 8;
    const AttentionModule a = init_module(3, opts, 42);
    const AttentionModule b = init_module(3, opts, 42);
    const AttentionModule c = init_module(3, opts, 43);
    CHECK(a.same_parameters(b));
    CHECK(!a.same_parameters(c));
}

TEST_CASE("upstream zero gives all-zero gradients") {
    const AttentionModule m = random_module(3, 6, 2, 7);
    ForwardCache cache;
    std::vector<double> out(3);
    mlp_forward(m, std::vector<double>{0.3, -0.2, 0.9}, out, cache);
    GradientSet g = GradientSet::zeros_like(m);
    mlp_backward(m, cache, std::vector<double>(3, 0.0), g);
    for (const Matrix& w : g.weights)
        for (double v : w.a) CHECK(v == 0.0);
    CHECK(g.output_offset == 0.0);
}

TEST_CASE("analytic gradients match central differences: 50 random probes") {
    Rng rng(2024);
    MaxRelError worst;
    const double eps = 1e-6;
    for (int probe = 0; probe < 50; ++probe) {
        const int d = 1 + static_cast<int>(rng.below(4));
        const int d1 = 1 + static_cast<int>(rng.below(8));
        const int h = 2 + static_cast<int>(rng.below(3));
        AttentionModule m = random_module(d, d1, h, 1000 + probe);
        std::vector<double> x(d), g(d);
        for (double& v : x) v = rng.uniform(-1.5, 1.5);
        for (double& v : g) v = rng.uniform(-1.0, 1.0);

        ForwardCache cache;
        std::vector<double> out(d);
        mlp_forward(m, x, out, cache);
        GradientSet grads = GradientSet::zeros_like(m);
        mlp_backward(m, cache, g, grads);

        // Weight gradients.
        for (int l = 0; l < m.h; ++l) {
            for (std::size_t k = 0; k < m.weights[l].a.size(); ++k) {
                AttentionModule hi = m, lo = m;
                hi.weights[l].a[k] += eps;
                lo.weights[l].a[k] -= eps;
                const double fd = (probe_loss(hi, x, g) - probe_loss(lo, x, g)) / (2 * eps);
                worst.update(grads.weights[l].a[k], fd);
            }
        }
        // Activation coefficient gradients.
        for (int l = 0; l + 1 < m.h; ++l) {
            for (int k = 0; k < RationalActivation::kCoeffCount; ++k) {
                AttentionModule hi = m, lo = m;
                auto& ahi = hi.acts[l];
                auto& alo = lo.acts[l];
                if (k < 4) {
                    ahi.p[k] += eps;
                    alo.p[k] -= eps;
                } else {
                    ahi.q[k - 4] += eps;
                    alo.q[k - 4] -= eps;
                }
                const double fd = (probe_loss(hi, x, g) - probe_loss(lo, x, g)) / (2 * eps);
                worst.update(grads.acts[l][k], fd);
            }
        }
        // Output offset gradient.
        {
            AttentionModule hi = m, lo = m;
            hi.output_offset += eps;
            lo.output_offset -= eps;
            const double fd = (probe_loss(hi, x, g) - probe_loss(lo, x, g)) / (2 * eps);
            worst.update(grads.output_offset, fd);
        }
    }
    CHECK(worst.value < 1e-5);
}

TEST_CASE("two accumulated backward calls equal the sum of individual sets") {
    const AttentionModule m = random_module(3, 5, 2, 55);
    const std::vector<double> x1 = {0.3, -0.7, 1.1}, x2 = {-0.2, 0.5, 0.8};
    const std::vector<double> g1 = {1.0, 0.5, -0.25}, g2 = {-0.5, 0.75, 1.5};

    ForwardCache c1, c2;
    std::vector<double> out(3);
    GradientSet both = GradientSet::zeros_like(m);
    mlp_forward(m, x1, out, c1);
    mlp_backward(m, c1, g1, both);
    mlp_forward(m, x2, out, c2);
    mlp_backward(m, c2, g2, both);

    GradientSet a = GradientSet::zeros_like(m), b = GradientSet::zeros_like(m);
    mlp_backward(m, c1, g1, a);
    mlp_backward(m, c2, g2, b);
    a.add(b);

    for (int l = 0; l < m.h; ++l)
        for (std::size_t k = 0; k < both.weights[l].a.size(); ++k)
            CHECK(both.weights[l].a[k] == doctest::Approx(a.weights[l].a[k]).epsilon(1e-14));
    CHECK(both.output_offset == doctest::Approx(a.output_offset).epsilon(1e-14));
}

TEST_CASE("skip connection adds the input; scaled input consumed as given") {
    ModuleOptions opts;
    opts.d1 = 4;
    opts.skip_connection = true;
    const AttentionModule m = init_module(2, opts, 3);
    // Zero final layer: output = input (the skip path alone).
    const StateVector out = mlp_forward(m, {0.25, -0.75});
    CHECK(out[0] == 0.25);
    CHECK(out[1] == -0.75);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    const AttentionModule m = random_module(3, 7, 3, 2718);
    const fs::path path = temp_file("attsolver_test_module.attw");
    save_module(m, path);
    const AttentionModule back = load_module(path);
    CHECK(m.same_parameters(back));
    fs::remove(path);
}

TEST_CASE("load_module re-applies configuration switches") {
    ModuleOptions opts;
    opts.d1 = 4;
    opts.skip_connection = true;
    opts.input_scaled = true;
    opts.train_activations = false;
    const AttentionModule m = init_module(2, opts, 9);
    const fs::path path = temp_file("attsolver_test_flags.attw");
    save_module(m, path);

    const AttentionModule plain = load_module(path);
    CHECK(!plain.skip_connection);
    CHECK(!plain.input_scaled);

    const AttentionModule with_opts = load_module(path, &opts);
    CHECK(with_opts.skip_connection);
    CHECK(with_opts.input_scaled);
    CHECK(!with_opts.train_activations);
    fs::remove(path);
}

TEST_CASE("corrupted checkpoints raise distinct errors") {
    const AttentionModule m = random_module(2, 3, 2, 14);
    const fs::path path = temp_file("attsolver_test_corrupt.attw");
    save_module(m, path);

    auto corrupt = [&](auto fn) {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
        in.close();
        fn(bytes);
        const fs::path bad = temp_file("attsolver_test_corrupt_bad.attw");
        std::ofstream out(bad, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.close();
        return bad;
    };

    SUBCASE("bad magic") {
        const fs::path bad = corrupt([](std::string& b) { b[0] = 'X'; });
        CHECK_THROWS_AS(load_module(bad), BadMagicError);
        fs::remove(bad);
    }
    SUBCASE("unsupported version") {
        const fs::path bad = corrupt([](std::string& b) { b[4] = 99; });
        CHECK_THROWS_AS(load_module(bad), VersionError);
        fs::remove(bad);
    }
    SUBCASE("truncated payload") {
        const fs::path bad = corrupt([](std::string& b) { b.resize(b.size() - 9); });
        CHECK_THROWS_AS(load_module(bad), TruncationError);
        fs::remove(bad);
    }
    SUBCASE("trailing bytes") {
        const fs::path bad = corrupt([](std::string& b) { b += "extra"; });
        CHECK_THROWS_AS(load_module(bad), ParseError);
        fs::remove(bad);
    }
    fs::remove(path);
}
