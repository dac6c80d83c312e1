#include "attsolver/attention.hpp"

#include <cmath>
#include <fstream>

#include "attsolver/binary_io.hpp"
#include "attsolver/errors.hpp"
#include "attsolver/rng.hpp"

namespace attsolver {

std::size_t AttentionModule::parameter_count() const {
    std::size_t n = 1; // output_offset
    for (const Matrix& w : weights) n += w.a.size();
    n += acts.size() * RationalActivation::kCoeffCount;
    return n;
}

bool AttentionModule::same_parameters(const AttentionModule& other) const {
    return d == other.d && d1 == other.d1 && h == other.h && weights == other.weights &&
           acts == other.acts && output_offset == other.output_offset;
}

GradientSet GradientSet::zeros_like(const AttentionModule& module) {
    GradientSet g;
    g.weights.reserve(module.weights.size());
    for (const Matrix& w : module.weights) g.weights.emplace_back(w.rows, w.cols);
    g.acts.assign(module.acts.size(), {});
    g.output_offset = 0.0;
    return g;
}

void GradientSet::reset() {
    for (Matrix& w : weights) std::fill(w.a.begin(), w.a.end(), 0.0);
    for (auto& a : acts) a.fill(0.0);
    output_offset = 0.0;
}

void GradientSet::add(const GradientSet& other) {
    if (weights.size() != other.weights.size() || acts.size() != other.acts.size())
        throw ContractError("GradientSet::add: shape mismatch");
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].rows != other.weights[l].rows || weights[l].cols != other.weights[l].cols)
            throw ContractError("GradientSet::add: weight shape mismatch");
        for (std::size_t i = 0; i < weights[l].a.size(); ++i)
            weights[l].a[i] += other.weights[l].a[i];
    }
    for (std::size_t l = 0; l < acts.size(); ++l)
        for (int k = 0; k < RationalActivation::kCoeffCount; ++k) acts[l][k] += other.acts[l][k];
    output_offset += other.output_offset;
}

void GradientSet::scale(double factor) {
    for (Matrix& w : weights)
        for (double& v : w.a) v *= factor;
    for (auto& a : acts)
        for (double& v : a) v *= factor;
    output_offset *= factor;
}

bool GradientSet::finite() const {
    for (const Matrix& w : weights)
        if (!all_finite(w.a)) return false;
    for (const auto& a : acts)
        if (!all_finite(a)) return false;
    return std::isfinite(output_offset);
}

void mlp_forward(const AttentionModule& module, std::span<const double> input,
                 std::span<double> out, ForwardCache& cache) {
    if (static_cast<int>(input.size()) != module.d || static_cast<int>(out.size()) != module.d)
        throw ContractError("mlp_forward: input/output length must equal module d");
    const int h = module.h;
    cache.input.assign(input.begin(), input.end());
    cache.pre.resize(static_cast<std::size_t>(h - 1));
    cache.post.resize(static_cast<std::size_t>(h - 1));

    const std::vector<double>* cur = &cache.input;
    for (int l = 0; l < h - 1; ++l) {
        auto& z = cache.pre[l];
        auto& y = cache.post[l];
        z.resize(static_cast<std::size_t>(module.layer_output_size(l)));
        y.resize(z.size());
        gemv(module.weights[l], *cur, z);
        module.acts[l].apply(z, y);
        cur = &y;
    }
    gemv(module.weights[h - 1], *cur, out);
    for (double& v : out) v += module.output_offset;
    if (module.skip_connection)
        for (int i = 0; i < module.d; ++i) out[i] += input[i];

    cache.out.assign(out.begin(), out.end());
}

StateVector mlp_forward(const AttentionModule& module, const StateVector& input) {
    StateVector out(input.size());
    ForwardCache cache;
    mlp_forward(module, input, out, cache);
    return out;
}

void mlp_backward(const AttentionModule& module, const ForwardCache& cache,
                  std::span<const double> upstream, GradientSet& grads) {
    const int h = module.h;
    if (static_cast<int>(upstream.size()) != module.d)
        throw ContractError("mlp_backward: upstream length must equal module d");
    if (static_cast<int>(cache.input.size()) != module.d ||
        static_cast<int>(cache.pre.size()) != h - 1)
        throw ContractError("mlp_backward: cache does not match module");
    if (static_cast<int>(grads.weights.size()) != h)
        throw ContractError("mlp_backward: gradient set does not match module");

    for (double gi : upstream) grads.output_offset += gi;

    std::vector<double> g(upstream.begin(), upstream.end());
    std::vector<double> gy;
    std::array<double, RationalActivation::kCoeffCount> dcoeff{};
    for (int l = h - 1; l >= 0; --l) {
        const std::vector<double>& layer_in = (l == 0) ? cache.input : cache.post[l - 1];
        rank1_update(grads.weights[l], g, layer_in);
        if (l == 0) break;

        gy.resize(layer_in.size());
        gemv_transposed(module.weights[l], g, gy);

        const auto& act = module.acts[l - 1];
        const auto& z = cache.pre[l - 1];
        g.resize(gy.size());
        for (std::size_t i = 0; i < gy.size(); ++i) {
            double value, slope;
            act.eval_with_derivative(z[i], value, slope);
            g[i] = gy[i] * slope;
            if (module.train_activations && act.learnable) {
                act.coefficient_gradients(z[i], dcoeff);
                for (int k = 0; k < RationalActivation::kCoeffCount; ++k)
                    grads.acts[l - 1][k] += gy[i] * dcoeff[k];
            }
        }
    }
}

AttentionModule init_module(int d, const ModuleOptions& opts, std::uint64_t seed) {
    if (d < 1 || opts.d1 < 1 || opts.h < 1)
        throw ContractError("init_module: d, d1, h must all be >= 1");
    AttentionModule m;
    m.d = d;
    m.d1 = opts.d1;
    m.h = opts.h;
    m.output_offset = opts.output_offset;
    m.skip_connection = opts.skip_connection;
    m.input_scaled = opts.input_scaled;
    m.train_activations = opts.train_activations;

    Rng rng(mix_seed(seed, 0xa77e'7710'0000'0001ULL));
    m.weights.reserve(static_cast<std::size_t>(m.h));
    for (int l = 0; l < m.h; ++l) {
        const int rows = m.layer_output_size(l);
        const int cols = m.layer_input_size(l);
        Matrix w(rows, cols);
        if (l < m.h - 1) {
            const double bound = std::sqrt(6.0 / (cols + rows));
            for (double& v : w.a) v = rng.uniform(-bound, bound);
        } // final layer stays zero: fresh module is exactly neutral
        m.weights.push_back(std::move(w));
    }
    RationalActivation act = relu_fit_activation();
    act.learnable = opts.train_activations;
    m.acts.assign(static_cast<std::size_t>(m.h - 1), act);
    return m;
}

namespace {
constexpr char kMagic[5] = "ATTW";
constexpr std::uint32_t kVersion = 1;
} // namespace

void save_module(const AttentionModule& module, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open checkpoint for writing: " + path.string());
    write_bytes(os, kMagic, 4);
    write_u32(os, kVersion);
    write_u32(os, static_cast<std::uint32_t>(module.d));
    write_u32(os, static_cast<std::uint32_t>(module.d1));
    write_u32(os, static_cast<std::uint32_t>(module.h));
    for (const Matrix& w : module.weights) write_f64_array(os, w.a);
    write_f64(os, module.output_offset);
    for (const RationalActivation& a : module.acts) {
        write_f64_array(os, a.p);
        write_f64_array(os, a.q);
    }
    if (!os) throw Error("write failed for checkpoint: " + path.string());
}

AttentionModule load_module(const std::filesystem::path& path, const ModuleOptions* opts) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open checkpoint: " + path.string());
    expect_magic(is, kMagic, "checkpoint");
    expect_version(read_u32(is, "checkpoint version"), kVersion, "checkpoint");
    AttentionModule m;
    m.d = static_cast<int>(read_u32(is, "checkpoint d"));
    m.d1 = static_cast<int>(read_u32(is, "checkpoint d1"));
    m.h = static_cast<int>(read_u32(is, "checkpoint h"));
    if (m.d < 1 || m.d1 < 1 || m.h < 1) throw ParseError("checkpoint header has invalid shapes");
    m.weights.reserve(static_cast<std::size_t>(m.h));
    for (int l = 0; l < m.h; ++l) {
        Matrix w(m.layer_output_size(l), m.layer_input_size(l));
        read_f64_array(is, w.a, "checkpoint weights");
        m.weights.push_back(std::move(w));
    }
    m.output_offset = read_f64(is, "checkpoint output offset");
    m.acts.resize(static_cast<std::size_t>(m.h - 1));
    for (RationalActivation& a : m.acts) {
        read_f64_array(is, a.p, "checkpoint activation coefficients");
        read_f64_array(is, a.q, "checkpoint activation coefficients");
    }
    char extra;
    if (is.read(&extra, 1).gcount() != 0)
        throw ParseError("checkpoint has trailing bytes after declared payload");
    if (opts) {
        m.skip_connection = opts->skip_connection;
        m.input_scaled = opts->input_scaled;
        m.train_activations = opts->train_activations;
        for (RationalActivation& a : m.acts) a.learnable = opts->train_activations;
    }
    return m;
}

} // namespace attsolver
