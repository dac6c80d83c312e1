#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "attsolver/linalg.hpp"
#include "attsolver/rational.hpp"
#include "attsolver/state.hpp"

namespace attsolver {

/// Architecture / behavior switches for the compensation network. The
/// boolean switches are configuration, not weights: they are NOT serialized
/// into checkpoints and must be re-applied from config after loading.
struct ModuleOptions {
    int d1 = 1024;               // hidden width
    int h = 2;                   // number of weight layers
    bool skip_connection = false;// add the module input to the output
    bool input_scaled = false;   // module consumes S*dt instead of S
    bool train_activations = true;
    double output_offset = 0.0;  // added to every output component (1.0 for
                                 // multiplicative arms so Q starts at ones)
};

/// Dense compensation network Q[x|phi] = W_h ∘ a ∘ ... ∘ a ∘ W_1[x] with
/// rational activations, no biases; maps length-d vectors to length-d vectors.
struct AttentionModule {
    int d = 0;
    int d1 = 0;
    int h = 0;
    std::vector<Matrix> weights;          // h layers; W_1: d1 x d, ..., W_h: d x d1
    std::vector<RationalActivation> acts; // h-1 shared coefficient sets
    double output_offset = 0.0;

    // Behavior switches mirrored from ModuleOptions (not serialized).
    bool skip_connection = false;
    bool input_scaled = false;
    bool train_activations = true;

    int layer_input_size(int layer) const { return layer == 0 ? d : d1; }
    int layer_output_size(int layer) const { return layer == h - 1 ? d : d1; }

    std::size_t parameter_count() const;

    /// Equality of the serialized state (shapes, weights, activations, offset).
    bool same_parameters(const AttentionModule& other) const;
};

/// Per-layer intermediate values captured by a forward pass; required by
/// mlp_backward and reusable as an allocation-free workspace.
struct ForwardCache {
    std::vector<double> input;              // x (length d)
    std::vector<std::vector<double>> pre;   // z_l = W_l y_{l-1}, l = 1..h-1
    std::vector<std::vector<double>> post;  // y_l = a(z_l)
    std::vector<double> out;                // final output (length d)
};

/// Gradient buffers, shape-congruent with AttentionModule parameters.
/// Backward passes accumulate; call reset() between batches.
struct GradientSet {
    std::vector<Matrix> weights;
    std::vector<std::array<double, RationalActivation::kCoeffCount>> acts;
    double output_offset = 0.0;

    static GradientSet zeros_like(const AttentionModule& module);
    void reset();
    void add(const GradientSet& other);
    void scale(double factor);
    bool finite() const;
};

/// out = Q[input | module], caching intermediates for backward.
void mlp_forward(const AttentionModule& module, std::span<const double> input,
                 std::span<double> out, ForwardCache& cache);

/// Convenience overload (allocates its own cache).
StateVector mlp_forward(const AttentionModule& module, const StateVector& input);

/// Accumulates dL/d(parameters) given upstream = dL/d(output) and the cache
/// of the matching forward call. Exact reverse-mode differentiation.
void mlp_backward(const AttentionModule& module, const ForwardCache& cache,
                  std::span<const double> upstream, GradientSet& grads);

/// Hidden layers: Glorot-uniform in +-sqrt(6/(fan_in+fan_out)); final layer
/// all zeros so a fresh module is exactly neutral; activations at the ReLU
/// fit. Deterministic per seed.
AttentionModule init_module(int d, const ModuleOptions& opts, std::uint64_t seed);

/// "ATTW" checkpoint: magic, u32 version, u32 d/d1/h, all tensors as
/// little-endian f64 in declaration order (W_1..W_h, output_offset), then the
/// 7 activation coefficients per activation layer. Bit-exact round trip.
void save_module(const AttentionModule& module, const std::filesystem::path& path);
AttentionModule load_module(const std::filesystem::path& path,
                            const ModuleOptions* opts = nullptr);

} // namespace attsolver
