#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "attsolver/rng.hpp"
#include "attsolver/state.hpp"
#include "attsolver/systems.hpp"

namespace attsolver {

/// Stack of coarse-grid trajectories plus the generation metadata needed to
/// regenerate it byte-identically.
struct TrajectoryDataset {
    std::string system_id;
    std::string split = "train"; // train | val | test (sidecar metadata)
    double dt_coarse = 0.0;
    double dt_fine = 0.0;
    std::uint64_t seed = 0;
    std::vector<Matrix> trajectories; // each (N+1) x d
    long rejected = 0;               // exploded generations redrawn

    int size() const { return static_cast<int>(trajectories.size()); }
    int rows() const { return trajectories.empty() ? 0 : trajectories.front().rows; }
    int dim() const { return trajectories.empty() ? 0 : trajectories.front().cols; }
    int steps() const { return rows() > 0 ? rows() - 1 : 0; }
    double t_end() const { return steps() * dt_coarse; }

    bool same_data(const TrajectoryDataset& other) const {
        return system_id == other.system_id && split == other.split &&
               dt_coarse == other.dt_coarse && dt_fine == other.dt_fine && seed == other.seed &&
               trajectories == other.trajectories;
    }
};

/// Per-coordinate initial-condition distribution.
struct VariableSpec {
    enum class Kind { Uniform, Constant };
    Kind kind = Kind::Constant;
    double lo = 0.0, hi = 0.0; // Uniform
    double value = 0.0;        // Constant

    static VariableSpec uniform(double lo, double hi) {
        return {Kind::Uniform, lo, hi, 0.0};
    }
    static VariableSpec constant(double c) { return {Kind::Constant, 0.0, 0.0, c}; }
};

struct InitSampler {
    std::vector<VariableSpec> vars; // one per state coordinate
};

/// Benchmark-standard ranges: spring-mass q,p ~ U[-2.5, 2.5]; elastic
/// pendulum theta ~ U[0, pi/8] with (r, theta_dot, r_dot) = (10, 0, 0);
/// K-link theta_i ~ U[0, pi/8], omega_i = 0; harmonic q,p ~ U[-1, 1].
InitSampler default_sampler(const OdeSystem& system);

StateVector sample_state(const InitSampler& sampler, Rng& rng);
std::vector<StateVector> sample_initial_conditions(const InitSampler& sampler, int n,
                                                   std::uint64_t seed);

struct GenerationConfig {
    int n_traj = 0;
    double dt_fine = 1e-3;
    double dt_coarse = 2e-1;
    double t_end = 20.0;
    std::uint64_t seed = 0;
    std::string split = "train";
    int jobs = 1;
    int max_redraws = 100; // redraws allowed per trajectory before giving up
};

/// Integrates each initial condition with classic RK4 at dt_fine and keeps
/// every k-th state (k = dt_coarse/dt_fine) so stored rows sit on the coarse
/// grid. Exploding draws are rejected and redrawn from the same
/// per-trajectory RNG stream; the count is recorded. Serial and parallel
/// generation are bitwise identical.
TrajectoryDataset generate_dataset(const OdeSystem& system, const InitSampler& sampler,
                                   const GenerationConfig& config);

/// Constant offset u <- u + sigma on every component (the literal attack).
void inject_noise(std::span<double> state, double sigma);
/// Gaussian alternative (off by default): u_i <- u_i + sigma * N(0,1).
void inject_noise_gaussian(std::span<double> state, double sigma, Rng& rng);

/// "ATTS" binary format; a <path>.json sidecar echoes generation metadata
/// (split, rejection count). Bit-exact round trip; corrupted files raise
/// BadMagicError / VersionError / TruncationError.
void write_dataset(const TrajectoryDataset& ds, const std::filesystem::path& path);
TrajectoryDataset read_dataset(const std::filesystem::path& path);

/// Fixed permutation of [0, m) used by the data-reduction protocol.
std::vector<int> shuffled_indices(int m, std::uint64_t shuffle_seed);

/// First ceil(fraction * M) trajectories of the shuffled order. Subsets with
/// the same shuffle seed nest: subset(0.1) is a prefix of subset(0.5).
TrajectoryDataset prefix_subset(const TrajectoryDataset& ds, double fraction,
                                std::uint64_t shuffle_seed);

} // namespace attsolver
