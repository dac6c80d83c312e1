#include "attsolver/dataset.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "attsolver/binary_io.hpp"
#include "attsolver/errors.hpp"
#include "attsolver/parallel.hpp"
#include "attsolver/rollout.hpp"

namespace attsolver {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

InitSampler default_sampler(const OdeSystem& system) {
    InitSampler sampler;
    const int d = system.dimension();
    const std::string_view id = system.id();
    if (id == "spring_mass") {
        sampler.vars.assign(d, VariableSpec::uniform(-2.5, 2.5));
    } else if (id == "elastic_pendulum") {
        sampler.vars = {VariableSpec::uniform(0.0, kPi / 8.0), VariableSpec::constant(10.0),
                        VariableSpec::constant(0.0), VariableSpec::constant(0.0)};
    } else if (id == "klink") {
        sampler.vars.assign(d, VariableSpec::constant(0.0));
        for (int i = 0; i < d / 2; ++i) sampler.vars[i] = VariableSpec::uniform(0.0, kPi / 8.0);
    } else if (id == "harmonic") {
        sampler.vars.assign(d, VariableSpec::uniform(-1.0, 1.0));
    } else {
        throw ConfigError("default_sampler: no initialization ranges for system '" +
                          std::string(id) + "'");
    }
    return sampler;
}

StateVector sample_state(const InitSampler& sampler, Rng& rng) {
    StateVector u(sampler.vars.size());
    for (std::size_t i = 0; i < sampler.vars.size(); ++i) {
        const VariableSpec& v = sampler.vars[i];
        u[i] = (v.kind == VariableSpec::Kind::Uniform) ? rng.uniform(v.lo, v.hi) : v.value;
    }
    return u;
}

std::vector<StateVector> sample_initial_conditions(const InitSampler& sampler, int n,
                                                   std::uint64_t seed) {
    if (n < 1) throw ContractError("sample_initial_conditions: n must be >= 1");
    std::vector<StateVector> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
        out.push_back(sample_state(sampler, rng));
    }
    return out;
}

namespace {

/// Checks that num/den is an integer ratio; returns it.
int integral_ratio(double num, double den, const char* what) {
    if (!(den > 0.0) || !(num > 0.0))
        throw ConfigError(std::string(what) + ": step sizes and horizon must be positive");
    const double ratio = num / den;
    const long long k = std::llround(ratio);
    if (k < 1 || std::abs(ratio - static_cast<double>(k)) > 1e-9 * std::max(1.0, ratio))
        throw ConfigError(std::string(what) + ": ratio " + std::to_string(ratio) +
                          " is not a positive integer");
    return static_cast<int>(k);
}

/// One generation attempt: fine RK4, subsampled every k steps into `states`.
/// Returns false if the trajectory explodes (non-finite or singular).
bool integrate_coarse_rows(const OdeSystem& system, const StateVector& u0, double dt_fine,
                           int k, int n_coarse, Matrix& states, StepWorkspace& ws) {
    const int d = system.dimension();
    std::vector<double> cur(u0.begin(), u0.end());
    std::vector<double> next(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) states(0, i) = u0[i];
    for (int row = 1; row <= n_coarse; ++row) {
        for (int s = 0; s < k; ++s) {
            try {
                step(cur, Scheme::RK4, system, dt_fine, {}, next, ws);
            } catch (const SingularStateError&) {
                return false;
            } catch (const SingularMatrixError&) {
                return false;
            }
            cur.swap(next);
        }
        if (!all_finite(cur)) return false;
        for (int i = 0; i < d; ++i) states(row, i) = cur[i];
    }
    return true;
}

} // namespace

TrajectoryDataset generate_dataset(const OdeSystem& system, const InitSampler& sampler,
                                   const GenerationConfig& config) {
    const int d = system.dimension();
    if (static_cast<int>(sampler.vars.size()) != d)
        throw ContractError("generate_dataset: sampler does not match system dimension");
    if (config.n_traj < 0) throw ConfigError("generate_dataset: n_traj must be >= 0");
    const int k = integral_ratio(config.dt_coarse, config.dt_fine, "dt_coarse/dt_fine");
    const int n_coarse = integral_ratio(config.t_end, config.dt_coarse, "T/dt_coarse");

    TrajectoryDataset ds;
    ds.system_id = std::string(system.id());
    ds.split = config.split;
    ds.dt_coarse = config.dt_coarse;
    ds.dt_fine = config.dt_fine;
    ds.seed = config.seed;
    ds.trajectories.assign(static_cast<std::size_t>(config.n_traj), Matrix());

    std::vector<long> rejects(static_cast<std::size_t>(std::max(config.n_traj, 1)), 0);
    parallel_for(config.n_traj, config.jobs, [&](int idx) {
        Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(idx)));
        StepWorkspace ws;
        Matrix states(n_coarse + 1, d);
        for (int attempt = 0; attempt <= config.max_redraws; ++attempt) {
            const StateVector u0 = sample_state(sampler, rng);
            if (integrate_coarse_rows(system, u0, config.dt_fine, k, n_coarse, states, ws)) {
                ds.trajectories[static_cast<std::size_t>(idx)] = std::move(states);
                rejects[static_cast<std::size_t>(idx)] = attempt;
                return;
            }
        }
        throw Error("generate_dataset: trajectory " + std::to_string(idx) + " exploded " +
                    std::to_string(config.max_redraws + 1) + " times; check step sizes");
    });
    for (int i = 0; i < config.n_traj; ++i) ds.rejected += rejects[static_cast<std::size_t>(i)];
    return ds;
}

void inject_noise(std::span<double> state, double sigma) {
    if (sigma < 0.0) throw ContractError("inject_noise: sigma must be >= 0");
    for (double& v : state) v += sigma;
}

void inject_noise_gaussian(std::span<double> state, double sigma, Rng& rng) {
    if (sigma < 0.0) throw ContractError("inject_noise_gaussian: sigma must be >= 0");
    for (double& v : state) v += sigma * rng.normal();
}

namespace {
constexpr char kMagic[5] = "ATTS";
constexpr std::uint32_t kVersion = 1;
} // namespace

void write_dataset(const TrajectoryDataset& ds, const std::filesystem::path& path) {
    {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw Error("cannot open dataset for writing: " + path.string());
        write_bytes(os, kMagic, 4);
        write_u32(os, kVersion);
        write_u32(os, static_cast<std::uint32_t>(ds.dim()));
        write_u32(os, static_cast<std::uint32_t>(ds.rows()));
        write_u32(os, static_cast<std::uint32_t>(ds.size()));
        write_f64(os, ds.dt_coarse);
        write_f64(os, ds.dt_fine);
        write_u64(os, ds.seed);
        write_string(os, ds.system_id);
        for (const Matrix& traj : ds.trajectories) write_f64_array(os, traj.a);
        if (!os) throw Error("write failed for dataset: " + path.string());
    }
    nlohmann::json meta{
        {"system", ds.system_id},   {"split", ds.split},
        {"trajectories", ds.size()},{"rows", ds.rows()},
        {"dimension", ds.dim()},    {"dt_coarse", ds.dt_coarse},
        {"dt_fine", ds.dt_fine},    {"seed", ds.seed},
        {"rejected", ds.rejected},
    };
    std::ofstream js(path.string() + ".json");
    if (!js) throw Error("cannot open dataset sidecar for writing: " + path.string() + ".json");
    js << meta.dump(2) << '\n';
}

TrajectoryDataset read_dataset(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open dataset: " + path.string());
    expect_magic(is, kMagic, "dataset");
    expect_version(read_u32(is, "dataset version"), kVersion, "dataset");
    TrajectoryDataset ds;
    const std::uint32_t d = read_u32(is, "dataset d");
    const std::uint32_t rows = read_u32(is, "dataset rows");
    const std::uint32_t m = read_u32(is, "dataset count");
    ds.dt_coarse = read_f64(is, "dataset dt_coarse");
    ds.dt_fine = read_f64(is, "dataset dt_fine");
    ds.seed = read_u64(is, "dataset seed");
    ds.system_id = read_string(is, "dataset system id");
    if (m > 0 && (d == 0 || rows == 0)) throw ParseError("dataset header has empty shapes");
    ds.trajectories.reserve(m);
    for (std::uint32_t i = 0; i < m; ++i) {
        Matrix traj(static_cast<int>(rows), static_cast<int>(d));
        read_f64_array(is, traj.a, "dataset payload");
        ds.trajectories.push_back(std::move(traj));
    }
    char extra;
    if (is.read(&extra, 1).gcount() != 0)
        throw ParseError("dataset has trailing bytes after declared payload");

    const std::filesystem::path sidecar(path.string() + ".json");
    if (std::filesystem::exists(sidecar)) {
        std::ifstream js(sidecar);
        nlohmann::json meta = nlohmann::json::parse(js, nullptr, /*allow_exceptions=*/false);
        if (!meta.is_discarded()) {
            ds.split = meta.value("split", ds.split);
            ds.rejected = meta.value("rejected", ds.rejected);
        }
    }
    return ds;
}

std::vector<int> shuffled_indices(int m, std::uint64_t shuffle_seed) {
    std::vector<int> idx(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = i;
    Rng rng(mix_seed(shuffle_seed, 0x0050ff1eULL));
    shuffle(idx, rng);
    return idx;
}

TrajectoryDataset prefix_subset(const TrajectoryDataset& ds, double fraction,
                                std::uint64_t shuffle_seed) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw ContractError("prefix_subset: fraction must be in (0, 1]");
    const int m = ds.size();
    const int keep = std::max(1, static_cast<int>(std::ceil(fraction * m)));
    const std::vector<int> order = shuffled_indices(m, shuffle_seed);
    TrajectoryDataset out = ds;
    out.trajectories.clear();
    out.trajectories.reserve(static_cast<std::size_t>(keep));
    for (int i = 0; i < keep; ++i)
        out.trajectories.push_back(ds.trajectories[static_cast<std::size_t>(order[i])]);
    return out;
}

} // namespace attsolver
