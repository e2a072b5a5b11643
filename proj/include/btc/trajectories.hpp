#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "btc/liouville.hpp"

namespace btc {

enum class InitialState { all_down, all_up };

struct TrajectoryConfig {
    double t_total = 440.0;
    double t_burn = 40.0;
    std::uint64_t seed = 1;
    int n_traj = 1000;
    /// Tolerance on the norm^2 crossing that fixes a jump time.
    double jump_tol = 1e-10;
    InitialState initial = InitialState::all_down;

    double window() const { return t_total - t_burn; }
    void validate() const;
};

struct CountRecord {
    std::uint64_t traj_index = 0;
    std::vector<double> jump_times;  ///< counted jumps only, in (t_burn, t_total]
    long n_counts = 0;
    double i_t = 0.0;
    double window = 0.0;
};

struct IntensityStats {
    double mean = 0.0;
    double variance = 0.0;
    double stderr_mean = 0.0;
    /// sqrt(window * variance)
    double sigma_prefactor = 0.0;
    /// Standard error of sigma_prefactor from the sample fourth moment.
    double sigma_stderr = 0.0;
    long n_traj = 0;
    double window = 0.0;
};

/// Counter-based SplitMix64 stream: the state is a pure function of (seed, stream).
class SplitMix64 {
public:
    SplitMix64(std::uint64_t seed, std::uint64_t stream);
    std::uint64_t next();
    /// Uniform in (0, 1].
    double uniform_open0();

private:
    std::uint64_t state_;
};

/// Waiting-time Monte Carlo wave-function unraveling of a Lindblad generator with a
/// single jump operator. Between jumps |psi> evolves under exp(-i H_eff t); a jump
/// happens when ||psi||^2 falls to a uniform random level.
class PhotocountSimulator {
public:
    PhotocountSimulator(const Generator& g, const TrajectoryConfig& cfg);
    ~PhotocountSimulator();
    PhotocountSimulator(PhotocountSimulator&&) noexcept;

    CountRecord run(std::uint64_t traj_index, bool keep_times = true) const;
    const TrajectoryConfig& config() const { return cfg_; }
    /// True when a diagonal phase change made the no-jump generator real.
    bool real_arithmetic() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    TrajectoryConfig cfg_;
};

CountRecord run_photocount_trajectory(const Generator& g, const TrajectoryConfig& cfg, std::uint64_t traj_index);

/// Runs trajectories 0..n_traj-1; record i always comes from stream i.
std::vector<CountRecord> run_ensemble(const Generator& g, const TrajectoryConfig& cfg, int threads,
                                      bool keep_times = false);

IntensityStats ensemble_stats(const std::vector<CountRecord>& records);

struct McErrorResult {
    double delta_omega_bar = 0.0;
    /// Err[delta] = Err[sigma] / (2 sqrt(sigma) |d I|) with Err[sigma] = 0.02 sigma.
    double error_bar = 0.0;
    /// Sampling error from the ensemble itself (derivative and sigma standard errors).
    double statistical_error = 0.0;
    double derivative = 0.0;
    double derivative_stderr = 0.0;
    double sigma_prefactor = 0.0;
    IntensityStats minus;
    IntensityStats centre;
    IntensityStats plus;
};

/// delta_omega_bar = sigma / |d E[I_T] / d omega|. The derivative is a two-sided difference of
/// ensembles at omega +- d_omega that share random streams, so it is taken trajectory by trajectory.
/// sigma comes from a third ensemble at omega itself: sigma^2 is strongly curved near a dark line,
/// and averaging the flanks would bias it.
McErrorResult mc_estimation_error(const ModelParams& params, const TrajectoryConfig& cfg, double d_omega,
                                  int threads);

}  // namespace btc
