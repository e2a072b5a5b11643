#pragma once

#include <optional>
#include <string>
#include <vector>

#include "btc/spectral.hpp"
#include "btc/trajectories.hpp"

namespace btc {

enum class ProtocolMethod { spectral, trajectories };

std::string to_string(ProtocolMethod m);

struct ProtocolOptions {
    /// Initial two-sided step for d mu / d omega; halved until h and h/2 agree within halving_tol.
    double h_omega = 1e-3;
    double halving_tol = 0.01;
    int max_halvings = 8;
    ScgfOptions scgf;
    /// Compute S_omega^{-1} for the same N and omega alongside the error.
    bool with_bound = true;
    QfiOptions qfi;
    /// Used when N exceeds the exact cascaded cap, or when forced.
    TrajectoryConfig trajectories;
    double d_omega = 5e-3;
    int threads = 1;
    std::optional<ProtocolMethod> force_method;
};

struct ProtocolResult {
    ModelParams params;
    ProtocolMethod method = ProtocolMethod::spectral;
    double delta_omega_bar = 0.0;
    /// |d I / d omega|, the stationary intensity slope.
    double intensity_derivative = 0.0;
    /// sqrt(theta''(0)) on the spectral path, sqrt(T var I_T) on the trajectory path.
    double sigma_prefactor = 0.0;
    double intensity = 0.0;
    /// S_omega^{-1} of the single BTC at the same N and omega.
    std::optional<double> bound;
    /// Trajectory path only: the calibrated bar and the sampling error.
    double error_bar = 0.0;
    double statistical_error = 0.0;
    double h_used = 0.0;
};

/// d(-theta'(0)) / d omega = d mu / d omega by central differences of stationary intensities.
struct IntensitySlope {
    double value = 0.0;
    double h = 0.0;
};
IntensitySlope intensity_slope(const ModelParams& params, const ProtocolOptions& options = {});

/// Single-BTC estimator error sqrt(theta''(0)) / |d_omega theta'(0)|.
ProtocolResult protocol1_error(const ModelParams& params, const ProtocolOptions& options = {});

/// Cascaded estimator error on the collective jump J_-. Exact for N within the cascaded
/// cap, Monte Carlo trajectories beyond it. Delta omega = 0 is an excluded point.
ProtocolResult protocol2_error(const ModelParams& params, const ProtocolOptions& options = {});

struct ScalingFit {
    std::vector<int> sizes;
    std::vector<double> values;
    double exponent = 0.0;
    double prefactor = 0.0;
    int fit_window = 6;
    double residual_rms = 0.0;
};

/// Least squares of log(value) = log(prefactor) + exponent * log(N) over the fit_window largest sizes.
ScalingFit fit_power_law(const std::vector<int>& sizes, const std::vector<double>& values, int fit_window = 6);

enum class SweepMode { bound, protocol1, protocol2 };

struct SweepSpec {
    SweepMode mode = SweepMode::bound;
    /// omega / omega_c for bound and protocol1, omega_D / omega_c for protocol2.
    double ratio = 2.0;
    /// omega - omega_D in units of kappa (protocol2 only).
    double delta_omega = 0.01;
    int fit_window = 6;
};

/// Evaluates every size (in parallel over options.threads) and fits the largest ones.
ScalingFit sensitivity_sweep(const std::vector<int>& sizes, const SweepSpec& spec,
                             const ProtocolOptions& options = {});

}  // namespace btc
