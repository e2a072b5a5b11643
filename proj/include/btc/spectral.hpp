#pragma once

#include <optional>
#include <vector>

#include "btc/liouville.hpp"

namespace btc {

enum class EigenBackend { krylov, propagation };

struct EigenOptions {
    EigenBackend backend = EigenBackend::krylov;
    /// Relative residual target, ||G v - lambda v|| / (||G||_1 ||v||).
    double tol = 1e-11;
    /// Run the other backend too and require agreement within cross_tol.
    bool cross_check = false;
    double cross_tol = 1e-6;

    // shift-invert Arnoldi
    int krylov_dim = 30;
    int max_restarts = 40;
    /// Initial estimate of the dominant eigenvalue; the shift is placed just to its right.
    double guess = 0.0;

    // time propagation
    double burn_in = 40.0;
    double window = 5.0;
    double max_time = 4000.0;
    double slope_tol = 1e-7;
    double rtol = 1e-9;
    double atol = 1e-11;
};

struct EigenResult {
    Complex value;
    double residual = 0.0;
    int iterations = 0;
    EigenBackend backend = EigenBackend::krylov;
    std::optional<Complex> cross_value;
    /// Dominant right eigenvector, normalized to unit trace when the trace does not vanish.
    CMatrix vector;
};

/// Eigenvalue with the largest real part of a tilted or deformed generator.
EigenResult dominant_eigenvalue(const Generator& g, const EigenOptions& options = {});

struct ScgfOptions {
    double h_s = 1e-3;
    bool richardson = true;
    /// Allowed relative mismatch between -theta'(0) and the stationary intensity.
    double intensity_rtol = 1e-6;
    /// With Richardson on, h_s is halved (up to this many times) until that check passes.
    int max_halvings = 6;
    EigenOptions eigen;
    StationaryOptions stationary;
};

struct ScgfPoint {
    double s = 0.0;
    double theta = 0.0;
    double residual = 0.0;
    int iterations = 0;
};

struct ScgfResult {
    std::vector<double> s_grid;
    std::vector<double> theta;
    std::vector<ScgfPoint> diagnostics;
    double theta_p0 = 0.0;
    double theta_pp0 = 0.0;
    /// Step of the accepted difference pair (h_s and h_s / 2 with Richardson).
    double h_s = 0.0;
    double intensity = 0.0;
    double stationary_residual = 0.0;
};

/// theta(s) on s_grid plus the first two cumulant rates at s = 0 from central differences.
ScgfResult scgf_curve(const ModelParams& params, const std::vector<double>& s_grid,
                      const ScgfOptions& options = {});

struct CumulantRates {
    double theta_p0 = 0.0;
    double theta_pp0 = 0.0;
    double h_s = 0.0;
    double intensity = 0.0;
    double stationary_residual = 0.0;
};

/// Just the derivative part of scgf_curve for an already-built generator.
CumulantRates cumulant_rates(const Generator& g, const ScgfOptions& options = {});

struct QfiOptions {
    double h = 1e-3;
    bool richardson = true;
    double halving_tol = 0.01;
    EigenOptions eigen;
};

struct QfiResult {
    double omega = 0.0;
    double qfi_rate = 0.0;
    double sensitivity = 0.0;
    double h = 0.0;
    double qfi_h = 0.0;
    double qfi_h2 = 0.0;
    /// Largest |lambda_E| on the diagonal stencil points, which must vanish.
    double diagonal_lambda = 0.0;
};

/// 4 d1 d2 Re lambda_E(omega1, omega2) at omega1 = omega2 = omega for the single BTC.
QfiResult qfi_rate(const ModelParams& params, const QfiOptions& options = {});

}  // namespace btc
