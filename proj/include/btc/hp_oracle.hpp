#pragma once

#include <vector>

#include "btc/types.hpp"

namespace btc {

/// Leading-order Holstein-Primakoff quantities around the stable mean-field point.
/// The jump operator's fluctuation part is A b + B b^dag.
struct HpPrediction {
    Complex beta;
    double a = 1.0;
    double b = 0.0;
    /// m_{+,0}; m_{-,0} is its negative.
    Complex m_plus;
    bool valid = true;
};

/// Intensive drive omega~ = omega / S with S = N/2.
double intensive_omega(double omega, int n_spins);

/// Single BTC at intensive drive omega~. Outside the stationary phase (omega~ > kappa)
/// the prediction is flagged invalid and the fields are left at their saturation values.
HpPrediction hp_single(double omega_tilde, double kappa = 1.0);
/// Same, from the bare Rabi frequency.
HpPrediction hp_single_bare(double omega, int n_spins, double kappa = 1.0);

/// |conj(beta) sqrt(2 - |beta|^2) - i omega~ / kappa|.
double hp_self_consistency_residual(const HpPrediction& p, double omega_tilde, double kappa = 1.0);

/// Normalized Fock amplitudes of the fluctuation vacuum on even levels |2n>, n = 0, 1, ...
/// Truncated once the dropped tail weight falls below tail_tol.
std::vector<double> fluctuation_vacuum(const HpPrediction& p, double tail_tol = 1e-12, int n_max = 100000);

/// theta(s) = (e^{-s} - 1) omega^2 / kappa in bare units.
double hp_scgf(double omega, double kappa, double s);
/// sqrt(theta''(0)) / |d_omega theta'(0)| = sqrt(kappa) / 2.
double hp_estimation_error(double kappa = 1.0);
double hp_qfi_rate(double kappa = 1.0);
double hp_sensitivity(double kappa = 1.0);
/// Re lambda_E(omega1, omega2) = (omega1 omega2 - (omega1^2 + omega2^2) / 2) / kappa.
double hp_deformed_eigenvalue(double omega1, double omega2, double kappa = 1.0);

struct HpCascaded {
    HpPrediction sensor;
    HpPrediction decoder;
    /// omega, omega_D < omega_c and omega - omega_D < (omega_c - omega_D) / 2.
    bool stationary_phase = false;
    /// Both intensive drives inside the range where the expansion exists.
    bool expansion_valid = false;
    double sy1 = 0.0, sz1 = 0.0, sy2 = 0.0, sz2 = 0.0;
    double omega = 0.0, omega_d = 0.0, kappa = 1.0;

    double scgf(double s) const;
    double estimation_error() const;
};

HpCascaded hp_cascaded(double omega, double omega_d, int n_spins, double kappa = 1.0);

}  // namespace btc
