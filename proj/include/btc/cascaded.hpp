#pragma once

#include <vector>

#include "btc/spin_algebra.hpp"

namespace btc {

/// Which admissible (m1, m2) with m1 + m2 = -J + 1 feeds the recursion for A_{J-1}.
enum class PairChoice { max_m1, min_m1 };

/// Pure stationary state of the cascade on the line omega = omega_D,
///   |Psi> = sum_J A_J |J, -J>,  A_J = (omega / (i kappa))^{2S-J} a_J / sqrt(norm).
struct DarkState {
    int n_spins = 0;
    double omega_over_kappa = 0.0;
    PairChoice choice = PairChoice::max_m1;
    std::vector<Complex> coeffs;  ///< A_J, index J = 0..2S
    std::vector<double> reduced;  ///< a_J with a_{2S} = 1
    double residual_h = 0.0;
    double residual_jm = 0.0;

    /// State vector in the product basis |m1> (x) |m2>.
    CVector state_vector() const;
};

struct DarkStateResiduals {
    double h = 0.0;   ///< ||H |Psi>|| with H = omega (S1x + S2x) + H_c at kappa = 1
    double jm = 0.0;  ///< ||J_- |Psi>||
};

/// Builds the dark state from the Clebsch-Gordan recursion and verifies it.
/// Throws NumericalError naming the worst recursion step when a residual exceeds tol.
DarkState build_dark_state(int n_spins, double omega_over_kappa, PairChoice choice = PairChoice::max_m1,
                           double tol = 1e-10);

DarkStateResiduals verify_dark_state(const DarkState& ds);

/// Same state from raw coefficients A_J; used to probe the residual detector.
DarkStateResiduals verify_coefficients(int n_spins, double omega_over_kappa, const std::vector<Complex>& coeffs);

/// Largest mismatch of the recursion relation at step J over all admissible pairs.
std::vector<double> recursion_mismatch(const DarkState& ds);

struct DarkStateObservables {
    double sx1 = 0.0, sx2 = 0.0;
    double sy1 = 0.0, sy2 = 0.0;
    double sz1 = 0.0, sz2 = 0.0;
};

/// Single-spin expectation values. Throws NumericalError when the exchange identities
/// <Sz1> = <Sz2>, <Sy1> = -<Sy2>, <Sx1,2> = 0 fail beyond tol.
DarkStateObservables dark_state_observables(const DarkState& ds, double tol = 1e-10);

}  // namespace btc
