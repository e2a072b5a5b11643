#include "btc/hp_oracle.hpp"

#include <cmath>
#include <limits>

namespace btc {

namespace {

void check_kappa(double kappa) {
    if (!(kappa > 0.0) || !std::isfinite(kappa)) {
        throw ValidationError("kappa must be positive");
    }
}

// beta = sign * i sqrt(1 - sqrt(1 - x^2)), A and B from c = sqrt(1 - x^2).
HpPrediction displaced(double x, double sign) {
    HpPrediction p;
    const double ax = std::abs(x);
    p.valid = ax <= 1.0;
    const double c = std::sqrt(std::max(0.0, 1.0 - x * x));
    p.beta = Complex(0.0, sign * std::sqrt(1.0 - c));
    p.a = (1.0 + 3.0 * c) / (2.0 * std::sqrt(1.0 + c));
    p.b = (1.0 - c) / (2.0 * std::sqrt(1.0 + c));
    p.m_plus = Complex(0.0, -sign * x);
    return p;
}

}  // namespace

double intensive_omega(double omega, int n_spins) {
    if (n_spins < 1) {
        throw ValidationError("n_spins must be >= 1");
    }
    return omega / (0.5 * n_spins);
}

HpPrediction hp_single(double omega_tilde, double kappa) {
    check_kappa(kappa);
    if (!(omega_tilde >= 0.0)) {
        throw ValidationError("hp_single: omega must be non-negative");
    }
    return displaced(omega_tilde / kappa, -1.0);
}

HpPrediction hp_single_bare(double omega, int n_spins, double kappa) {
    return hp_single(intensive_omega(omega, n_spins), kappa);
}

double hp_self_consistency_residual(const HpPrediction& p, double omega_tilde, double kappa) {
    const double b2 = std::norm(p.beta);
    return std::abs(std::conj(p.beta) * std::sqrt(2.0 - b2) - Complex(0.0, omega_tilde / kappa));
}

std::vector<double> fluctuation_vacuum(const HpPrediction& p, double tail_tol, int n_max) {
    const double r = p.b / p.a;
    if (!(std::abs(r) < 1.0)) {
        throw ValidationError("fluctuation_vacuum: |B/A| >= 1, the vacuum is not normalizable");
    }
    // sum_n r^{2n} (2n-1)!!/(2n)!! = (1 - r^2)^{-1/2}
    const double total = 1.0 / std::sqrt(1.0 - r * r);
    std::vector<double> c{1.0};
    double partial = 1.0;
    for (int n = 1; n <= n_max && total - partial > tail_tol * total; ++n) {
        const double next = c.back() * (-r) * std::sqrt((2.0 * n - 1.0) / (2.0 * n));
        if (next == 0.0) {
            break;
        }
        c.push_back(next);
        partial += next * next;
    }
    const double norm = std::sqrt(partial);
    for (double& v : c) {
        v /= norm;
    }
    return c;
}

double hp_scgf(double omega, double kappa, double s) {
    check_kappa(kappa);
    return std::expm1(-s) * omega * omega / kappa;
}

double hp_estimation_error(double kappa) {
    check_kappa(kappa);
    return 0.5 * std::sqrt(kappa);
}

double hp_qfi_rate(double kappa) {
    check_kappa(kappa);
    return 4.0 / kappa;
}

double hp_sensitivity(double kappa) {
    return std::sqrt(hp_qfi_rate(kappa));
}

double hp_deformed_eigenvalue(double omega1, double omega2, double kappa) {
    check_kappa(kappa);
    return (omega1 * omega2 - 0.5 * (omega1 * omega1 + omega2 * omega2)) / kappa;
}

double HpCascaded::scgf(double s) const {
    const double dw = omega - omega_d;
    return std::expm1(-s) * dw * dw / kappa;
}

double HpCascaded::estimation_error() const {
    return 0.5 * std::sqrt(kappa);
}

HpCascaded hp_cascaded(double omega, double omega_d, int n_spins, double kappa) {
    check_kappa(kappa);
    if (!(omega >= 0.0) || !(omega_d >= 0.0)) {
        throw ValidationError("hp_cascaded: frequencies must be non-negative");
    }
    HpCascaded out;
    out.omega = omega;
    out.omega_d = omega_d;
    out.kappa = kappa;
    const double wt = intensive_omega(omega, n_spins);
    const double wd = intensive_omega(omega_d, n_spins);
    const double x2 = (2.0 * wt - wd) / kappa;
    out.sensor = hp_single(wt, kappa);
    out.decoder = displaced(x2, 1.0);
    out.expansion_valid = out.sensor.valid && out.decoder.valid;

    const double wc = kappa * n_spins / 2.0;
    out.stationary_phase = omega < wc && omega_d < wc && (omega - omega_d) < 0.5 * (wc - omega_d);

    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double half_n = 0.5 * n_spins;
    const double u1 = omega / wc;
    const double u2 = (2.0 * omega - omega_d) / wc;
    out.sy1 = omega / kappa;
    out.sz1 = std::abs(u1) <= 1.0 ? -half_n * std::sqrt(1.0 - u1 * u1) : nan;
    out.sy2 = -(2.0 * omega - omega_d) / kappa;
    out.sz2 = std::abs(u2) <= 1.0 ? -half_n * std::sqrt(1.0 - u2 * u2) : nan;
    return out;
}

}  // namespace btc
