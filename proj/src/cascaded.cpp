#include "btc/cascaded.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

namespace btc {

namespace {

struct Step {
    double ratio;  // a_{J-1} / a_J
    HalfInt m1;
};

// Recursion between |J, -J> and |J-1, -J+1> obtained from <J-1,-J+1| H |Psi> = 0:
//   omega sqrt(2J) C^{J,-J+1}_{m1,m2} A_J = i kappa [P+ C^{J-1}_{m1+1,m2-1} - P- C^{J-1}_{m1-1,m2+1}] A_{J-1}
// with P+- = sqrt((S +- m1 + 1)(S -+ m1)(S -+ m2 + 1)(S +- m2)). Amplitudes outside |m| <= S vanish.
struct Terms {
    double lhs;
    double bracket;
};

Terms recursion_terms(const CoupledBasisMap& map, int total_j, HalfInt m1) {
    const double s = map.spin().value();
    const HalfInt big_m{-2 * total_j + 2};
    const HalfInt m2 = big_m - m1;
    const double a = m1.value();
    const double b = m2.value();
    const HalfInt one{2};
    const double p_plus = std::sqrt(std::max(0.0, (s + a + 1) * (s - a) * (s - b + 1) * (s + b)));
    const double p_minus = std::sqrt(std::max(0.0, (s - a + 1) * (s + a) * (s + b + 1) * (s - b)));
    const double bracket = p_plus * map.coefficient(total_j - 1, m1 + one, m2 - one) -
                           p_minus * map.coefficient(total_j - 1, m1 - one, m2 + one);
    const double lhs = std::sqrt(2.0 * total_j) * map.coefficient(total_j, m1, m2);
    return {lhs, bracket};
}

std::vector<HalfInt> admissible_m1(const CoupledBasisMap& map, int total_j) {
    const int n = map.sector().n_spins();
    const int big_m_twice = -2 * total_j + 2;
    std::vector<HalfInt> out;
    for (int m1t = -n; m1t <= n; m1t += 2) {
        const int m2t = big_m_twice - m1t;
        if (std::abs(m2t) > n) {
            continue;
        }
        const Terms t = recursion_terms(map, total_j, HalfInt{m1t});
        if (std::abs(t.bracket) > 1e-12) {
            out.push_back(HalfInt{m1t});
        }
    }
    return out;
}

double kahan_sum(const std::vector<double>& v) {
    double sum = 0.0;
    double comp = 0.0;
    for (double x : v) {
        const double y = x - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return sum;
}

// (-i)^k
Complex minus_i_power(int k) {
    switch (k % 4) {
        case 0: return {1.0, 0.0};
        case 1: return {0.0, -1.0};
        case 2: return {-1.0, 0.0};
        default: return {0.0, 1.0};
    }
}

CVector assemble(int n_spins, const std::vector<Complex>& coeffs) {
    const SpinSector sector(n_spins);
    const CoupledBasisMap map(sector);
    CVector psi = CVector::Zero(sector.dim() * sector.dim());
    for (int j = 0; j <= map.max_total(); ++j) {
        if (coeffs[static_cast<std::size_t>(j)] != 0.0) {
            psi += coeffs[static_cast<std::size_t>(j)] * coupled_state(map, j);
        }
    }
    return psi;
}

DarkStateResiduals residuals_of(int n_spins, double w, const CVector& psi) {
    const TwoSpinOperators ops = build_two_spin_ops(SpinSector(n_spins));
    const SparseMatrix coupling = Complex(0.0, -0.5) * SparseMatrix(ops.s2p * ops.s1m - ops.s1p * ops.s2m);
    const SparseMatrix h = SparseMatrix(w * (ops.s1x + ops.s2x)) + coupling;
    return {(h * psi).norm(), (ops.jm * psi).norm()};
}

}  // namespace

CVector DarkState::state_vector() const {
    return assemble(n_spins, coeffs);
}

DarkStateResiduals verify_coefficients(int n_spins, double omega_over_kappa, const std::vector<Complex>& coeffs) {
    if (static_cast<int>(coeffs.size()) != n_spins + 1) {
        throw ValidationError("verify_coefficients: expected 2S + 1 coefficients");
    }
    return residuals_of(n_spins, omega_over_kappa, assemble(n_spins, coeffs));
}

DarkStateResiduals verify_dark_state(const DarkState& ds) {
    return verify_coefficients(ds.n_spins, ds.omega_over_kappa, ds.coeffs);
}

DarkState build_dark_state(int n_spins, double omega_over_kappa, PairChoice choice, double tol) {
    const SpinSector sector(n_spins);
    if (!(omega_over_kappa >= 0.0) || !std::isfinite(omega_over_kappa)) {
        throw ValidationError("build_dark_state: omega/kappa must be finite and non-negative");
    }
    const CoupledBasisMap map(sector);
    const int top = map.max_total();

    DarkState ds;
    ds.n_spins = n_spins;
    ds.omega_over_kappa = omega_over_kappa;
    ds.choice = choice;
    ds.reduced.assign(static_cast<std::size_t>(top + 1), 0.0);
    ds.reduced[static_cast<std::size_t>(top)] = 1.0;
    for (int j = top; j >= 1; --j) {
        const std::vector<HalfInt> pairs = admissible_m1(map, j);
        if (pairs.empty()) {
            throw NumericalError("build_dark_state: no admissible (m1, m2) pair at J = " + std::to_string(j));
        }
        const HalfInt m1 = choice == PairChoice::max_m1 ? pairs.back() : pairs.front();
        const Terms t = recursion_terms(map, j, m1);
        ds.reduced[static_cast<std::size_t>(j - 1)] = ds.reduced[static_cast<std::size_t>(j)] * t.lhs / t.bracket;
    }

    // |A_J|^2 = x^{2(2S-J)} a_J^2 / norm, accumulated relative to the largest term.
    ds.coeffs.assign(static_cast<std::size_t>(top + 1), Complex(0.0));
    const double x = omega_over_kappa;
    if (x == 0.0) {
        ds.coeffs[static_cast<std::size_t>(top)] = 1.0;
    } else {
        std::vector<double> log_w(static_cast<std::size_t>(top + 1));
        for (int j = 0; j <= top; ++j) {
            const double a = std::abs(ds.reduced[static_cast<std::size_t>(j)]);
            log_w[static_cast<std::size_t>(j)] =
                a > 0.0 ? 2.0 * (top - j) * std::log(x) + 2.0 * std::log(a) : -INFINITY;
        }
        const double peak = *std::max_element(log_w.begin(), log_w.end());
        std::vector<double> w(log_w.size());
        for (std::size_t j = 0; j < w.size(); ++j) {
            w[j] = std::exp(log_w[j] - peak);
        }
        const double norm = kahan_sum(w);
        for (int j = 0; j <= top; ++j) {
            const double a = ds.reduced[static_cast<std::size_t>(j)];
            const double mag = std::sqrt(w[static_cast<std::size_t>(j)] / norm);
            ds.coeffs[static_cast<std::size_t>(j)] = minus_i_power(top - j) * (a < 0.0 ? -mag : mag);
        }
    }

    const DarkStateResiduals r = verify_dark_state(ds);
    ds.residual_h = r.h;
    ds.residual_jm = r.jm;
    if (!(r.h <= tol) || !(r.jm <= tol)) {
        const std::vector<double> mism = recursion_mismatch(ds);
        const auto worst = std::max_element(mism.begin(), mism.end());
        throw NumericalError("build_dark_state: verification failed (||H Psi|| = " + std::to_string(r.h) +
                                 ", ||J- Psi|| = " + std::to_string(r.jm) + "); worst recursion step J = " +
                                 std::to_string(worst - mism.begin()),
                             std::max(r.h, r.jm));
    }
    return ds;
}

std::vector<double> recursion_mismatch(const DarkState& ds) {
    const SpinSector sector(ds.n_spins);
    const CoupledBasisMap map(sector);
    const int top = map.max_total();
    std::vector<double> out(static_cast<std::size_t>(top + 1), 0.0);
    const int n = sector.n_spins();
    for (int j = 1; j <= top; ++j) {
        for (int m1t = -n; m1t <= n; m1t += 2) {
            if (std::abs(-2 * j + 2 - m1t) > n) {
                continue;
            }
            const Terms t = recursion_terms(map, j, HalfInt{m1t});
            const Complex lhs = ds.omega_over_kappa * t.lhs * ds.coeffs[static_cast<std::size_t>(j)];
            const Complex rhs = kI * t.bracket * ds.coeffs[static_cast<std::size_t>(j - 1)];
            out[static_cast<std::size_t>(j)] = std::max(out[static_cast<std::size_t>(j)], std::abs(lhs - rhs));
        }
    }
    return out;
}

DarkStateObservables dark_state_observables(const DarkState& ds, double tol) {
    const TwoSpinOperators ops = build_two_spin_ops(SpinSector(ds.n_spins));
    const CVector psi = ds.state_vector();
    auto ev = [&](const SparseMatrix& op) { return psi.dot(op * psi).real(); };
    DarkStateObservables o;
    o.sx1 = ev(ops.s1x);
    o.sx2 = ev(ops.s2x);
    o.sy1 = ev(ops.s1y);
    o.sy2 = ev(ops.s2y);
    o.sz1 = ev(ops.s1z);
    o.sz2 = ev(ops.s2z);
    const double bad = std::max({std::abs(o.sz1 - o.sz2), std::abs(o.sy1 + o.sy2), std::abs(o.sx1), std::abs(o.sx2)});
    if (bad > tol) {
        throw NumericalError("dark_state_observables: exchange identities violated by " + std::to_string(bad), bad);
    }
    return o;
}

}  // namespace btc
