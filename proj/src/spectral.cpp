#include "btc/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "sparse_lu.hpp"

namespace btc {

namespace {

double column_norm1(const SparseColMatrix& s) {
    double best = 0.0;
    for (int c = 0; c < s.outerSize(); ++c) {
        double acc = 0.0;
        for (SparseColMatrix::InnerIterator it(s, c); it; ++it) {
            acc += std::abs(it.value());
        }
        best = std::max(best, acc);
    }
    return best;
}

// Tr[G(rho)] / Tr[rho]. Because the untilted, undeformed part of G is trace
// preserving, the error of this estimate is suppressed by (e^{-s} - 1) or by
// (omega1 - omega2) relative to the error of the eigenvector itself.
std::optional<Complex> trace_quotient(const Generator& g, const CMatrix& rho) {
    const Complex tr = rho.trace();
    if (std::abs(tr) <= 1e-8 * rho.norm()) {
        return std::nullopt;
    }
    return g.apply(rho).trace() / tr;
}

double eigen_residual(const Generator& g, const CMatrix& rho, Complex lambda) {
    return (g.apply(rho) - lambda * rho).norm() / rho.norm();
}

CMatrix normalized(CMatrix rho) {
    const Complex tr = rho.trace();
    if (std::abs(tr) > 1e-8 * rho.norm()) {
        rho /= tr;
    } else {
        rho /= rho.norm();
    }
    return rho;
}

CVector start_vector(int d) {
    const long n = static_cast<long>(d) * d;
    CVector v(n);
    std::mt19937_64 rng(0x5eedULL);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (long k = 0; k < n; ++k) {
        v(k) = 1e-3 * Complex(u(rng), u(rng));
    }
    for (int k = 0; k < d; ++k) {
        v(static_cast<long>(k) * d + k) += 1.0 / d;
    }
    return v / v.norm();
}

struct Ritz {
    Complex lambda;
    double estimate;  // |h_{m+1,m} y_m| / |nu|^2, residual estimate of lambda
    CVector y;
};

EigenResult krylov_dominant(const Generator& g, const EigenOptions& o) {
    const SparseColMatrix s = g.superoperator();
    const long n = s.rows();
    const int d = g.dim();
    const double snorm = std::max(column_norm1(s), 1e-300);
    const int m = static_cast<int>(std::min<long>(o.krylov_dim, n));

    SparseColMatrix id(n, n);
    id.setIdentity();

    double sigma = o.guess + 1e-2 * (1.0 + std::abs(o.guess));
    CVector v = start_vector(d);
    int total_iterations = 0;

    for (int shift_round = 0; shift_round < 6; ++shift_round) {
        detail::SparseLu lu;
        lu.factor(SparseColMatrix(s - Complex(sigma) * id));
        if (!lu.ok()) {
            sigma += 1e-2 * (1.0 + std::abs(sigma));
            continue;
        }
        bool reshift = false;
        for (int restart = 0; restart < o.max_restarts; ++restart) {
            ++total_iterations;
            CMatrix basis(n, m + 1);
            CMatrix hess = CMatrix::Zero(m + 1, m);
            basis.col(0) = v / v.norm();
            int used = m;
            for (int j = 0; j < m; ++j) {
                CVector w = lu.solve(basis.col(j));
                for (int pass = 0; pass < 2; ++pass) {
                    const CVector h = basis.leftCols(j + 1).adjoint() * w;
                    w.noalias() -= basis.leftCols(j + 1) * h;
                    hess.col(j).head(j + 1) += h;
                }
                const double beta = w.norm();
                hess(j + 1, j) = beta;
                if (beta <= 1e-14 * hess.col(j).head(j + 1).norm()) {
                    used = j + 1;
                    break;
                }
                basis.col(j + 1) = w / beta;
            }
            const CMatrix hm = hess.topLeftCorner(used, used);
            Eigen::ComplexEigenSolver<CMatrix> es(hm);
            const double tail = used < m || used == n ? 0.0 : std::abs(hess(used, used - 1));

            std::vector<Ritz> ritz;
            for (int k = 0; k < used; ++k) {
                const Complex nu = es.eigenvalues()(k);
                if (std::abs(nu) == 0.0) {
                    continue;
                }
                const CVector y = es.eigenvectors().col(k);
                ritz.push_back({Complex(sigma) + 1.0 / nu, tail * std::abs(y(used - 1)) / std::norm(nu), y});
            }
            if (ritz.empty()) {
                throw NumericalError("dominant_eigenvalue: Krylov basis collapsed");
            }
            // Largest |nu| is the eigenvalue closest to the shift.
            auto best = std::max_element(ritz.begin(), ritz.end(), [&](const Ritz& a, const Ritz& b) {
                return std::abs(a.lambda - sigma) > std::abs(b.lambda - sigma);
            });
            const double accept = o.tol * snorm;
            for (const Ritz& r : ritz) {
                if (r.estimate <= accept && r.lambda.real() > best->lambda.real() + accept &&
                    r.lambda.real() > sigma) {
                    sigma = r.lambda.real() + 1e-2 * (1.0 + std::abs(r.lambda.real()));
                    reshift = true;
                }
            }
            const CVector x = basis.leftCols(used) * best->y;
            CMatrix rho = Eigen::Map<const CMatrix>(x.data(), d, d);
            rho = normalized(rho);
            if (reshift) {
                v = x;
                break;
            }
            const Complex ritz_value = best->lambda;
            const double res_ritz = eigen_residual(g, rho, ritz_value);
            if (ritz_value.real() > sigma) {
                sigma = ritz_value.real() + 1e-2 * (1.0 + std::abs(ritz_value.real()));
                v = x;
                reshift = true;
                break;
            }
            if (res_ritz <= accept) {
                for (const Ritz& r : ritz) {
                    if (&r == &*best || r.estimate > accept) {
                        continue;
                    }
                    if (std::abs(r.lambda - ritz_value) > 1e3 * accept &&
                        std::abs(r.lambda.real() - ritz_value.real()) <= 1e3 * accept) {
                        throw NumericalError("dominant_eigenvalue: ambiguous dominance, eigenvalues " +
                                                 std::to_string(ritz_value.real()) + " and " +
                                                 std::to_string(r.lambda.real()) + " share a real part",
                                             res_ritz);
                    }
                }
                EigenResult out;
                out.backend = EigenBackend::krylov;
                out.iterations = total_iterations;
                out.value = trace_quotient(g, rho).value_or(ritz_value);
                out.residual = eigen_residual(g, rho, out.value);
                out.vector = std::move(rho);
                return out;
            }
            v = x;
        }
        if (!reshift) {
            break;
        }
    }
    throw NumericalError("dominant_eigenvalue: Krylov iteration did not converge");
}

// Dormand-Prince 5(4) coefficients.
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                 a65 = -5103.0 / 18656.0;
constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0, b5 = -2187.0 / 6784.0,
                 b6 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                 e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

EigenResult propagation_dominant(const Generator& g, const EigenOptions& o) {
    const int d = g.dim();
    CMatrix y = CMatrix::Identity(d, d) / double(d);
    double log_scale = 0.0;
    double t = 0.0;
    double h = 1e-3;
    CMatrix k1 = g.apply(y), k2(d, d), k3(d, d), k4(d, d), k5(d, d), k6(d, d), k7(d, d);
    CMatrix tmp(d, d), ynew(d, d);

    double next_mark = o.burn_in;
    double last_log = 0.0;
    std::optional<double> last_slope;
    int steps = 0;
    const long max_steps = 50'000'000;

    while (t < o.max_time) {
        h = std::min(h, next_mark - t);
        tmp = y + h * a21 * k1;
        g.apply(tmp, k2);
        tmp = y + h * (a31 * k1 + a32 * k2);
        g.apply(tmp, k3);
        tmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
        g.apply(tmp, k4);
        tmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        g.apply(tmp, k5);
        tmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        g.apply(tmp, k6);
        ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        g.apply(ynew, k7);
        tmp = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        double err = 0.0;
        for (long i = 0; i < tmp.size(); ++i) {
            const double sc = o.atol + o.rtol * std::max(std::abs(y.data()[i]), std::abs(ynew.data()[i]));
            err += std::norm(tmp.data()[i] / sc);
        }
        err = std::sqrt(err / double(tmp.size()));
        if (!std::isfinite(err)) {
            throw NumericalError("dominant_eigenvalue: propagation produced non-finite values");
        }
        if (++steps > max_steps) {
            throw NumericalError("dominant_eigenvalue: propagation step limit reached");
        }
        if (err <= 1.0) {
            t += h;
            const double scale = ynew.norm();
            y = ynew / scale;
            k1 = k7 / scale;
            log_scale += std::log(scale);
            if (t >= next_mark - 1e-12 * std::max(1.0, next_mark)) {
                if (next_mark > o.burn_in) {
                    const double slope = (log_scale - last_log) / o.window;
                    if (last_slope && std::abs(slope - *last_slope) <= o.slope_tol * std::max(1.0, std::abs(slope))) {
                        EigenResult out;
                        out.backend = EigenBackend::propagation;
                        out.iterations = steps;
                        CMatrix rho = normalized(y);
                        out.value = trace_quotient(g, rho).value_or(Complex(slope));
                        out.residual = eigen_residual(g, rho, out.value);
                        out.vector = std::move(rho);
                        return out;
                    }
                    last_slope = slope;
                }
                last_log = log_scale;
                next_mark += o.window;
            }
        }
        const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        h *= factor;
    }
    throw NumericalError("dominant_eigenvalue: growth rate did not settle before max_time");
}

EigenResult run_backend(const Generator& g, const EigenOptions& o, EigenBackend b) {
    return b == EigenBackend::krylov ? krylov_dominant(g, o) : propagation_dominant(g, o);
}

}  // namespace

EigenResult dominant_eigenvalue(const Generator& g, const EigenOptions& options) {
    if (options.krylov_dim < 3 || options.max_restarts < 1) {
        throw ValidationError("dominant_eigenvalue: need krylov_dim >= 3 and max_restarts >= 1");
    }
    if (!(options.tol > 0.0) || !(options.cross_tol > 0.0)) {
        throw ValidationError("dominant_eigenvalue: tolerances must be positive");
    }
    if (!(options.window > 0.0) || !(options.burn_in >= 0.0) || !(options.max_time > options.burn_in)) {
        throw ValidationError("dominant_eigenvalue: propagation needs window > 0 and max_time > burn_in");
    }
    EigenResult out = run_backend(g, options, options.backend);
    if (options.cross_check) {
        const EigenBackend other =
            options.backend == EigenBackend::krylov ? EigenBackend::propagation : EigenBackend::krylov;
        const EigenResult check = run_backend(g, options, other);
        out.cross_value = check.value;
        const double scale = std::max(1.0, std::abs(out.value));
        if (std::abs(check.value - out.value) > options.cross_tol * scale) {
            throw NumericalError("dominant_eigenvalue: Krylov and propagation backends disagree (" +
                                     std::to_string(out.value.real()) + " vs " + std::to_string(check.value.real()) +
                                     ")",
                                 std::abs(check.value - out.value));
        }
    }
    return out;
}

namespace {

Generator build_generator(const ModelParams& params, const SizeLimits& limits) {
    return params.is_cascaded() ? build_cascaded_generator(params, limits) : build_btc_generator(params);
}

double tilted_theta(const Generator& g, double s, double intensity, const EigenOptions& base, ScgfPoint* diag) {
    EigenOptions o = base;
    o.guess = std::expm1(-s) * intensity;
    const EigenResult r = dominant_eigenvalue(tilt(g, s), o);
    if (diag) {
        *diag = {s, r.value.real(), r.residual, r.iterations};
    }
    return r.value.real();
}

}  // namespace

CumulantRates cumulant_rates(const Generator& g, const ScgfOptions& options) {
    if (!(options.h_s > 0.0)) {
        throw ValidationError("scgf: h_s must be positive");
    }
    const StationaryResult ss = stationary_state(g, options.stationary);
    const double mu = ss.intensity;
    struct Diffs {
        double d1, d2;
    };
    auto diffs = [&](double h) {
        const double tp = tilted_theta(g, h, mu, options.eigen, nullptr);
        const double tm = tilted_theta(g, -h, mu, options.eigen, nullptr);
        return Diffs{(tp - tm) / (2.0 * h), (tp + tm) / (h * h)};
    };
    CumulantRates out;
    out.intensity = mu;
    out.stationary_residual = ss.residual;
    double h = options.h_s;
    Diffs coarse = diffs(h);
    if (!options.richardson) {
        out.theta_p0 = coarse.d1;
        out.theta_pp0 = coarse.d2;
        out.h_s = h;
    }
    // Bursty emission gives large higher cumulants; shrink the step until the
    // extrapolated first cumulant reproduces the stationary intensity.
    for (int halving = 0; options.richardson; ++halving) {
        const Diffs fine = diffs(0.5 * h);
        out.theta_p0 = fine.d1 + (fine.d1 - coarse.d1) / 3.0;
        out.theta_pp0 = fine.d2 + (fine.d2 - coarse.d2) / 3.0;
        out.h_s = h;
        if (std::abs(out.theta_p0 + mu) <= options.intensity_rtol * mu + 1e-12 || halving >= options.max_halvings) {
            break;
        }
        h *= 0.5;
        coarse = fine;
    }
    if (std::abs(out.theta_p0 + mu) > options.intensity_rtol * mu + 1e-12) {
        throw NumericalError("scgf: -theta'(0) = " + std::to_string(-out.theta_p0) +
                                 " disagrees with the stationary intensity " + std::to_string(mu),
                             std::abs(out.theta_p0 + mu));
    }
    return out;
}

ScgfResult scgf_curve(const ModelParams& params, const std::vector<double>& s_grid, const ScgfOptions& options) {
    for (double s : s_grid) {
        if (!std::isfinite(s)) {
            throw ValidationError("scgf: s grid contains a non-finite value");
        }
    }
    check_exact_size(params, options.stationary.limits);
    const Generator g = build_generator(params, options.stationary.limits);
    const CumulantRates rates = cumulant_rates(g, options);

    ScgfResult out;
    out.s_grid = s_grid;
    out.theta_p0 = rates.theta_p0;
    out.theta_pp0 = rates.theta_pp0;
    out.h_s = rates.h_s;
    out.intensity = rates.intensity;
    out.stationary_residual = rates.stationary_residual;
    for (double s : s_grid) {
        ScgfPoint p;
        const double theta = s == 0.0 ? 0.0 : tilted_theta(g, s, rates.intensity, options.eigen, &p);
        if (s == 0.0) {
            p = {0.0, 0.0, 0.0, 0};
        }
        out.theta.push_back(theta);
        out.diagnostics.push_back(p);
    }
    return out;
}

QfiResult qfi_rate(const ModelParams& params, const QfiOptions& options) {
    if (params.is_cascaded()) {
        throw ValidationError("qfi_rate: defined for the single BTC only");
    }
    if (!(options.h > 0.0)) {
        throw ValidationError("qfi_rate: h must be positive");
    }
    const double w = params.omega;
    const Generator g = build_btc_generator(params);
    QfiResult out;
    out.omega = w;
    out.h = options.h;
    auto lam = [&](double w1, double w2) {
        EigenOptions o = options.eigen;
        o.guess = 0.0;
        return dominant_eigenvalue(deform(g, w1, w2), o).value.real();
    };
    auto stencil = [&](double h) {
        const double pp = lam(w + h, w + h);
        const double pm = lam(w + h, w - h);
        const double mp = lam(w - h, w + h);
        const double mm = lam(w - h, w - h);
        out.diagonal_lambda = std::max({out.diagonal_lambda, std::abs(pp), std::abs(mm)});
        return 4.0 * (pp - pm - mp + mm) / (4.0 * h * h);
    };
    out.qfi_h = stencil(options.h);
    out.qfi_h2 = stencil(0.5 * options.h);
    const double diff = std::abs(out.qfi_h - out.qfi_h2);
    if (diff > options.halving_tol * std::max(std::abs(out.qfi_h2), 1e-300)) {
        throw NumericalError("qfi_rate: h and h/2 stencils differ by " + std::to_string(diff) +
                                 "; try a different step",
                             diff);
    }
    out.qfi_rate = options.richardson ? out.qfi_h2 + (out.qfi_h2 - out.qfi_h) / 3.0 : out.qfi_h2;
    if (out.qfi_rate < 0.0) {
        throw NumericalError("qfi_rate: negative Fisher information rate", out.qfi_rate);
    }
    out.sensitivity = std::sqrt(out.qfi_rate);
    return out;
}

}  // namespace btc
