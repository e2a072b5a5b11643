#include "btc/liouville.hpp"

#include <cmath>
#include <string>
#include <vector>

#include <unsupported/Eigen/KroneckerProduct>

#include "sparse_lu.hpp"

namespace btc {

ModelParams ModelParams::single(int n_spins, double omega, double kappa) {
    ModelParams p;
    p.n_spins = n_spins;
    p.omega = omega;
    p.kappa = kappa;
    p.validate();
    return p;
}

ModelParams ModelParams::cascaded(int n_spins, double omega, double omega_d, double kappa) {
    ModelParams p;
    p.n_spins = n_spins;
    p.omega = omega;
    p.omega_d = omega_d;
    p.kappa = kappa;
    p.validate();
    return p;
}

void ModelParams::validate() const {
    if (n_spins < 1) {
        throw ValidationError("n_spins must be >= 1");
    }
    if (!(kappa > 0.0) || !std::isfinite(kappa)) {
        throw ValidationError("kappa must be positive");
    }
    if (!(omega >= 0.0) || !std::isfinite(omega)) {
        throw ValidationError("omega must be non-negative");
    }
    if (omega_d && (!(*omega_d >= 0.0) || !std::isfinite(*omega_d))) {
        throw ValidationError("omega_d must be non-negative");
    }
}

double DensityMatrix::min_eigenvalue() const {
    const CMatrix h = 0.5 * (m_ + m_.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

double DensityMatrix::purity() const {
    return (m_ * m_).trace().real();
}

double DensityMatrix::fidelity(const CVector& psi) const {
    return psi.dot(m_ * psi).real();
}

Complex DensityMatrix::expectation(const SparseMatrix& op) const {
    return (op * m_).trace();
}

SparseMatrix Generator::hamiltonian(double omega) const {
    return SparseMatrix(omega * drive_ + static_h_);
}

SparseMatrix Generator::effective_hamiltonian() const {
    if (kind_ != GeneratorKind::lindblad) {
        throw ValidationError("effective_hamiltonian: only defined for the plain Lindblad generator");
    }
    return SparseMatrix(hamiltonian(omega_left_) - Complex(0.0, 0.5) * jump_number_);
}

void Generator::refresh() {
    jump_adj_ = jump_.adjoint();
    jump_number_ = jump_adj_ * jump_;
    jump_number_.prune(Complex(0.0));
    const SparseMatrix h_left = hamiltonian(omega_left_);
    const SparseMatrix h_right = hamiltonian(omega_right_);
    left_ = Complex(0.0, -1.0) * h_left - 0.5 * jump_number_;
    right_ = Complex(0.0, 1.0) * h_right - 0.5 * jump_number_;
    left_.makeCompressed();
    right_.makeCompressed();
}

void Generator::apply(const CMatrix& rho, CMatrix& out) const {
    if (rho.rows() != dim() || rho.cols() != dim()) {
        throw ValidationError("Generator::apply: dimension mismatch");
    }
    out.noalias() = left_ * rho;
    out.noalias() += rho * right_;
    const CMatrix l_rho = jump_ * rho;
    out.noalias() += std::exp(-s_) * (l_rho * jump_adj_);
}

CMatrix Generator::apply(const CMatrix& rho) const {
    CMatrix out(dim(), dim());
    apply(rho, out);
    return out;
}

SparseColMatrix Generator::superoperator() const {
    const int d = dim();
    SparseColMatrix id(d, d);
    id.setIdentity();
    const SparseColMatrix left(left_);
    const SparseColMatrix right_t(right_.transpose());
    const SparseColMatrix l(jump_);
    const SparseColMatrix l_conj(jump_.conjugate());
    SparseColMatrix s = Eigen::kroneckerProduct(id, left).eval();
    s += Eigen::kroneckerProduct(right_t, id).eval();
    s += std::exp(-s_) * SparseColMatrix(Eigen::kroneckerProduct(l_conj, l).eval());
    s.prune(Complex(0.0));
    s.makeCompressed();
    return s;
}

CMatrix Generator::dense_superoperator(int max_dim) const {
    const long n = static_cast<long>(dim()) * dim();
    if (n > max_dim) {
        throw ValidationError("dense_superoperator: dimension " + std::to_string(n) + " exceeds limit " +
                              std::to_string(max_dim));
    }
    return CMatrix(superoperator());
}

Generator build_btc_generator(const ModelParams& params) {
    params.validate();
    if (params.is_cascaded()) {
        throw ValidationError("build_btc_generator: params describe a cascaded system");
    }
    const SpinSector sector(params.n_spins);
    Generator g;
    g.params_ = params;
    g.omega_left_ = params.omega;
    g.omega_right_ = params.omega;
    g.drive_ = sx_operator(sector);
    g.static_h_ = SparseMatrix(sector.dim(), sector.dim());
    g.jump_ = std::sqrt(params.kappa) * lowering_operator(sector);
    g.refresh();
    return g;
}

Generator build_cascaded_generator(const ModelParams& params, const SizeLimits& limits) {
    params.validate();
    if (!params.is_cascaded()) {
        throw ValidationError("build_cascaded_generator: omega_d is required");
    }
    if (params.n_spins > limits.generator_cascaded) {
        throw ValidationError("build_cascaded_generator: N = " + std::to_string(params.n_spins) +
                              " exceeds the cascaded size cap " + std::to_string(limits.generator_cascaded));
    }
    const SpinSector sector(params.n_spins);
    const TwoSpinOperators ops = build_two_spin_ops(sector);
    const double kappa = params.kappa;

    Generator g;
    g.params_ = params;
    g.omega_left_ = params.omega;
    g.omega_right_ = params.omega;
    g.drive_ = ops.s1x;
    // H_c = -i kappa (S+^(2) S-^(1) - S+^(1) S-^(2)) / 2
    const SparseMatrix coupling = Complex(0.0, -0.5 * kappa) * SparseMatrix(ops.s2p * ops.s1m - ops.s1p * ops.s2m);
    g.static_h_ = *params.omega_d * ops.s2x + coupling;
    g.static_h_.prune(Complex(0.0));
    g.jump_ = std::sqrt(kappa) * ops.jm;
    g.refresh();
    return g;
}

Generator tilt(const Generator& g, double s) {
    if (g.kind_ != GeneratorKind::lindblad) {
        throw ValidationError("tilt: expects a plain Lindblad generator");
    }
    Generator out = g;
    out.kind_ = GeneratorKind::tilted;
    out.s_ = s;
    return out;
}

Generator deform(const Generator& g, double omega1, double omega2) {
    if (g.kind_ != GeneratorKind::lindblad) {
        throw ValidationError("deform: expects a plain Lindblad generator");
    }
    Generator out = g;
    out.kind_ = GeneratorKind::deformed;
    out.omega_left_ = omega1;
    out.omega_right_ = omega2;
    out.refresh();
    return out;
}

void check_exact_size(const ModelParams& params, const SizeLimits& limits) {
    const int cap = params.is_cascaded() ? limits.exact_cascaded : limits.exact_single;
    if (params.n_spins > cap) {
        throw ValidationError("N = " + std::to_string(params.n_spins) + " exceeds the exact-solve cap of " +
                              std::to_string(cap) + (params.is_cascaded() ? " (cascaded)" : " (single)") +
                              "; use the trajectory method");
    }
}

StationaryResult stationary_state(const Generator& g, const StationaryOptions& options) {
    if (g.kind() != GeneratorKind::lindblad) {
        throw ValidationError("stationary_state: expects a plain Lindblad generator");
    }
    check_exact_size(g.params(), options.limits);

    const int d = g.dim();
    const long n = static_cast<long>(d) * d;
    const SparseColMatrix s = g.superoperator();

    // Replace the first equation (the one for rho_00) by the trace condition.
    std::vector<Eigen::Triplet<Complex>> triplets;
    triplets.reserve(static_cast<std::size_t>(s.nonZeros() + d));
    for (int col = 0; col < s.outerSize(); ++col) {
        for (SparseColMatrix::InnerIterator it(s, col); it; ++it) {
            if (it.row() != 0) {
                triplets.emplace_back(static_cast<int>(it.row()), col, it.value());
            }
        }
    }
    for (int k = 0; k < d; ++k) {
        triplets.emplace_back(0, k * d + k, Complex(1.0));
    }
    SparseColMatrix bordered(n, n);
    bordered.setFromTriplets(triplets.begin(), triplets.end());
    bordered.makeCompressed();

    detail::SparseLu lu;
    lu.factor(bordered);
    if (!lu.ok()) {
        throw NumericalError("stationary_state: singular bordered system; the stationary state is not unique");
    }
    CVector rhs = CVector::Zero(n);
    rhs(0) = 1.0;
    CVector x = lu.solve(rhs);
    for (int step = 0; step < options.refinement_steps; ++step) {
        const CVector r = rhs - bordered * x;
        x += lu.solve(r);
    }
    if (!x.allFinite()) {
        throw NumericalError("stationary_state: non-finite solution; the stationary state is not unique");
    }

    CMatrix rho = Eigen::Map<const CMatrix>(x.data(), d, d);
    rho = 0.5 * (rho + rho.adjoint());
    rho /= rho.trace();

    StationaryResult out;
    out.residual = max_abs(g.apply(rho));
    out.intensity = (g.jump_number() * rho).trace().real();
    out.rho_ss = DensityMatrix(std::move(rho));
    if (!(out.residual <= options.tol)) {
        throw NumericalError("stationary_state: residual " + std::to_string(out.residual) + " above tolerance",
                             out.residual);
    }
    return out;
}

CMatrix reduced_sensor_state(const CMatrix& rho, const SpinSector& sector) {
    const int d = sector.dim();
    CMatrix out = CMatrix::Zero(d, d);
    for (int i1 = 0; i1 < d; ++i1) {
        for (int j1 = 0; j1 < d; ++j1) {
            Complex acc = 0.0;
            for (int k = 0; k < d; ++k) {
                acc += rho(i1 * d + k, j1 * d + k);
            }
            out(i1, j1) = acc;
        }
    }
    return out;
}

CMatrix reduced_decoder_state(const CMatrix& rho, const SpinSector& sector) {
    const int d = sector.dim();
    CMatrix out = CMatrix::Zero(d, d);
    for (int i2 = 0; i2 < d; ++i2) {
        for (int j2 = 0; j2 < d; ++j2) {
            Complex acc = 0.0;
            for (int k = 0; k < d; ++k) {
                acc += rho(k * d + i2, k * d + j2);
            }
            out(i2, j2) = acc;
        }
    }
    return out;
}

}  // namespace btc
