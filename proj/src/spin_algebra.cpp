#include "btc/spin_algebra.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <unsupported/Eigen/KroneckerProduct>

namespace btc {
namespace {

constexpr int kLogFactorialSize = 4 * SpinSector::kMaxSpins + 8;

const std::vector<long double>& log_factorials() {
    static const std::vector<long double> table = [] {
        std::vector<long double> t(kLogFactorialSize, 0.0L);
        for (int n = 2; n < kLogFactorialSize; ++n) {
            t[n] = t[n - 1] + std::log(static_cast<long double>(n));
        }
        return t;
    }();
    return table;
}

long double lf(int n) { return log_factorials().at(static_cast<std::size_t>(n)); }

void check_spin_pair(HalfInt j, HalfInt m, const char* name) {
    if (j.twice < 0) {
        throw ValidationError(std::string("clebsch_gordan: negative spin ") + name);
    }
    if (std::abs(m.twice) > j.twice) {
        throw ValidationError(std::string("clebsch_gordan: |m| > j for ") + name);
    }
    if ((j.twice - m.twice) % 2 != 0) {
        throw ValidationError(std::string("clebsch_gordan: j - m not integer for ") + name);
    }
}

}  // namespace

SpinSector::SpinSector(int n_spins) : n_spins_(n_spins) {
    if (n_spins < 1) {
        throw ValidationError("SpinSector: need at least one spin, got " + std::to_string(n_spins));
    }
    if (n_spins > kMaxSpins) {
        throw ValidationError("SpinSector: " + std::to_string(n_spins) + " spins exceeds the supported maximum");
    }
}

SparseMatrix lowering_operator(const SpinSector& sector) {
    const int n = sector.n_spins();
    SparseMatrix sm(sector.dim(), sector.dim());
    sm.reserve(Eigen::VectorXi::Constant(sector.dim(), 1));
    // S_-|j,m> = sqrt((j+m)(j-m+1)) |j,m-1>, with j+m = k and j-m+1 = n-k+1.
    for (int k = 1; k <= n; ++k) {
        sm.insert(k - 1, k) = std::sqrt(static_cast<double>(k) * (n - k + 1));
    }
    sm.makeCompressed();
    return sm;
}

SparseMatrix sx_operator(const SpinSector& sector) {
    const SparseMatrix sm = lowering_operator(sector);
    const SparseMatrix sp = sm.adjoint();
    return SparseMatrix(0.5 * (sp + sm));
}

SparseMatrix sz_operator(const SpinSector& sector) {
    SparseMatrix sz(sector.dim(), sector.dim());
    sz.reserve(Eigen::VectorXi::Constant(sector.dim(), 1));
    for (int k = 0; k < sector.dim(); ++k) {
        sz.insert(k, k) = sector.m_of_index(k).value();
    }
    sz.makeCompressed();
    return sz;
}

CollectiveOperators build_collective_ops(const SpinSector& sector) {
    CollectiveOperators ops{sector, {}, {}, {}, {}, {}};
    ops.sm = CMatrix(lowering_operator(sector));
    ops.sp = ops.sm.adjoint();
    ops.sx = 0.5 * (ops.sp + ops.sm);
    ops.sy = (ops.sp - ops.sm) / (2.0 * kI);
    ops.sz = CMatrix(sz_operator(sector));
    return ops;
}

double clebsch_gordan(HalfInt j1, HalfInt m1, HalfInt j2, HalfInt m2, HalfInt J, HalfInt M) {
    check_spin_pair(j1, m1, "j1");
    check_spin_pair(j2, m2, "j2");
    check_spin_pair(J, M, "J");
    if (m1.twice + m2.twice != M.twice) {
        return 0.0;
    }
    if (J.twice < std::abs(j1.twice - j2.twice) || J.twice > j1.twice + j2.twice) {
        return 0.0;
    }
    if ((j1.twice + j2.twice + J.twice) % 2 != 0) {
        return 0.0;
    }

    // Integer combinations entering the Racah formula.
    const int a = (j1.twice + j2.twice - J.twice) / 2;  // j1 + j2 - J
    const int b = (j1.twice - m1.twice) / 2;             // j1 - m1
    const int c = (j2.twice + m2.twice) / 2;             // j2 + m2
    const int d = (J.twice - j2.twice + m1.twice) / 2;   // J - j2 + m1
    const int e = (J.twice - j1.twice - m2.twice) / 2;   // J - j1 - m2

    const long double log_pref =
        0.5L * (std::log(static_cast<long double>(J.twice + 1)) + lf((J.twice + j1.twice - j2.twice) / 2) +
                lf((J.twice - j1.twice + j2.twice) / 2) + lf(a) - lf((j1.twice + j2.twice + J.twice) / 2 + 1) +
                lf((J.twice + M.twice) / 2) + lf((J.twice - M.twice) / 2) + lf(b) + lf((j1.twice + m1.twice) / 2) +
                lf((j2.twice - m2.twice) / 2) + lf(c));

    const int k_min = std::max({0, -d, -e});
    const int k_max = std::min({a, b, c});

    // Kahan-compensated alternating sum.
    long double sum = 0.0L;
    long double comp = 0.0L;
    for (int k = k_min; k <= k_max; ++k) {
        const long double log_den = lf(k) + lf(a - k) + lf(b - k) + lf(c - k) + lf(d + k) + lf(e + k);
        const long double term = ((k % 2 == 0) ? 1.0L : -1.0L) * std::exp(log_pref - log_den);
        const long double y = term - comp;
        const long double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return static_cast<double>(sum);
}

CoupledBasisMap::CoupledBasisMap(const SpinSector& sector) : sector_(sector) {
    const int dim = sector.dim();
    const HalfInt s = sector.j();
    coeffs_.assign(static_cast<std::size_t>(max_total() + 1), std::vector<double>(static_cast<std::size_t>(dim) * dim, 0.0));
    for (int total = 0; total <= max_total(); ++total) {
        const HalfInt big_j{2 * total};
        for (int i1 = 0; i1 < dim; ++i1) {
            for (int i2 = 0; i2 < dim; ++i2) {
                const HalfInt m1 = sector.m_of_index(i1);
                const HalfInt m2 = sector.m_of_index(i2);
                const HalfInt big_m = m1 + m2;
                if (std::abs(big_m.twice) > big_j.twice) {
                    continue;
                }
                coeffs_[total][static_cast<std::size_t>(i1 * dim + i2)] = clebsch_gordan(s, m1, s, m2, big_j, big_m);
            }
        }
    }
}

double CoupledBasisMap::coefficient(int total_j, HalfInt m1, HalfInt m2) const {
    if (total_j < 0 || total_j > max_total()) {
        return 0.0;
    }
    const int n = sector_.n_spins();
    if (std::abs(m1.twice) > n || std::abs(m2.twice) > n) {
        return 0.0;
    }
    const int i1 = sector_.index_of_m(m1);
    const int i2 = sector_.index_of_m(m2);
    return coeffs_[total_j][static_cast<std::size_t>(i1 * sector_.dim() + i2)];
}

CVector coupled_state(const CoupledBasisMap& map, int total_j) {
    return coupled_state(map, total_j, HalfInt{-2 * total_j});
}

CVector coupled_state(const CoupledBasisMap& map, int total_j, HalfInt total_m) {
    if (total_j < 0 || total_j > map.max_total()) {
        throw ValidationError("coupled_state: J = " + std::to_string(total_j) + " outside [0, 2S]");
    }
    if (std::abs(total_m.twice) > 2 * total_j || total_m.twice % 2 != 0) {
        throw ValidationError("coupled_state: invalid M for J = " + std::to_string(total_j));
    }
    const SpinSector& s = map.sector();
    const int dim = s.dim();
    CVector v = CVector::Zero(dim * dim);
    for (int i1 = 0; i1 < dim; ++i1) {
        const HalfInt m1 = s.m_of_index(i1);
        const HalfInt m2 = total_m - m1;
        if (std::abs(m2.twice) > s.n_spins()) {
            continue;
        }
        const int i2 = s.index_of_m(m2);
        v(product_index(s, i1, i2)) = map.coefficient(total_j, m1, m2);
    }
    return v;
}

SparseMatrix sparse_identity(int dim) {
    SparseMatrix id(dim, dim);
    id.setIdentity();
    return id;
}

SparseMatrix kron(const SparseMatrix& a, const SparseMatrix& b) {
    SparseMatrix out = Eigen::kroneckerProduct(a, b).eval();
    out.makeCompressed();
    return out;
}

TwoSpinOperators build_two_spin_ops(const SpinSector& sector) {
    const SparseMatrix id = sparse_identity(sector.dim());
    const SparseMatrix sm = lowering_operator(sector);
    const SparseMatrix sp = sm.adjoint();
    const SparseMatrix sx = 0.5 * (sp + sm);
    const SparseMatrix sy = Complex(0.0, -0.5) * (sp - sm);
    const SparseMatrix sz = sz_operator(sector);

    TwoSpinOperators ops{sector, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}};
    ops.s1x = kron(sx, id);
    ops.s1y = kron(sy, id);
    ops.s1z = kron(sz, id);
    ops.s1p = kron(sp, id);
    ops.s1m = kron(sm, id);
    ops.s2x = kron(id, sx);
    ops.s2y = kron(id, sy);
    ops.s2z = kron(id, sz);
    ops.s2p = kron(id, sp);
    ops.s2m = kron(id, sm);
    ops.jm = ops.s1m + ops.s2m;
    return ops;
}

}  // namespace btc
