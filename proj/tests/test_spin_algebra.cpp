#include <doctest.h>

#include <cmath>

#include "btc/spin_algebra.hpp"

using namespace btc;

namespace {

HalfInt h(int twice) { return HalfInt{twice}; }

}  // namespace

TEST_CASE("collective operators obey the SU(2) algebra and the Casimir") {
    for (int n = 1; n <= 7; ++n) {
        const CollectiveOperators op = build_collective_ops(SpinSector(n));
        CHECK(max_abs(op.sx * op.sy - op.sy * op.sx - kI * op.sz) < 1e-12);
        CHECK(max_abs(op.sy * op.sz - op.sz * op.sy - kI * op.sx) < 1e-12);
        CHECK(max_abs(op.sz * op.sx - op.sx * op.sz - kI * op.sy) < 1e-12);
        CHECK(max_abs(op.sp * op.sm - op.sm * op.sp - 2.0 * op.sz) < 1e-12);
        const double j = 0.5 * n;
        const CMatrix casimir = op.sx * op.sx + op.sy * op.sy + op.sz * op.sz;
        CHECK(max_abs(casimir - j * (j + 1) * CMatrix::Identity(n + 1, n + 1)) < 1e-11);
        CHECK(max_abs(op.sp - op.sm.adjoint()) == 0.0);
    }
}

TEST_CASE("sector indexing puts all spins down at index 0") {
    const SpinSector s(5);
    CHECK(s.dim() == 6);
    CHECK(s.m_of_index(0) == h(-5));
    CHECK(s.index_of_m(h(5)) == 5);
    const CMatrix sz(sz_operator(s));
    CHECK(sz(0, 0).real() == doctest::Approx(-2.5));
    CHECK_THROWS_AS(SpinSector(0), ValidationError);
    CHECK_THROWS_AS(SpinSector(SpinSector::kMaxSpins + 1), ValidationError);
}

TEST_CASE("Clebsch-Gordan values in the Condon-Shortley convention") {
    CHECK(clebsch_gordan(h(1), h(1), h(1), h(-1), h(2), h(0)) == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(clebsch_gordan(h(1), h(1), h(1), h(-1), h(0), h(0)) == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(clebsch_gordan(h(1), h(-1), h(1), h(1), h(0), h(0)) == doctest::Approx(-1.0 / std::sqrt(2.0)));
    CHECK(clebsch_gordan(h(2), h(2), h(2), h(2), h(4), h(4)) == doctest::Approx(1.0));
    // <1 0; 1 0 | 1 0> vanishes by symmetry
    CHECK(std::abs(clebsch_gordan(h(2), h(0), h(2), h(0), h(2), h(0))) < 1e-15);
    CHECK(clebsch_gordan(h(2), h(0), h(2), h(0), h(0), h(0)) == doctest::Approx(-1.0 / std::sqrt(3.0)));
    // M != m1 + m2 and triangle violations give zero
    CHECK(clebsch_gordan(h(1), h(1), h(1), h(1), h(2), h(0)) == 0.0);
    CHECK(clebsch_gordan(h(1), h(1), h(1), h(-1), h(4), h(0)) == 0.0);
}

TEST_CASE("Clebsch-Gordan input validation") {
    CHECK_THROWS_AS(clebsch_gordan(h(-1), h(1), h(1), h(1), h(0), h(0)), ValidationError);
    CHECK_THROWS_AS(clebsch_gordan(h(1), h(3), h(1), h(1), h(2), h(2)), ValidationError);
    CHECK_THROWS_AS(clebsch_gordan(h(2), h(1), h(1), h(1), h(2), h(2)), ValidationError);
}

TEST_CASE("Clebsch-Gordan tables are orthonormal by brute force") {
    for (int tj1 : {1, 2, 3, 4}) {
        for (int tj2 : {1, 2, 3}) {
            const int jmin = std::abs(tj1 - tj2), jmax = tj1 + tj2;
            for (int tJ = jmin; tJ <= jmax; tJ += 2) {
                for (int tJp = jmin; tJp <= jmax; tJp += 2) {
                    for (int tM = -std::min(tJ, tJp); tM <= std::min(tJ, tJp); tM += 2) {
                        double overlap = 0.0;
                        for (int tm1 = -tj1; tm1 <= tj1; tm1 += 2) {
                            const int tm2 = tM - tm1;
                            if (std::abs(tm2) > tj2) {
                                continue;
                            }
                            overlap += clebsch_gordan(h(tj1), h(tm1), h(tj2), h(tm2), h(tJ), h(tM)) *
                                       clebsch_gordan(h(tj1), h(tm1), h(tj2), h(tm2), h(tJp), h(tM));
                        }
                        CHECK(overlap == doctest::Approx(tJ == tJp ? 1.0 : 0.0).epsilon(1e-12).scale(1.0));
                    }
                }
            }
        }
    }
}

TEST_CASE("coupled states are total-spin eigenstates of the two-spin system") {
    const SpinSector s(3);
    const CoupledBasisMap map(s);
    const TwoSpinOperators ops = build_two_spin_ops(s);
    const CMatrix jx = CMatrix(ops.s1x) + CMatrix(ops.s2x);
    const CMatrix jy = CMatrix(ops.s1y) + CMatrix(ops.s2y);
    const CMatrix jz = CMatrix(ops.s1z) + CMatrix(ops.s2z);
    const CMatrix j2 = jx * jx + jy * jy + jz * jz;
    for (int J = 0; J <= map.max_total(); ++J) {
        const CVector v = coupled_state(map, J);
        CHECK(v.norm() == doctest::Approx(1.0));
        CHECK((j2 * v - J * (J + 1.0) * v).norm() < 1e-11);
        CHECK((jz * v + double(J) * v).norm() < 1e-11);
        CHECK((CMatrix(ops.jm) * v).norm() < 1e-11);
        for (int K = 0; K < J; ++K) {
            CHECK(std::abs(coupled_state(map, K).dot(v)) < 1e-12);
        }
    }
    CHECK_THROWS_AS(coupled_state(map, 7), ValidationError);
}

TEST_CASE("kron follows the product index i1 * d + i2") {
    const SpinSector s(2);
    const SparseMatrix a = sz_operator(s);
    const SparseMatrix id = sparse_identity(s.dim());
    const CMatrix k(kron(a, id));
    for (int i1 = 0; i1 < 3; ++i1) {
        for (int i2 = 0; i2 < 3; ++i2) {
            const int p = product_index(s, i1, i2);
            CHECK(k(p, p).real() == doctest::Approx(s.m_of_index(i1).value()));
        }
    }
}
