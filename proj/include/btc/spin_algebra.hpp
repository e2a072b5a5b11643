#pragma once

#include <vector>

#include "btc/types.hpp"

namespace btc {

/// A half-integer stored as twice its value, so 1/2 is HalfInt{1}.
struct HalfInt {
    int twice = 0;

    static constexpr HalfInt from_double(double v) { return HalfInt{static_cast<int>(v * 2.0 + (v >= 0 ? 0.5 : -0.5))}; }
    constexpr double value() const { return twice / 2.0; }
    constexpr bool is_integer() const { return twice % 2 == 0; }
    friend constexpr bool operator==(HalfInt, HalfInt) = default;
    friend constexpr auto operator<=>(HalfInt, HalfInt) = default;
    friend constexpr HalfInt operator+(HalfInt a, HalfInt b) { return {a.twice + b.twice}; }
    friend constexpr HalfInt operator-(HalfInt a, HalfInt b) { return {a.twice - b.twice}; }
    friend constexpr HalfInt operator-(HalfInt a) { return {-a.twice}; }
};

/// Fully symmetric (Dicke) sector of N spin-1/2 particles: total spin j = N/2.
class SpinSector {
public:
    static constexpr int kMaxSpins = 4096;

    explicit SpinSector(int n_spins);

    int n_spins() const { return n_spins_; }
    HalfInt j() const { return HalfInt{n_spins_}; }
    int dim() const { return n_spins_ + 1; }
    /// Magnetic quantum number of basis index k; index 0 is m = -j (all spins down).
    HalfInt m_of_index(int k) const { return HalfInt{2 * k - n_spins_}; }
    int index_of_m(HalfInt m) const { return (m.twice + n_spins_) / 2; }

private:
    int n_spins_;
};

struct CollectiveOperators {
    SpinSector sector;
    CMatrix sx, sy, sz, sp, sm;
};

CollectiveOperators build_collective_ops(const SpinSector& sector);

/// Sparse lowering operator S_- of the sector (bidiagonal).
SparseMatrix lowering_operator(const SpinSector& sector);
/// Sparse S_x = (S_+ + S_-)/2.
SparseMatrix sx_operator(const SpinSector& sector);
SparseMatrix sz_operator(const SpinSector& sector);

/// Clebsch-Gordan coefficient <j1 m1; j2 m2 | J M> in the Condon-Shortley phase
/// convention. Zero whenever M != m1 + m2 or the triangle rule fails. Throws
/// ValidationError for negative spins, |m| > j or mismatched integer/half-integer parity.
double clebsch_gordan(HalfInt j1, HalfInt m1, HalfInt j2, HalfInt m2, HalfInt J, HalfInt M);

/// Clebsch-Gordan table for coupling two identical spins S = N/2 into J = 0..2S.
class CoupledBasisMap {
public:
    explicit CoupledBasisMap(const SpinSector& sector);

    const SpinSector& sector() const { return sector_; }
    HalfInt spin() const { return sector_.j(); }
    /// Largest total angular momentum, 2S, as an integer.
    int max_total() const { return sector_.n_spins(); }

    /// C^{J,M}_{S,m1;S,m2} with M = m1 + m2 implied. Out-of-range m gives 0.
    double coefficient(int total_j, HalfInt m1, HalfInt m2) const;

private:
    SpinSector sector_;
    // coeffs_[J][i1 * dim + i2]
    std::vector<std::vector<double>> coeffs_;
};

/// Index of |m1, m2> in the product basis used by two-spin operators (kron ordering).
inline int product_index(const SpinSector& s, int i1, int i2) { return i1 * s.dim() + i2; }

/// |J, M> in the product basis, dimension (N+1)^2. M defaults to -J.
CVector coupled_state(const CoupledBasisMap& map, int total_j);
CVector coupled_state(const CoupledBasisMap& map, int total_j, HalfInt total_m);

/// Collective operators of two identical spins on the product space.
struct TwoSpinOperators {
    SpinSector sector;
    SparseMatrix s1x, s1y, s1z, s1p, s1m;
    SparseMatrix s2x, s2y, s2z, s2p, s2m;
    SparseMatrix jm;  // S_-^(1) + S_-^(2)
};

TwoSpinOperators build_two_spin_ops(const SpinSector& sector);

/// Kronecker product of sparse matrices, (a ⊗ b) with row index i_a * rows(b) + i_b.
SparseMatrix kron(const SparseMatrix& a, const SparseMatrix& b);
SparseMatrix sparse_identity(int dim);

}  // namespace btc
