#pragma once

#include <utility>

#include <Eigen/UmfPackSupport>

#include "btc/types.hpp"

namespace btc::detail {

// Sparse direct LU for vectorized superoperators. UMFPACK's symmetric strategy
// with a nested-dissection ordering handles the kron-structured patterns far
// better than the default column ordering.
class SparseLu {
public:
    // UMFPACK keeps referring to the matrix, so the object owns a copy.
    void factor(SparseColMatrix a) {
        a_ = std::move(a);
        a_.makeCompressed();
        lu_.umfpackControl()(UMFPACK_STRATEGY) = UMFPACK_STRATEGY_SYMMETRIC;
        lu_.umfpackControl()(UMFPACK_ORDERING) = UMFPACK_ORDERING_CHOLMOD;
        lu_.compute(a_);
        ok_ = lu_.info() == Eigen::Success;
    }
    bool ok() const { return ok_; }
    CVector solve(const CVector& b) const { return lu_.solve(b); }

private:
    SparseColMatrix a_;
    Eigen::UmfPackLU<SparseColMatrix> lu_;
    bool ok_ = false;
};

}  // namespace btc::detail
