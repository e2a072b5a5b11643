#include <doctest.h>

#include <cmath>

#include "btc/cascaded.hpp"
#include "btc/liouville.hpp"
#include "btc/spectral.hpp"

using namespace btc;

TEST_CASE("dark state annihilates H and the collective jump") {
    for (int n : {1, 2, 3, 6, 10, 17, 30}) {
        for (double x : {0.05, 0.2, 1.0, 5.0, 40.0}) {
            const DarkState ds = build_dark_state(n, x);
            CHECK(ds.residual_h < 1e-10);
            CHECK(ds.residual_jm < 1e-10);
            CHECK(ds.coeffs.size() == static_cast<std::size_t>(n + 1));
            CHECK(ds.state_vector().norm() == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(ds.reduced.back() == 1.0);
        }
    }
}

TEST_CASE("one spin pair: the recursion gives a_0 = sqrt(2)") {
    const DarkState ds = build_dark_state(1, 0.7);
    CHECK(ds.reduced[0] == doctest::Approx(std::sqrt(2.0)));
    // A_0 = -i x a_0 / sqrt(norm), A_1 = 1 / sqrt(norm)
    const double norm = 2.0 * 0.49 + 1.0;
    CHECK(std::abs(ds.coeffs[0] - Complex(0.0, -0.7 * std::sqrt(2.0) / std::sqrt(norm))) < 1e-14);
    CHECK(std::abs(ds.coeffs[1] - 1.0 / std::sqrt(norm)) < 1e-14);
}

TEST_CASE("the weak-drive limit is the J = 2S state") {
    const DarkState ds = build_dark_state(6, 1e-6);
    CHECK(std::abs(ds.coeffs.back()) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("admissible pair choices give the same state and the recursion is consistent for all pairs") {
    for (int n : {2, 5, 12}) {
        for (double x : {0.3, 2.0}) {
            const DarkState a = build_dark_state(n, x, PairChoice::max_m1);
            const DarkState b = build_dark_state(n, x, PairChoice::min_m1);
            for (std::size_t j = 0; j < a.coeffs.size(); ++j) {
                CHECK(std::abs(a.coeffs[j] - b.coeffs[j]) < 1e-12);
            }
            for (double m : recursion_mismatch(a)) {
                CHECK(m < 1e-10);
            }
        }
    }
}

TEST_CASE("perturbed coefficients are caught by the residual check") {
    const DarkState ds = build_dark_state(6, 1.0);
    const DarkStateResiduals clean = verify_coefficients(6, 1.0, ds.coeffs);
    CHECK(clean.h < 1e-10);
    CHECK(clean.jm < 1e-10);
    for (std::size_t j = 0; j < ds.coeffs.size(); ++j) {
        std::vector<Complex> bad = ds.coeffs;
        bad[j] += 1e-3;
        const DarkStateResiduals r = verify_coefficients(6, 1.0, bad);
        CHECK_MESSAGE(std::max(r.h, r.jm) > 1e-4, "J = " << j);
    }
    CHECK_THROWS_AS(verify_coefficients(6, 1.0, std::vector<Complex>(3)), ValidationError);
}

TEST_CASE("dark-state magnetization identities") {
    for (double x : {0.3, 1.0, 3.0}) {
        const DarkStateObservables o = dark_state_observables(build_dark_state(10, x));
        CHECK(std::abs(o.sz1 - o.sz2) < 1e-10);
        CHECK(std::abs(o.sy1 + o.sy2) < 1e-10);
        CHECK(std::abs(o.sx1) < 1e-10);
        CHECK(std::abs(o.sx2) < 1e-10);
        CHECK(o.sz1 < 0.0);
    }
}

TEST_CASE("dark state is the stationary state of the cascade on the dark line") {
    for (int n : {2, 4}) {
        for (double x : {0.4, 1.5}) {
            const DarkState ds = build_dark_state(n, x);
            const StationaryResult ss = stationary_state(build_cascaded_generator(ModelParams::cascaded(n, x, x)));
            CHECK(ss.intensity < 1e-10);
            CHECK(ss.rho_ss.fidelity(ds.state_vector()) > 1.0 - 1e-10);
        }
    }
}

TEST_CASE("dark-state inputs are validated") {
    CHECK_THROWS_AS(build_dark_state(0, 1.0), ValidationError);
    CHECK_THROWS_AS(build_dark_state(3, -1.0), ValidationError);
}
