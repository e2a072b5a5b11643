#include <doctest.h>

#include <cmath>

#include "btc/hp_oracle.hpp"

using namespace btc;

TEST_CASE("intensive drive") {
    CHECK(intensive_omega(7.5, 30) == doctest::Approx(0.5));
    CHECK_THROWS_AS(intensive_omega(1.0, 0), ValidationError);
}

TEST_CASE("single-BTC prediction satisfies its self-consistency") {
    for (double w : {0.0, 0.1, 0.4, 0.8, 0.99}) {
        const HpPrediction p = hp_single(w);
        CHECK(p.valid);
        CHECK(hp_self_consistency_residual(p, w) < 1e-12);
        CHECK(std::abs(p.m_plus - Complex(0.0, w)) < 1e-15);
        CHECK(p.a >= p.b);
        CHECK(p.b >= 0.0);
    }
    const HpPrediction zero = hp_single(0.0);
    CHECK(zero.a == doctest::Approx(std::sqrt(2.0)));
    CHECK(zero.b == doctest::Approx(0.0));
}

TEST_CASE("at the critical drive both Bogoliubov weights equal one half") {
    const HpPrediction p = hp_single(1.0);
    CHECK(p.a == doctest::Approx(0.5));
    CHECK(p.b == doctest::Approx(0.5));
    CHECK_FALSE(hp_single(1.2).valid);
    CHECK(hp_single_bare(7.5, 30).a == doctest::Approx(hp_single(0.5).a));
}

TEST_CASE("fluctuation vacuum is normalized and follows the squeezing ratio") {
    for (double w : {0.2, 0.7, 0.95}) {
        const HpPrediction p = hp_single(w);
        const std::vector<double> c = fluctuation_vacuum(p, 1e-14);
        double norm = 0.0;
        for (double v : c) {
            norm += v * v;
        }
        CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
        if (c.size() > 1) {
            const double r = p.b / p.a;
            CHECK(c[1] / c[0] == doctest::Approx(-r / std::sqrt(2.0)));
        }
    }
    CHECK(fluctuation_vacuum(hp_single(0.0)).size() == 1);
    CHECK_THROWS_AS(fluctuation_vacuum(hp_single(1.0)), ValidationError);
}

TEST_CASE("closed-form rates") {
    CHECK(hp_scgf(2.0, 1.0, 0.0) == 0.0);
    CHECK(hp_scgf(2.0, 1.0, 0.1) == doctest::Approx(std::expm1(-0.1) * 4.0));
    CHECK(hp_estimation_error() == doctest::Approx(0.5));
    CHECK(hp_estimation_error(4.0) == doctest::Approx(1.0));
    CHECK(hp_qfi_rate() == doctest::Approx(4.0));
    CHECK(hp_sensitivity() == doctest::Approx(2.0));
    CHECK(hp_deformed_eigenvalue(7.5, 7.0) == doctest::Approx(-0.125));
    CHECK(hp_deformed_eigenvalue(3.0, 3.0) == 0.0);
}

TEST_CASE("cascaded stationary-phase boundary") {
    // omega_D = omega_c / 2: the boundary sits at omega - omega_D = omega_c / 4
    const int n = 40;
    const double wc = 20.0, wd = 0.5 * wc;
    CHECK(hp_cascaded(wd + 0.24 * wc, wd, n).stationary_phase);
    CHECK_FALSE(hp_cascaded(wd + 0.26 * wc, wd, n).stationary_phase);
    CHECK_FALSE(hp_cascaded(1.1 * wc, 0.2 * wc, n).stationary_phase);
}

TEST_CASE("cascaded magnetizations and counting statistics") {
    const int n = 20;
    const HpCascaded c = hp_cascaded(3.0, 2.5, n);
    CHECK(c.stationary_phase);
    CHECK(c.sy1 == doctest::Approx(3.0));
    CHECK(c.sy2 == doctest::Approx(-3.5));
    CHECK(c.sz1 == doctest::Approx(-10.0 * std::sqrt(1.0 - 0.09)));
    CHECK(c.scgf(0.0) == 0.0);
    // on the dark line nothing is emitted at leading order
    const HpCascaded dark = hp_cascaded(2.0, 2.0, n);
    CHECK(std::abs(dark.scgf(-0.05)) < 1e-14);
    CHECK(dark.sy1 == doctest::Approx(-dark.sy2));
}
