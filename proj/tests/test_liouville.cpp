#include <doctest.h>

#include <cmath>
#include <random>

#include "btc/liouville.hpp"
#include "oracles.hpp"

using namespace btc;

namespace {

CMatrix random_density(int d, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    CMatrix a(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            a(i, j) = Complex(n(rng), n(rng));
        }
    }
    CMatrix rho = a * a.adjoint();
    return rho / rho.trace();
}

CMatrix random_matrix(int d, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    CMatrix a(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            a(i, j) = Complex(n(rng), n(rng));
        }
    }
    return a;
}

}  // namespace

TEST_CASE("model parameters are validated") {
    CHECK_THROWS_AS(ModelParams::single(0, 1.0).validate(), ValidationError);
    CHECK_THROWS_AS(ModelParams::single(4, -1.0).validate(), ValidationError);
    CHECK_THROWS_AS(ModelParams::single(4, 1.0, 0.0).validate(), ValidationError);
    CHECK_THROWS_AS(ModelParams::cascaded(4, 1.0, -0.5).validate(), ValidationError);
    CHECK(ModelParams::single(10, 1.0).omega_c() == doctest::Approx(5.0));
    CHECK_THROWS_AS(build_btc_generator(ModelParams::cascaded(3, 1.0, 1.0)), ValidationError);
    CHECK_THROWS_AS(build_cascaded_generator(ModelParams::single(3, 1.0)), ValidationError);
}

TEST_CASE("the cascaded generator refuses sizes beyond its cap") {
    SizeLimits lim;
    lim.generator_cascaded = 5;
    CHECK_THROWS_AS(build_cascaded_generator(ModelParams::cascaded(6, 1.0, 1.0), lim), ValidationError);
    CHECK_NOTHROW(build_cascaded_generator(ModelParams::cascaded(5, 1.0, 1.0), lim));
    StationaryOptions so;
    so.limits.exact_single = 3;
    CHECK_THROWS_AS(stationary_state(build_btc_generator(ModelParams::single(4, 1.0)), so), ValidationError);
}

TEST_CASE("generators preserve trace and Hermiticity") {
    const Generator single = build_btc_generator(ModelParams::single(6, 1.3, 0.7));
    const Generator casc = build_cascaded_generator(ModelParams::cascaded(3, 0.9, 0.4));
    for (const Generator* g : {&single, &casc}) {
        for (unsigned seed = 1; seed <= 3; ++seed) {
            const CMatrix x = random_matrix(g->dim(), seed);
            const CMatrix gx = g->apply(x);
            CHECK(std::abs(gx.trace()) < 1e-12 * x.norm() * g->dim());
            CHECK(max_abs(g->apply(x.adjoint()) - gx.adjoint()) < 1e-12 * x.norm());
        }
    }
}

TEST_CASE("the assembled superoperator matches the matrix action") {
    const Generator g = build_cascaded_generator(ModelParams::cascaded(2, 0.8, 0.3));
    const CMatrix by_action = oracle::superop_by_action(g);
    CHECK(max_abs(by_action - g.dense_superoperator()) < 1e-13);
    const Generator t = tilt(build_btc_generator(ModelParams::single(3, 0.5)), 0.3);
    CHECK(max_abs(oracle::superop_by_action(t) - CMatrix(t.superoperator())) < 1e-13);
    CHECK_THROWS_AS(g.dense_superoperator(10), ValidationError);
}

TEST_CASE("tilt and deform reduce to the plain generator at their calibration points") {
    const Generator g = build_btc_generator(ModelParams::single(5, 1.1));
    const CMatrix l = g.dense_superoperator();
    CHECK(max_abs(tilt(g, 0.0).dense_superoperator() - l) == 0.0);
    CHECK(max_abs(deform(g, 1.1, 1.1).dense_superoperator() - l) < 1e-15);
    // s -> infinity removes the recycling term, leaving the no-jump part
    const CMatrix lj(g.jump());
    const CMatrix no_jump = l - oracle::sandwich(lj, lj.adjoint());
    CHECK(max_abs(tilt(g, 60.0).dense_superoperator() - no_jump) < 1e-12);
    CHECK(tilt(g, 0.2).counting_field() == 0.2);
    CHECK(tilt(g, 0.2).kind() == GeneratorKind::tilted);
    CHECK_THROWS_AS(tilt(tilt(g, 0.1), 0.1), ValidationError);
    CHECK_THROWS_AS(deform(tilt(g, 0.1), 1.0, 1.0), ValidationError);
}

TEST_CASE("a deformed generator is trace preserving only on the diagonal") {
    const Generator g = build_btc_generator(ModelParams::single(4, 1.0));
    const CMatrix rho = random_density(5, 7);
    CHECK(std::abs(deform(g, 1.0, 1.0).apply(rho).trace()) < 1e-13);
    CHECK(std::abs(deform(g, 1.0, 1.2).apply(rho).trace()) > 1e-4);
}

TEST_CASE("resonance fluorescence: one spin reduces to the driven two-level atom") {
    // H = omega sigma_x / 2, L = sqrt(kappa) sigma_-: rho_ee = omega^2 / (2 omega^2 + kappa^2)
    for (double w : {0.3, 1.0, 2.5}) {
        for (double k : {0.5, 1.0, 2.0}) {
            const Generator g = build_btc_generator(ModelParams::single(1, w, k));
            const StationaryResult ss = stationary_state(g);
            const double pe = w * w / (2 * w * w + k * k);
            CHECK(ss.rho_ss.matrix()(1, 1).real() == doctest::Approx(pe).epsilon(1e-12));
            CHECK(ss.intensity == doctest::Approx(k * pe).epsilon(1e-12));
            // <sigma_-> = rho_eg is purely imaginary on resonance
            const Complex coh = ss.rho_ss.matrix()(0, 1);
            CHECK(std::abs(coh.real()) < 1e-13);
            CHECK(std::abs(coh.imag()) == doctest::Approx(w * k / (2 * w * w + k * k)).epsilon(1e-12));
            CHECK(ss.residual < 1e-12);
        }
    }
}

TEST_CASE("stationary states agree with the dense null space") {
    const Generator single = build_btc_generator(ModelParams::single(8, 3.0));
    const Generator casc = build_cascaded_generator(ModelParams::cascaded(3, 1.2, 0.9));
    for (const Generator* g : {&single, &casc}) {
        const StationaryResult ss = stationary_state(*g);
        const CMatrix ref = oracle::stationary(g->dense_superoperator(), g->dim());
        CHECK(max_abs(ss.rho_ss.matrix() - ref) < 1e-10);
        CHECK(std::abs(ss.rho_ss.trace() - 1.0) < 1e-12);
        CHECK(ss.rho_ss.hermiticity_error() < 1e-12);
        CHECK(ss.rho_ss.min_eigenvalue() > -1e-8);
        CHECK(ss.rho_ss.purity() <= 1.0 + 1e-12);
        const double mu = std::real((CMatrix(g->jump_number()) * ss.rho_ss.matrix()).trace());
        CHECK(ss.intensity == doctest::Approx(mu).epsilon(1e-12));
    }
}

TEST_CASE("reduced states of the cascade are normalized and match partial traces") {
    const ModelParams p = ModelParams::cascaded(3, 1.0, 0.6);
    const Generator g = build_cascaded_generator(p);
    const CMatrix rho = stationary_state(g).rho_ss.matrix();
    const SpinSector s(3);
    const CMatrix r1 = reduced_sensor_state(rho, s);
    const CMatrix r2 = reduced_decoder_state(rho, s);
    CHECK(std::abs(r1.trace() - 1.0) < 1e-12);
    CHECK(std::abs(r2.trace() - 1.0) < 1e-12);
    CMatrix ref = CMatrix::Zero(4, 4);
    for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
            for (int k = 0; k < 4; ++k) {
                ref(a, b) += rho(product_index(s, a, k), product_index(s, b, k));
            }
        }
    }
    CHECK(max_abs(r1 - ref) < 1e-14);
    // the sensor alone is a single BTC: its reduced state is the single stationary state
    const CMatrix single = stationary_state(build_btc_generator(ModelParams::single(3, 1.0))).rho_ss.matrix();
    CHECK(max_abs(r1 - single) < 1e-10);
}

TEST_CASE("density-matrix helpers") {
    CMatrix m = CMatrix::Zero(2, 2);
    m(0, 0) = 1.0;
    const DensityMatrix rho(m);
    CVector psi(2);
    psi << 1.0, 0.0;
    CHECK(rho.fidelity(psi) == doctest::Approx(1.0));
    CHECK(rho.purity() == doctest::Approx(1.0));
    CHECK(rho.min_eigenvalue() == doctest::Approx(0.0));
}
