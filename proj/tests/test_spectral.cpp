#include <doctest.h>

#include <cmath>

#include "btc/hp_oracle.hpp"
#include "btc/spectral.hpp"
#include "oracles.hpp"

using namespace btc;

TEST_CASE("dominant eigenvalue of tilted generators matches the dense spectrum") {
    const Generator single = build_btc_generator(ModelParams::single(4, 1.7));
    const Generator casc = build_cascaded_generator(ModelParams::cascaded(2, 0.9, 0.6));
    for (const Generator* g : {&single, &casc}) {
        for (double s : {-0.3, -0.05, 0.1, 0.5}) {
            const Generator t = tilt(*g, s);
            const Complex ref = oracle::dominant(t.dense_superoperator());
            EigenOptions eo;
            eo.cross_check = true;
            const EigenResult r = dominant_eigenvalue(t, eo);
            CHECK(std::abs(r.value - ref) < 1e-10);
            REQUIRE(r.cross_value.has_value());
            CHECK(std::abs(*r.cross_value - ref) < 1e-6);
            CHECK(r.residual < 1e-10);
        }
    }
}

TEST_CASE("both eigen backends agree on a larger generator") {
    const Generator g = tilt(build_btc_generator(ModelParams::single(20, 3.0)), -0.05);
    EigenOptions kry;
    EigenOptions prop;
    prop.backend = EigenBackend::propagation;
    const EigenResult a = dominant_eigenvalue(g, kry);
    const EigenResult b = dominant_eigenvalue(g, prop);
    CHECK(a.backend == EigenBackend::krylov);
    CHECK(b.backend == EigenBackend::propagation);
    CHECK(std::abs(a.value - b.value) < 1e-6 * std::max(1.0, std::abs(a.value)));
}

TEST_CASE("scgf is calibrated to zero at s = 0 and convex") {
    const std::vector<double> grid{-0.1, -0.05, 0.0, 0.05, 0.1};
    const ScgfResult r = scgf_curve(ModelParams::single(6, 1.5), grid);
    CHECK(r.theta[2] == 0.0);
    EigenOptions eo;
    CHECK(std::abs(dominant_eigenvalue(tilt(build_btc_generator(ModelParams::single(6, 1.5)), 0.0), eo).value) <
          1e-10);
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
        CHECK(r.theta[i - 1] + r.theta[i + 1] - 2 * r.theta[i] > 0.0);
    }
    CHECK(r.theta.front() > 0.0);
    CHECK(r.theta.back() < 0.0);
    CHECK(-r.theta_p0 == doctest::Approx(r.intensity).epsilon(1e-6));
}

TEST_CASE("cumulant rates agree with dense linear response") {
    const Generator single = build_btc_generator(ModelParams::single(4, 1.3));
    const Generator strong = build_btc_generator(ModelParams::single(4, 4.0));
    const Generator casc = build_cascaded_generator(ModelParams::cascaded(2, 1.1, 0.7));
    for (const Generator* g : {&single, &strong, &casc}) {
        const oracle::Cumulants ref = oracle::counting_cumulants(*g);
        const CumulantRates r = cumulant_rates(*g);
        CHECK(-r.theta_p0 == doctest::Approx(ref.mean).epsilon(1e-8));
        CHECK(r.theta_pp0 == doctest::Approx(ref.variance).epsilon(1e-6));
        CHECK(r.intensity == doctest::Approx(ref.mean).epsilon(1e-10));
    }
}

TEST_CASE("one spin reproduces the resonance-fluorescence Mandel factor") {
    // Var rate / mean = 1 - 6 omega^2 kappa^2 / (kappa^2 + 2 omega^2)^2 for the driven two-level atom
    for (double w : {0.4, 1.0, 2.0}) {
        const CumulantRates r = cumulant_rates(build_btc_generator(ModelParams::single(1, w)));
        const double q = 1.0 - 6.0 * w * w / std::pow(1.0 + 2 * w * w, 2);
        CHECK(r.theta_pp0 / r.intensity == doctest::Approx(q).epsilon(1e-7));
    }
}

TEST_CASE("QFI rate agrees with the dense perturbative oracle") {
    for (double w : {0.5, 2.0, 3.5}) {
        const ModelParams p = ModelParams::single(4, w);
        const double ref = oracle::qfi_rate(build_btc_generator(p));
        const QfiResult q = qfi_rate(p);
        CHECK(q.qfi_rate == doctest::Approx(ref).epsilon(1e-5));
        CHECK(q.sensitivity == doctest::Approx(std::sqrt(ref)).epsilon(1e-5));
        CHECK(q.diagonal_lambda < 1e-10);
    }
}

TEST_CASE("deformed eigenvalue: diagonal zero and exchange conjugation") {
    const Generator g = build_btc_generator(ModelParams::single(8, 1.0));
    EigenOptions eo;
    CHECK(std::abs(dominant_eigenvalue(deform(g, 1.3, 1.3), eo).value) < 1e-10);
    for (auto [a, b] : {std::pair{1.0, 1.4}, std::pair{0.2, 0.9}, std::pair{3.0, 2.5}}) {
        eo.guess = hp_deformed_eigenvalue(a, b);
        const Complex l12 = dominant_eigenvalue(deform(g, a, b), eo).value;
        const Complex l21 = dominant_eigenvalue(deform(g, b, a), eo).value;
        CHECK(std::abs(l12 - std::conj(l21)) < 1e-10);
        const Complex ref = oracle::dominant(deform(g, a, b).dense_superoperator());
        CHECK(std::abs(l12 - ref) < 1e-9);
    }
}

TEST_CASE("QFI on the stationary plateau approaches the linearized value") {
    const QfiResult q = qfi_rate(ModelParams::single(30, 0.2 * 15.0));
    CHECK(q.sensitivity == doctest::Approx(hp_sensitivity()).epsilon(1e-3));
    CHECK(std::abs(q.qfi_h - q.qfi_h2) <= 0.01 * q.qfi_h2);
}

TEST_CASE("spectral inputs are validated") {
    const Generator g = build_btc_generator(ModelParams::single(3, 1.0));
    EigenOptions bad;
    bad.krylov_dim = 1;
    CHECK_THROWS_AS(dominant_eigenvalue(tilt(g, 0.1), bad), ValidationError);
    ScgfOptions so;
    so.h_s = -1.0;
    CHECK_THROWS_AS(scgf_curve(ModelParams::single(3, 1.0), {0.0}, so), ValidationError);
    CHECK_THROWS_AS(qfi_rate(ModelParams::cascaded(3, 1.0, 1.0)), ValidationError);
}
