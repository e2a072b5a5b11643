#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "btc/trajectories.hpp"

using namespace btc;

namespace {

/// Records with Poisson counts at a known rate, independent of any simulator.
std::vector<CountRecord> poisson_records(double rate, double window, int n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::poisson_distribution<long> pois(rate * window);
    std::vector<CountRecord> out(n);
    for (int i = 0; i < n; ++i) {
        out[i].traj_index = i;
        out[i].n_counts = pois(rng);
        out[i].window = window;
        out[i].i_t = double(out[i].n_counts) / window;
    }
    return out;
}

}  // namespace

TEST_CASE("trajectory configs are validated") {
    TrajectoryConfig c;
    CHECK_NOTHROW(c.validate());
    c.t_burn = c.t_total;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = {};
    c.n_traj = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = {};
    c.jump_tol = 0.0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = {};
    CHECK(c.window() == doctest::Approx(400.0));
}

TEST_CASE("SplitMix64 streams are reproducible and draw from (0, 1]") {
    SplitMix64 a(3, 5), b(3, 5), c(3, 6), d(4, 5);
    std::set<std::uint64_t> firsts;
    for (int i = 0; i < 1000; ++i) {
        const std::uint64_t x = a.next();
        CHECK(x == b.next());
        if (i == 0) {
            firsts.insert(x);
            firsts.insert(c.next());
            firsts.insert(d.next());
        }
    }
    CHECK(firsts.size() == 3);
    SplitMix64 u(1, 1);
    double lo = 1.0, sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double v = u.uniform_open0();
        CHECK_MESSAGE((v > 0.0 && v <= 1.0), v);
        lo = std::min(lo, v);
        sum += v;
    }
    CHECK(sum / 100000 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("ensemble statistics on synthetic Poisson records") {
    const double rate = 3.0, window = 50.0;
    const auto recs = poisson_records(rate, window, 20000, 11);
    const IntensityStats s = ensemble_stats(recs);
    CHECK(s.n_traj == 20000);
    CHECK(std::abs(s.mean - rate) < 4 * s.stderr_mean);
    // Poisson: window * var(I_T) = rate
    CHECK(s.sigma_prefactor == doctest::Approx(std::sqrt(rate)).epsilon(0.03));
    CHECK(std::abs(s.sigma_prefactor - std::sqrt(rate)) < 4 * s.sigma_stderr);
    CHECK(s.stderr_mean == doctest::Approx(std::sqrt(s.variance / 20000)).epsilon(1e-12));
}

TEST_CASE("standard error shrinks by sqrt(2) when the ensemble doubles") {
    const auto small = ensemble_stats(poisson_records(2.0, 100.0, 40000, 1));
    const auto large = ensemble_stats(poisson_records(2.0, 100.0, 80000, 2));
    CHECK(small.stderr_mean / large.stderr_mean == doctest::Approx(std::sqrt(2.0)).epsilon(0.02));
}

TEST_CASE("ensemble statistics reject heterogeneous or tiny inputs") {
    auto recs = poisson_records(1.0, 10.0, 5, 3);
    recs[2].window = 20.0;
    CHECK_THROWS_AS(ensemble_stats(recs), ValidationError);
    CHECK_THROWS_AS(ensemble_stats(poisson_records(1.0, 10.0, 1, 3)), ValidationError);
}

TEST_CASE("seeded trajectories are deterministic and independent of thread count") {
    const Generator g = build_btc_generator(ModelParams::single(4, 1.0));
    TrajectoryConfig cfg;
    cfg.t_total = 60;
    cfg.t_burn = 10;
    cfg.n_traj = 24;
    cfg.seed = 42;
    const auto a = run_ensemble(g, cfg, 1, true);
    const auto b = run_ensemble(g, cfg, 3, true);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].traj_index == i);
        CHECK(a[i].jump_times == b[i].jump_times);
        CHECK(a[i].n_counts == b[i].n_counts);
        CHECK(a[i].n_counts == static_cast<long>(a[i].jump_times.size()));
        for (double t : a[i].jump_times) {
            CHECK((t > cfg.t_burn && t <= cfg.t_total));
        }
    }
    const CountRecord single = run_photocount_trajectory(g, cfg, 5);
    CHECK(single.jump_times == a[5].jump_times);
    cfg.seed = 43;
    CHECK(run_photocount_trajectory(g, cfg, 5).jump_times != a[5].jump_times);
}

TEST_CASE("the single BTC runs in real arithmetic") {
    const Generator single = build_btc_generator(ModelParams::single(5, 1.0));
    const Generator casc = build_cascaded_generator(ModelParams::cascaded(3, 1.0, 0.8));
    TrajectoryConfig cfg;
    cfg.t_total = 30;
    cfg.t_burn = 5;
    CHECK(PhotocountSimulator(single, cfg).real_arithmetic());
    const PhotocountSimulator ps(casc, cfg);
    const CountRecord r = ps.run(0);
    CHECK(r.window == doctest::Approx(25.0));
}

TEST_CASE("mean counting rate agrees with the stationary intensity") {
    const ModelParams p = ModelParams::single(1, 1.0);
    const Generator g = build_btc_generator(p);
    TrajectoryConfig cfg;
    cfg.t_total = 220;
    cfg.t_burn = 20;
    cfg.n_traj = 400;
    const IntensityStats s = ensemble_stats(run_ensemble(g, cfg, 1));
    const double mu = 1.0 / 3.0;  // kappa omega^2 / (2 omega^2 + kappa^2)
    CHECK(std::abs(s.mean - mu) < 4 * s.stderr_mean);
    // sub-Poissonian: window var = mu (1 - 6/9)
    CHECK(s.sigma_prefactor == doctest::Approx(std::sqrt(mu / 3.0)).epsilon(0.1));
}

TEST_CASE("starting from all up changes early counts but not the stationary rate") {
    const Generator g = build_btc_generator(ModelParams::single(6, 1.5));
    TrajectoryConfig cfg;
    cfg.t_total = 2.0;
    cfg.t_burn = 0.0;
    cfg.n_traj = 50;
    const IntensityStats down = ensemble_stats(run_ensemble(g, cfg, 1));
    cfg.initial = InitialState::all_up;
    const IntensityStats up = ensemble_stats(run_ensemble(g, cfg, 1));
    // an inverted collective spin radiates a superradiant burst
    CHECK(up.mean > down.mean + 1.0);
}

TEST_CASE("Monte Carlo estimation error flags a flat signal") {
    TrajectoryConfig cfg;
    cfg.t_total = 40;
    cfg.t_burn = 5;
    cfg.n_traj = 20;
    CHECK_THROWS_AS(mc_estimation_error(ModelParams::single(1, 1.0), cfg, 0.0, 1), ValidationError);
    CHECK_THROWS_AS(mc_estimation_error(ModelParams::single(1, 0.01), cfg, 0.02, 1), ValidationError);
    // deep in saturation one spin emits at kappa / 2 whatever the drive
    CHECK_THROWS_AS(mc_estimation_error(ModelParams::single(1, 20.0), cfg, 0.01, 1), NumericalError);
}

TEST_CASE("Monte Carlo sigma is taken at the operating point, not averaged over the flanks") {
    // resonance fluorescence: sigma^2 = mu (1 - 6 w^2 / (1 + 2 w^2)^2), mu = w^2 / (1 + 2 w^2)
    auto sigma2 = [](double w) {
        const double q = 1.0 + 2.0 * w * w;
        return w * w / q * (1.0 - 6.0 * w * w / (q * q));
    };
    TrajectoryConfig cfg;
    cfg.t_total = 220;
    cfg.t_burn = 20;
    cfg.n_traj = 2000;
    const double w = 0.3;
    const double dw = 0.25;
    const McErrorResult mc = mc_estimation_error(ModelParams::single(1, w), cfg, dw, 2);
    CHECK(mc.sigma_prefactor == mc.centre.sigma_prefactor);
    CHECK(std::abs(mc.sigma_prefactor - std::sqrt(sigma2(w))) < 4 * mc.centre.sigma_stderr);
    const double flank = std::sqrt(0.5 * (sigma2(w - dw) + sigma2(w + dw)));
    CHECK(std::abs(mc.sigma_prefactor - flank) > 10 * mc.centre.sigma_stderr);
    CHECK(mc.delta_omega_bar == doctest::Approx(mc.sigma_prefactor / std::abs(mc.derivative)));
}
