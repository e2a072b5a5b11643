#include "btc/trajectories.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <string>
#include <type_traits>

#include <unsupported/Eigen/MatrixFunctions>

#include "btc/parallel.hpp"

namespace btc {

void TrajectoryConfig::validate() const {
    if (!(t_total > t_burn) || !(t_burn >= 0.0) || !std::isfinite(t_total)) {
        throw ValidationError("trajectories: need t_total > t_burn >= 0");
    }
    if (n_traj < 1) {
        throw ValidationError("trajectories: n_traj must be >= 1");
    }
    if (!(jump_tol > 0.0)) {
        throw ValidationError("trajectories: jump_tol must be positive");
    }
}

namespace {

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

SplitMix64::SplitMix64(std::uint64_t seed, std::uint64_t stream)
    : state_(mix64(seed + 0x9e3779b97f4a7c15ULL) ^ mix64(stream * 0xd1b54a32d192ed03ULL + 0x2545f4914f6cdd1dULL)) {}

std::uint64_t SplitMix64::next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
}

double SplitMix64::uniform_open0() {
    return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
}

namespace {

constexpr int kTaylorOrder = 16;

template <class T>
struct Engine {
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
    using Sp = Eigen::SparseMatrix<T, Eigen::RowMajor>;

    Sp k_sparse;  // -i H_eff
    Sp jump;
    std::vector<Mat> prop;  // prop[k] = exp(K dt0 2^-k)
    std::vector<double> dt;
    Vec initial;
    TrajectoryConfig cfg;

    double finest() const { return dt.back(); }
    int levels() const { return static_cast<int>(dt.size()); }

    void setup(const Mat& k_dense, double dt0) {
        const double knorm = k_dense.cwiseAbs().colwise().sum().maxCoeff();
        int top = 0;
        while (knorm * dt0 * std::ldexp(1.0, -top) > 0.5 && top < 60) {
            ++top;
        }
        dt.resize(static_cast<std::size_t>(top + 1));
        prop.resize(static_cast<std::size_t>(top + 1));
        for (int k = 0; k <= top; ++k) {
            dt[static_cast<std::size_t>(k)] = dt0 * std::ldexp(1.0, -k);
        }
        prop[static_cast<std::size_t>(top)] = Mat(k_dense * T(dt.back())).exp();
        for (int k = top - 1; k >= 0; --k) {
            prop[static_cast<std::size_t>(k)] = prop[static_cast<std::size_t>(k + 1)] * prop[static_cast<std::size_t>(k + 1)];
        }
    }

    // v_j = K^j psi / j!, and the coefficients of ||sum_j tau^j v_j||^2.
    void taylor(const Vec& psi, std::vector<Vec>& v, std::vector<double>& c) const {
        v.resize(kTaylorOrder + 1);
        v[0] = psi;
        for (int j = 1; j <= kTaylorOrder; ++j) {
            v[static_cast<std::size_t>(j)] = (k_sparse * v[static_cast<std::size_t>(j - 1)]) / T(double(j));
        }
        c.assign(2 * kTaylorOrder + 1, 0.0);
        for (int i = 0; i <= kTaylorOrder; ++i) {
            c[static_cast<std::size_t>(2 * i)] += v[static_cast<std::size_t>(i)].squaredNorm();
            for (int j = i + 1; j <= kTaylorOrder; ++j) {
                c[static_cast<std::size_t>(i + j)] +=
                    2.0 * std::real(v[static_cast<std::size_t>(i)].dot(v[static_cast<std::size_t>(j)]));
            }
        }
    }

    static double poly(const std::vector<double>& c, double x) {
        double acc = 0.0;
        for (auto it = c.rbegin(); it != c.rend(); ++it) {
            acc = acc * x + *it;
        }
        return acc;
    }

    static double dpoly(const std::vector<double>& c, double x) {
        double acc = 0.0;
        for (std::size_t n = c.size() - 1; n >= 1; --n) {
            acc = acc * x + double(n) * c[n];
        }
        return acc;
    }

    static Vec combine(const std::vector<Vec>& v, double tau) {
        Vec out = v.back();
        for (int j = kTaylorOrder - 1; j >= 0; --j) {
            out = out * T(tau) + v[static_cast<std::size_t>(j)];
        }
        return out;
    }

    // Norm^2 crosses r inside (0, hi]; q(0) > r >= q(hi).
    double root(const std::vector<double>& c, double r, double hi) const {
        double lo = 0.0;
        double x = 0.5 * hi;
        for (int it = 0; it < 200; ++it) {
            const double f = poly(c, x) - r;
            if (std::abs(f) <= cfg.jump_tol) {
                return x;
            }
            if (f > 0.0) {
                lo = x;
            } else {
                hi = x;
            }
            const double df = dpoly(c, x);
            double nx = df < 0.0 ? x - f / df : 0.5 * (lo + hi);
            if (!(nx > lo && nx < hi)) {
                nx = 0.5 * (lo + hi);
            }
            if (hi - lo <= 1e-15 * std::max(1.0, hi)) {
                return 0.5 * (lo + hi);
            }
            x = nx;
        }
        return x;
    }

    int level_for_rate(double rate) const {
        if (!(rate > 0.0)) {
            return 0;
        }
        const int k = static_cast<int>(std::ceil(std::log2(dt[0] * rate)));
        return std::clamp(k, 0, levels() - 1);
    }

    CountRecord run(std::uint64_t index, bool keep_times) const {
        CountRecord rec;
        rec.traj_index = index;
        rec.window = cfg.window();
        SplitMix64 rng(cfg.seed, index);
        Vec psi = initial;
        double norm2 = 1.0;
        double r = rng.uniform_open0();
        double t = 0.0;
        int level = 0;
        const int top = levels() - 1;
        std::vector<Vec> v;
        std::vector<double> c;
        Vec phi(psi.size());
        while (t < cfg.t_total) {
            const double remaining = cfg.t_total - t;
            while (level < top && dt[static_cast<std::size_t>(level)] > remaining) {
                ++level;
            }
            if (level < top) {
                phi.noalias() = prop[static_cast<std::size_t>(level)] * psi;
                const double n2 = phi.squaredNorm();
                if (n2 > norm2 * (1.0 + 1e-9)) {
                    throw NumericalError("trajectory: no-jump norm increased", n2 - norm2);
                }
                if (n2 > r) {
                    psi.swap(phi);
                    norm2 = n2;
                    t += dt[static_cast<std::size_t>(level)];
                    level = std::max(level - 1, 0);
                } else {
                    ++level;
                }
                continue;
            }
            const double span = std::min(finest(), remaining);
            taylor(psi, v, c);
            const double q_end = poly(c, span);
            if (q_end > norm2 * (1.0 + 1e-9)) {
                throw NumericalError("trajectory: no-jump norm increased", q_end - norm2);
            }
            if (q_end > r) {
                psi = combine(v, span);
                norm2 = psi.squaredNorm();
                t = span == remaining ? cfg.t_total : t + span;
                level = std::max(top - 1, 0);
                continue;
            }
            const double tau = root(c, r, span);
            t += tau;
            const Vec jumped = jump * combine(v, tau);
            const double jn = jumped.norm();
            if (!(jn > 0.0)) {
                throw NumericalError("trajectory: jump onto a null state");
            }
            psi = jumped / T(jn);
            norm2 = 1.0;
            if (t > cfg.t_burn && t <= cfg.t_total) {
                ++rec.n_counts;
                if (keep_times) {
                    rec.jump_times.push_back(t);
                }
            }
            r = rng.uniform_open0();
            level = level_for_rate((jump * psi).squaredNorm());
        }
        rec.i_t = double(rec.n_counts) / rec.window;
        return rec;
    }
};

// Diagonal phases p with conj(p_a) K_ab p_b real for every edge, found by a sweep over the
// coupling graph. Returns false when some entry cannot be made real.
bool real_phases(const SparseMatrix& k, const SparseMatrix& l, CVector& phases) {
    const int n = static_cast<int>(k.rows());
    const SparseMatrix kt = k.transpose();
    phases = CVector::Zero(n);
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (int start = 0; start < n; ++start) {
        if (seen[static_cast<std::size_t>(start)]) {
            continue;
        }
        seen[static_cast<std::size_t>(start)] = true;
        phases(start) = 1.0;
        std::deque<int> queue{start};
        while (!queue.empty()) {
            const int a = queue.front();
            queue.pop_front();
            for (SparseMatrix::InnerIterator it(k, a); it; ++it) {
                const int b = static_cast<int>(it.col());
                if (!seen[static_cast<std::size_t>(b)] && std::abs(it.value()) > 0.0) {
                    seen[static_cast<std::size_t>(b)] = true;
                    phases(b) = phases(a) * std::conj(it.value()) / std::abs(it.value());
                    queue.push_back(b);
                }
            }
            for (SparseMatrix::InnerIterator it(kt, a); it; ++it) {
                const int b = static_cast<int>(it.col());
                if (!seen[static_cast<std::size_t>(b)] && std::abs(it.value()) > 0.0) {
                    seen[static_cast<std::size_t>(b)] = true;
                    phases(b) = phases(a) * it.value() / std::abs(it.value());
                    queue.push_back(b);
                }
            }
        }
    }
    auto is_real = [&](const SparseMatrix& m, Complex global) {
        double scale = 0.0;
        double imag = 0.0;
        for (int row = 0; row < m.outerSize(); ++row) {
            for (SparseMatrix::InnerIterator it(m, row); it; ++it) {
                const Complex v = global * std::conj(phases(row)) * it.value() * phases(it.col());
                scale = std::max(scale, std::abs(v));
                imag = std::max(imag, std::abs(v.imag()));
            }
        }
        return imag <= 1e-13 * scale;
    };
    if (!is_real(k, 1.0)) {
        return false;
    }
    Complex global = 1.0;
    for (int row = 0; row < l.outerSize() && global == Complex(1.0); ++row) {
        for (SparseMatrix::InnerIterator it(l, row); it; ++it) {
            const Complex v = std::conj(phases(row)) * it.value() * phases(it.col());
            if (std::abs(v) > 0.0) {
                global = std::conj(v) / std::abs(v);
                break;
            }
        }
    }
    return is_real(l, global);
}

template <class T>
Eigen::SparseMatrix<T, Eigen::RowMajor> transform(const SparseMatrix& m, const CVector& phases, Complex global) {
    std::vector<Eigen::Triplet<T>> trip;
    for (int row = 0; row < m.outerSize(); ++row) {
        for (SparseMatrix::InnerIterator it(m, row); it; ++it) {
            const Complex v = global * std::conj(phases(row)) * it.value() * phases(it.col());
            if constexpr (std::is_same_v<T, double>) {
                trip.emplace_back(row, static_cast<int>(it.col()), v.real());
            } else {
                trip.emplace_back(row, static_cast<int>(it.col()), v);
            }
        }
    }
    Eigen::SparseMatrix<T, Eigen::RowMajor> out(m.rows(), m.cols());
    out.setFromTriplets(trip.begin(), trip.end());
    out.makeCompressed();
    return out;
}

Complex first_phase(const SparseMatrix& l, const CVector& phases) {
    for (int row = 0; row < l.outerSize(); ++row) {
        for (SparseMatrix::InnerIterator it(l, row); it; ++it) {
            const Complex v = std::conj(phases(row)) * it.value() * phases(it.col());
            if (std::abs(v) > 0.0) {
                return std::conj(v) / std::abs(v);
            }
        }
    }
    return 1.0;
}

}  // namespace

struct PhotocountSimulator::Impl {
    std::optional<Engine<double>> real;
    std::optional<Engine<Complex>> cplx;
};

PhotocountSimulator::PhotocountSimulator(const Generator& g, const TrajectoryConfig& cfg)
    : impl_(std::make_unique<Impl>()), cfg_(cfg) {
    cfg.validate();
    if (g.kind() != GeneratorKind::lindblad) {
        throw ValidationError("trajectories: expects a plain Lindblad generator");
    }
    const SparseMatrix k = Complex(0.0, -1.0) * g.effective_hamiltonian();
    const SparseMatrix& l = g.jump();
    const int d = g.dim();
    const int start = cfg.initial == InitialState::all_down ? 0 : d - 1;
    const double dt0 = std::min(1.0, cfg.t_total);

    CVector phases;
    if (real_phases(k, l, phases)) {
        Engine<double> e;
        e.cfg = cfg;
        e.k_sparse = transform<double>(k, phases, 1.0);
        e.jump = transform<double>(l, phases, first_phase(l, phases));
        e.initial = Eigen::VectorXd::Unit(d, start);
        e.setup(Eigen::MatrixXd(e.k_sparse), dt0);
        impl_->real = std::move(e);
    } else {
        Engine<Complex> e;
        e.cfg = cfg;
        e.k_sparse = k;
        e.jump = l;
        e.initial = CVector::Unit(d, start);
        e.setup(CMatrix(k), dt0);
        impl_->cplx = std::move(e);
    }
}

PhotocountSimulator::~PhotocountSimulator() = default;
PhotocountSimulator::PhotocountSimulator(PhotocountSimulator&&) noexcept = default;

bool PhotocountSimulator::real_arithmetic() const {
    return impl_->real.has_value();
}

CountRecord PhotocountSimulator::run(std::uint64_t traj_index, bool keep_times) const {
    return impl_->real ? impl_->real->run(traj_index, keep_times) : impl_->cplx->run(traj_index, keep_times);
}

CountRecord run_photocount_trajectory(const Generator& g, const TrajectoryConfig& cfg, std::uint64_t traj_index) {
    return PhotocountSimulator(g, cfg).run(traj_index, true);
}

std::vector<CountRecord> run_ensemble(const Generator& g, const TrajectoryConfig& cfg, int threads, bool keep_times) {
    const PhotocountSimulator sim(g, cfg);
    std::vector<CountRecord> out(static_cast<std::size_t>(cfg.n_traj));
    parallel_for(out.size(), threads, [&](std::size_t i) { out[i] = sim.run(i, keep_times); });
    return out;
}

IntensityStats ensemble_stats(const std::vector<CountRecord>& records) {
    if (records.size() < 2) {
        throw ValidationError("ensemble_stats: need at least two records");
    }
    const double window = records.front().window;
    for (const auto& r : records) {
        if (r.window != window) {
            throw ValidationError("ensemble_stats: records come from different measurement windows");
        }
    }
    const double n = double(records.size());
    double mean = 0.0;
    for (const auto& r : records) {
        mean += r.i_t;
    }
    mean /= n;
    double m2 = 0.0;
    double m4 = 0.0;
    for (const auto& r : records) {
        const double dx = r.i_t - mean;
        m2 += dx * dx;
        m4 += dx * dx * dx * dx;
    }
    IntensityStats s;
    s.n_traj = static_cast<long>(records.size());
    s.window = window;
    s.mean = mean;
    s.variance = m2 / (n - 1.0);
    s.stderr_mean = std::sqrt(s.variance / n);
    s.sigma_prefactor = std::sqrt(window * s.variance);
    const double var_of_var = std::max(0.0, (m4 / n - (n - 3.0) / (n - 1.0) * s.variance * s.variance) / n);
    s.sigma_stderr = s.sigma_prefactor > 0.0 ? window * std::sqrt(var_of_var) / (2.0 * s.sigma_prefactor) : 0.0;
    return s;
}

McErrorResult mc_estimation_error(const ModelParams& params, const TrajectoryConfig& cfg, double d_omega,
                                  int threads) {
    params.validate();
    if (!(d_omega > 0.0)) {
        throw ValidationError("mc_estimation_error: d_omega must be positive");
    }
    if (params.omega - d_omega < 0.0) {
        throw ValidationError("mc_estimation_error: omega - d_omega must stay non-negative");
    }
    auto build = [&](double w) {
        ModelParams p = params;
        p.omega = w;
        return p.is_cascaded() ? build_cascaded_generator(p) : build_btc_generator(p);
    };
    const auto lo = run_ensemble(build(params.omega - d_omega), cfg, threads);
    const auto hi = run_ensemble(build(params.omega + d_omega), cfg, threads);

    McErrorResult out;
    out.minus = ensemble_stats(lo);
    out.centre = ensemble_stats(run_ensemble(build(params.omega), cfg, threads));
    out.plus = ensemble_stats(hi);
    const double n = double(lo.size());
    double dm = 0.0;
    for (std::size_t i = 0; i < lo.size(); ++i) {
        dm += hi[i].i_t - lo[i].i_t;
    }
    dm /= n;
    double dv = 0.0;
    for (std::size_t i = 0; i < lo.size(); ++i) {
        const double x = hi[i].i_t - lo[i].i_t - dm;
        dv += x * x;
    }
    dv /= (n - 1.0);
    out.derivative = dm / (2.0 * d_omega);
    out.derivative_stderr = std::sqrt(dv / n) / (2.0 * d_omega);
    if (!(std::abs(out.derivative) > 3.0 * out.derivative_stderr)) {
        throw NumericalError("mc_estimation_error: intensity derivative is statistically zero (flat signal)",
                             out.derivative);
    }
    out.sigma_prefactor = out.centre.sigma_prefactor;
    const double ad = std::abs(out.derivative);
    out.delta_omega_bar = out.sigma_prefactor / ad;
    out.error_bar = 0.02 * out.sigma_prefactor / (2.0 * std::sqrt(out.sigma_prefactor) * ad);
    out.statistical_error = out.delta_omega_bar * std::hypot(out.derivative_stderr / ad,
                                                             out.centre.sigma_stderr / out.sigma_prefactor);
    return out;
}

}  // namespace btc
