#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "btc/cascaded.hpp"
#include "btc/hp_oracle.hpp"
#include "btc/parallel.hpp"
#include "btc/sensing.hpp"
#include "btc/spectral.hpp"
#include "btc/trajectories.hpp"

#ifndef BTC_VERSION
#define BTC_VERSION "unknown"
#endif

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

/// A config problem reported with the offending field path, e.g. "bound.n".
struct FieldError : btc::ValidationError {
    FieldError(const std::string& field, const std::string& msg) : btc::ValidationError(field + ": " + msg) {}
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

/// "a:b:step" (inclusive of b up to rounding) or a comma list "x,y,z".
std::vector<double> parse_grid(const std::string& field, const std::string& text) {
    std::vector<double> out;
    auto to_double = [&](const std::string& s) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size() || !std::isfinite(v)) {
                throw std::invalid_argument(s);
            }
            return v;
        } catch (const std::exception&) {
            throw FieldError(field, "not a number: '" + s + "'");
        }
    };
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        for (std::string p; std::getline(ss, p, ':');) {
            parts.push_back(p);
        }
        if (parts.size() != 3) {
            throw FieldError(field, "range must read start:stop:step");
        }
        const double a = to_double(parts[0]), b = to_double(parts[1]), step = to_double(parts[2]);
        if (!(step > 0.0) || b < a) {
            throw FieldError(field, "range needs step > 0 and stop >= start");
        }
        const long n = static_cast<long>(std::floor((b - a) / step + 1e-9));
        if (n > 1000000) {
            throw FieldError(field, "range has too many points");
        }
        for (long k = 0; k <= n; ++k) {
            // round away the accumulated binary noise so grid values print cleanly
            out.push_back(std::stod(fmt(a + double(k) * step)));
        }
    } else {
        std::stringstream ss(text);
        for (std::string p; std::getline(ss, p, ',');) {
            out.push_back(to_double(p));
        }
    }
    if (out.empty()) {
        throw FieldError(field, "empty grid");
    }
    return out;
}

std::vector<int> parse_sizes(const std::string& field, const std::string& text) {
    std::vector<int> out;
    for (double v : parse_grid(field, text)) {
        if (v != std::floor(v) || v < 1.0 || v > btc::SpinSector::kMaxSpins) {
            throw FieldError(field, "sizes must be integers in [1, " + std::to_string(btc::SpinSector::kMaxSpins) + "]");
        }
        out.push_back(static_cast<int>(v));
    }
    return out;
}

class Csv {
public:
    explicit Csv(std::vector<std::string> header) : header_(std::move(header)) {}

    void row(std::vector<std::string> cells) {
        if (cells.size() != header_.size()) {
            throw std::logic_error("csv row width mismatch");
        }
        rows_.push_back(std::move(cells));
    }

    void write(const fs::path& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) {
            throw btc::ValidationError("out: cannot write " + path.string());
        }
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                f << (i ? "," : "") << cells[i];
            }
            f << '\n';
        };
        line(header_);
        for (const auto& r : rows_) {
            line(r);
        }
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

struct Globals {
    std::string out_dir = ".";
    int threads = 1;
    std::string units = "omega_c";
};

/// Outcome of one grid point; failures are kept in the table instead of aborting the sweep.
struct PointStatus {
    std::string status = "ok";
    std::string message;
    int exit_code = kExitOk;
};

template <class F>
PointStatus guarded(F&& f) {
    PointStatus st;
    try {
        f();
    } catch (const btc::ValidationError& e) {
        st = {"invalid", e.what(), kExitValidation};
    } catch (const btc::NumericalError& e) {
        st = {"failed", e.what(), kExitNumerical};
    }
    return st;
}

class Run {
public:
    Run(std::string command, const Globals& g, const CLI::App& app)
        : command_(std::move(command)), dir_(g.out_dir), start_(std::chrono::steady_clock::now()) {
        manifest_["command"] = command_;
        manifest_["version"] = BTC_VERSION;
        // echo the globals and the active subcommand block only
        std::stringstream all(app.config_to_str(true, false));
        std::string echo;
        for (std::string line; std::getline(all, line);) {
            const auto eq = line.find('=');
            const auto dot = line.find('.');
            if (dot == std::string::npos || dot > eq || line.rfind(command_ + ".", 0) == 0) {
                echo += line + "\n";
            }
        }
        manifest_["config"] = echo;
        manifest_["threads"] = g.threads;
        manifest_["units"] = g.units;
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (!fs::is_directory(dir_)) {
            throw FieldError("out", "cannot create directory " + dir_.string());
        }
    }

    json& manifest() { return manifest_; }

    void point(const json& where, const PointStatus& st) {
        if (st.status != "ok") {
            json j = where;
            j["status"] = st.status;
            j["message"] = st.message;
            manifest_["failed_points"].push_back(j);
            std::cerr << command_ << ": " << st.status << " at " << where.dump() << ": " << st.message << '\n';
        }
        worst_ = std::max(worst_, st.exit_code);
    }

    void fail(int code) { worst_ = std::max(worst_, code); }

    void emit(const std::string& name, const Csv& csv) {
        csv.write(dir_ / (name + ".csv"));
        manifest_["outputs"].push_back(name + ".csv");
    }

    int finish() {
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        manifest_["wall_time_s"] = wall;
        manifest_["exit_code"] = worst_;
        if (!manifest_.contains("failed_points")) {
            manifest_["failed_points"] = json::array();
        }
        std::ofstream f(dir_ / (command_ + "_manifest.json"));
        f << manifest_.dump(2) << '\n';
        return worst_;
    }

private:
    std::string command_;
    fs::path dir_;
    std::chrono::steady_clock::time_point start_;
    json manifest_;
    int worst_ = kExitOk;
};

/// Converts a user frequency to kappa units: omega_c units scale by N / 2.
double to_kappa(const Globals& g, double value, int n) {
    return g.units == "omega_c" ? value * 0.5 * n : value;
}

double to_ratio(double omega_kappa, int n) { return omega_kappa / (0.5 * n); }

void require_n(const std::string& field, int n, int max_n) {
    if (n < 1 || n > max_n) {
        throw FieldError(field, "must lie in [1, " + std::to_string(max_n) + "]");
    }
}

void require_nonneg(const std::string& field, double v) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
        throw FieldError(field, "must be a finite non-negative number");
    }
}

json fit_json(const btc::ScalingFit& fit) {
    return {{"exponent", fit.exponent},
            {"prefactor", fit.prefactor},
            {"fit_window", fit.fit_window},
            {"residual_rms", fit.residual_rms}};
}

/// Fits the largest sizes whose point succeeded; a fit failure is recorded, not fatal.
void attach_fit(Run& run, const std::vector<int>& sizes, const std::vector<double>& values,
                const std::vector<bool>& ok, int window) {
    std::vector<int> s;
    std::vector<double> v;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (ok[i]) {
            s.push_back(sizes[i]);
            v.push_back(values[i]);
        }
    }
    try {
        run.manifest()["fit"] = fit_json(btc::fit_power_law(s, v, window));
    } catch (const btc::ValidationError& e) {
        run.manifest()["fit"] = {{"error", e.what()}};
        run.fail(kExitNumerical);
    }
}

struct TrajectoryArgs {
    int n_traj = 1000;
    double t_total = 440.0;
    double t_burn = 40.0;
    std::uint64_t seed = 1;
    std::string initial = "down";

    void add(CLI::App* sub) {
        sub->add_option("--n-traj", n_traj, "Trajectories per ensemble")->capture_default_str();
        sub->add_option("--t-total", t_total, "Total simulated time (1/kappa)")->capture_default_str();
        sub->add_option("--t-burn", t_burn, "Discarded burn-in time (1/kappa)")->capture_default_str();
        sub->add_option("--seed", seed, "Master seed")->capture_default_str();
        sub->add_option("--initial", initial, "Initial state: down or up")
            ->check(CLI::IsMember({"down", "up"}))
            ->capture_default_str();
    }

    btc::TrajectoryConfig config(const std::string& prefix) const {
        btc::TrajectoryConfig c;
        c.n_traj = n_traj;
        c.t_total = t_total;
        c.t_burn = t_burn;
        c.seed = seed;
        c.initial = initial == "up" ? btc::InitialState::all_up : btc::InitialState::all_down;
        try {
            c.validate();
        } catch (const btc::ValidationError& e) {
            throw FieldError(prefix, e.what());
        }
        return c;
    }
};

// ---------------------------------------------------------------- bound

struct BoundArgs {
    int n = 30;
    std::string omega_grid = "0:2.5:0.05";
    std::string sizes;
    double ratio = 2.0;
    int fit_window = 6;
    double h = 1e-3;
};

int run_bound(const BoundArgs& a, const Globals& g, const CLI::App& app) {
    require_n("bound.n", a.n, 40);
    if (!(a.h > 0.0)) {
        throw FieldError("bound.qfi-step", "must be positive");
    }
    btc::QfiOptions qo;
    qo.h = a.h;
    const std::vector<double> grid = parse_grid("bound.omega-grid", a.omega_grid);
    for (double w : grid) {
        require_nonneg("bound.omega-grid", w);
    }
    std::vector<int> sizes;
    if (!a.sizes.empty()) {
        sizes = parse_sizes("bound.sizes", a.sizes);
        for (int n : sizes) {
            require_n("bound.sizes", n, 40);
        }
    }
    Run run("bound", g, app);

    std::vector<btc::QfiResult> res(grid.size());
    std::vector<PointStatus> st(grid.size());
    btc::parallel_for(grid.size(), g.threads, [&](std::size_t i) {
        st[i] = guarded([&] { res[i] = btc::qfi_rate(btc::ModelParams::single(a.n, to_kappa(g, grid[i], a.n)), qo); });
    });
    Csv fig2a({"n", "omega_over_omega_c", "omega_over_kappa", "qfi_rate", "s_omega", "status"});
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double w = to_kappa(g, grid[i], a.n);
        const bool ok = st[i].status == "ok";
        fig2a.row({std::to_string(a.n), fmt(to_ratio(w, a.n)), fmt(w), ok ? fmt(res[i].qfi_rate) : "nan",
                   ok ? fmt(res[i].sensitivity) : "nan", st[i].status});
        run.point({{"n", a.n}, {"omega_over_kappa", w}}, st[i]);
    }
    run.emit("fig2a", fig2a);

    if (!sizes.empty()) {
        std::vector<double> vals(sizes.size(), 0.0);
        std::vector<PointStatus> sst(sizes.size());
        btc::parallel_for(sizes.size(), g.threads, [&](std::size_t i) {
            sst[i] = guarded([&] {
                const double w = a.ratio * 0.5 * sizes[i];
                vals[i] = btc::qfi_rate(btc::ModelParams::single(sizes[i], w), qo).sensitivity;
            });
        });
        Csv fig2b({"n", "omega_over_omega_c", "s_omega", "status"});
        std::vector<bool> ok(sizes.size());
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            ok[i] = sst[i].status == "ok";
            fig2b.row({std::to_string(sizes[i]), fmt(a.ratio), ok[i] ? fmt(vals[i]) : "nan", sst[i].status});
            run.point({{"n", sizes[i]}, {"omega_over_omega_c", a.ratio}}, sst[i]);
        }
        run.emit("fig2b", fig2b);
        attach_fit(run, sizes, vals, ok, a.fit_window);
    }
    return run.finish();
}

// ---------------------------------------------------------------- protocol1

struct Protocol1Args {
    int n = 30;
    std::string omega_grid = "0.05:2.5:0.05";
    std::string sizes;
    double ratio = 2.0;
    int fit_window = 6;
    bool no_bound = false;
};

int run_protocol1(const Protocol1Args& a, const Globals& g, const CLI::App& app) {
    require_n("protocol1.n", a.n, 40);
    const std::vector<double> grid = parse_grid("protocol1.omega-grid", a.omega_grid);
    for (double w : grid) {
        require_nonneg("protocol1.omega-grid", w);
    }
    std::vector<int> sizes;
    if (!a.sizes.empty()) {
        sizes = parse_sizes("protocol1.sizes", a.sizes);
        for (int n : sizes) {
            require_n("protocol1.sizes", n, 40);
        }
    }
    btc::ProtocolOptions po;
    po.with_bound = !a.no_bound;
    Run run("protocol1", g, app);

    std::vector<btc::ProtocolResult> res(grid.size());
    std::vector<PointStatus> st(grid.size());
    btc::parallel_for(grid.size(), g.threads, [&](std::size_t i) {
        st[i] = guarded(
            [&] { res[i] = btc::protocol1_error(btc::ModelParams::single(a.n, to_kappa(g, grid[i], a.n)), po); });
    });
    Csv fig3a({"n", "omega_over_omega_c", "omega_over_kappa", "delta_omega_bar", "inv_s_omega", "intensity",
               "abs_di_domega", "sigma_bar", "status"});
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double w = to_kappa(g, grid[i], a.n);
        const bool ok = st[i].status == "ok";
        const auto& r = res[i];
        fig3a.row({std::to_string(a.n), fmt(to_ratio(w, a.n)), fmt(w), ok ? fmt(r.delta_omega_bar) : "nan",
                   ok && r.bound ? fmt(*r.bound) : "nan", ok ? fmt(r.intensity) : "nan",
                   ok ? fmt(r.intensity_derivative) : "nan", ok ? fmt(r.sigma_prefactor) : "nan", st[i].status});
        run.point({{"n", a.n}, {"omega_over_kappa", w}}, st[i]);
    }
    run.emit("fig3a", fig3a);

    if (!sizes.empty()) {
        btc::ProtocolOptions inner = po;
        inner.with_bound = false;
        std::vector<double> vals(sizes.size(), 0.0);
        std::vector<PointStatus> sst(sizes.size());
        btc::parallel_for(sizes.size(), g.threads, [&](std::size_t i) {
            sst[i] = guarded([&] {
                vals[i] =
                    btc::protocol1_error(btc::ModelParams::single(sizes[i], a.ratio * 0.5 * sizes[i]), inner).delta_omega_bar;
            });
        });
        Csv fig3b({"n", "omega_over_omega_c", "delta_omega_bar", "status"});
        std::vector<bool> ok(sizes.size());
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            ok[i] = sst[i].status == "ok";
            fig3b.row({std::to_string(sizes[i]), fmt(a.ratio), ok[i] ? fmt(vals[i]) : "nan", sst[i].status});
            run.point({{"n", sizes[i]}, {"omega_over_omega_c", a.ratio}}, sst[i]);
        }
        run.emit("fig3b", fig3b);
        attach_fit(run, sizes, vals, ok, a.fit_window);
    }
    return run.finish();
}

// ---------------------------------------------------------------- protocol2

struct Protocol2Args {
    int n = 6;
    double omega_d = 2.0;
    std::string delta_grid = "0.0025:0.05:0.0025";
    std::string sizes;
    double delta = 0.01;
    int fit_window = 6;
    std::string method = "auto";
    int exact_cap = 14;
    double d_omega = 5e-3;
    bool no_bound = false;
    TrajectoryArgs traj;
};

int run_protocol2(const Protocol2Args& a, const Globals& g, const CLI::App& app) {
    require_n("protocol2.n", a.n, btc::SizeLimits{}.generator_cascaded);
    require_nonneg("protocol2.omega-d", a.omega_d);
    if (a.exact_cap < 1) {
        throw FieldError("protocol2.exact-cap", "must be >= 1");
    }
    if (!(a.d_omega > 0.0)) {
        throw FieldError("protocol2.d-omega", "must be positive");
    }
    btc::ProtocolOptions po;
    po.with_bound = !a.no_bound;
    po.scgf.stationary.limits.exact_cascaded = a.exact_cap;
    po.trajectories = a.traj.config("protocol2");
    po.d_omega = a.d_omega;
    po.threads = g.threads;
    if (a.method == "spectral") {
        po.force_method = btc::ProtocolMethod::spectral;
    } else if (a.method == "trajectories") {
        po.force_method = btc::ProtocolMethod::trajectories;
    }
    std::vector<double> deltas;
    if (!a.delta_grid.empty()) {
        deltas = parse_grid("protocol2.delta-grid", a.delta_grid);
    }
    std::vector<int> sizes;
    if (!a.sizes.empty()) {
        sizes = parse_sizes("protocol2.sizes", a.sizes);
        for (int n : sizes) {
            require_n("protocol2.sizes", n, btc::SizeLimits{}.generator_cascaded);
        }
    }
    Run run("protocol2", g, app);
    run.manifest()["seed"] = a.traj.seed;

    auto params_for = [&](int n, double delta) {
        const double wd = to_kappa(g, a.omega_d, n);
        return btc::ModelParams::cascaded(n, wd + delta, wd);
    };
    auto evaluate = [&](const std::vector<std::pair<int, double>>& pts, std::vector<btc::ProtocolResult>& res,
                        std::vector<PointStatus>& st) {
        res.assign(pts.size(), {});
        st.assign(pts.size(), {});
        // trajectory points parallelize internally; exact points parallelize across the grid
        btc::ProtocolOptions inner = po;
        inner.threads = 1;
        std::vector<std::size_t> exact, mc;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const bool use_mc = po.force_method ? *po.force_method == btc::ProtocolMethod::trajectories
                                                : pts[i].first > a.exact_cap;
            (use_mc ? mc : exact).push_back(i);
        }
        btc::parallel_for(exact.size(), g.threads, [&](std::size_t k) {
            const std::size_t i = exact[k];
            st[i] = guarded([&] { res[i] = btc::protocol2_error(params_for(pts[i].first, pts[i].second), inner); });
        });
        for (std::size_t i : mc) {
            st[i] = guarded([&] { res[i] = btc::protocol2_error(params_for(pts[i].first, pts[i].second), po); });
        }
    };

    if (!deltas.empty()) {
        std::vector<std::pair<int, double>> pts;
        for (double d : deltas) {
            pts.emplace_back(a.n, d);
        }
        std::vector<btc::ProtocolResult> res;
        std::vector<PointStatus> st;
        evaluate(pts, res, st);
        Csv fig4c({"n", "omega_d_over_omega_c", "delta_omega", "delta_omega_bar", "inv_s_omega", "method",
                   "error_bar", "status"});
        Csv fig4e({"n", "delta_omega", "abs_di_domega", "sigma_bar", "intensity", "status"});
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const bool ok = st[i].status == "ok";
            const auto& r = res[i];
            const std::string status = ok ? "ok" : (st[i].message.find("excluded") != std::string::npos ? "excluded" : st[i].status);
            const double wd = to_kappa(g, a.omega_d, a.n);
            fig4c.row({std::to_string(a.n), fmt(to_ratio(wd, a.n)), fmt(deltas[i]), ok ? fmt(r.delta_omega_bar) : "nan",
                       ok && r.bound ? fmt(*r.bound) : "nan", ok ? btc::to_string(r.method) : "none",
                       ok ? fmt(r.error_bar) : "nan", status});
            fig4e.row({std::to_string(a.n), fmt(deltas[i]), ok ? fmt(r.intensity_derivative) : "nan",
                       ok ? fmt(r.sigma_prefactor) : "nan", ok ? fmt(r.intensity) : "nan", status});
            PointStatus reported = st[i];
            if (status == "excluded") {
                // the dark line is expected to be skipped and does not fail the run
                reported.status = status;
                reported.exit_code = kExitOk;
            }
            run.point({{"n", a.n}, {"delta_omega", deltas[i]}}, reported);
        }
        run.emit("fig4c", fig4c);
        run.emit("fig4e", fig4e);
    }

    if (!sizes.empty()) {
        std::vector<std::pair<int, double>> pts;
        for (int n : sizes) {
            pts.emplace_back(n, a.delta);
        }
        std::vector<btc::ProtocolResult> res;
        std::vector<PointStatus> st;
        evaluate(pts, res, st);
        Csv fig4d({"n", "delta_omega", "delta_omega_bar", "inv_s_omega", "method", "error_bar", "statistical_error",
                   "status"});
        std::vector<double> vals(sizes.size(), 0.0);
        std::vector<bool> ok(sizes.size());
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            ok[i] = st[i].status == "ok";
            const auto& r = res[i];
            vals[i] = r.delta_omega_bar;
            fig4d.row({std::to_string(sizes[i]), fmt(a.delta), ok[i] ? fmt(r.delta_omega_bar) : "nan",
                       ok[i] && r.bound ? fmt(*r.bound) : "nan", ok[i] ? btc::to_string(r.method) : "none",
                       ok[i] ? fmt(r.error_bar) : "nan", ok[i] ? fmt(r.statistical_error) : "nan", st[i].status});
            run.point({{"n", sizes[i]}, {"delta_omega", a.delta}}, st[i]);
        }
        run.emit("fig4d", fig4d);
        attach_fit(run, sizes, vals, ok, a.fit_window);
        if (run.manifest()["fit"].contains("exponent")) {
            // delta_omega_bar ~ N^-alpha
            run.manifest()["fit"]["alpha"] = -run.manifest()["fit"]["exponent"].get<double>();
        }
    }
    return run.finish();
}

// ---------------------------------------------------------------- darkstate

struct DarkArgs {
    int n = 10;
    double omega = 1.0;
    bool check = false;
    std::string omega_grid;
    double tol = 1e-10;
};

int run_darkstate(const DarkArgs& a, const Globals& g, const CLI::App& app) {
    require_n("darkstate.n", a.n, btc::SpinSector::kMaxSpins);
    require_nonneg("darkstate.omega", a.omega);
    Run run("darkstate", g, app);
    run.manifest()["omega_units"] = "kappa";

    PointStatus st = guarded([&] {
        const btc::DarkState ds = btc::build_dark_state(a.n, a.omega, btc::PairChoice::max_m1, a.tol);
        Csv table({"j", "re_a", "im_a", "a_j"});
        for (std::size_t j = 0; j < ds.coeffs.size(); ++j) {
            table.row({std::to_string(j), fmt(ds.coeffs[j].real()), fmt(ds.coeffs[j].imag()), fmt(ds.reduced[j])});
        }
        run.emit("darkstate", table);
        run.manifest()["residual_h"] = ds.residual_h;
        run.manifest()["residual_jm"] = ds.residual_jm;
        if (a.check) {
            const btc::DarkState other = btc::build_dark_state(a.n, a.omega, btc::PairChoice::min_m1, a.tol);
            double diff = 0.0;
            for (std::size_t j = 0; j < ds.coeffs.size(); ++j) {
                diff = std::max(diff, std::abs(ds.coeffs[j] - other.coeffs[j]));
            }
            double mismatch = 0.0;
            for (double m : btc::recursion_mismatch(ds)) {
                mismatch = std::max(mismatch, m);
            }
            run.manifest()["check"] = {{"pair_choice_difference", diff},
                                       {"recursion_mismatch", mismatch},
                                       {"tol", a.tol},
                                       {"passed", ds.residual_h < a.tol && ds.residual_jm < a.tol && diff < a.tol}};
            std::cout << "darkstate N=" << a.n << " omega/kappa=" << fmt(a.omega) << " residual_h=" << fmt(ds.residual_h)
                      << " residual_jm=" << fmt(ds.residual_jm) << " pair_choice_difference=" << fmt(diff) << '\n';
            if (!(diff < a.tol)) {
                throw btc::NumericalError("darkstate: admissible pair choices disagree", diff);
            }
        }
    });
    run.point({{"n", a.n}, {"omega_over_kappa", a.omega}}, st);

    if (!a.omega_grid.empty()) {
        const std::vector<double> grid = parse_grid("darkstate.omega-grid", a.omega_grid);
        Csv obs({"n", "omega_over_kappa", "sx1", "sx2", "sy1", "sy2", "sz1", "sz2", "mf_sy1", "mf_sz1", "status"});
        for (double x : grid) {
            btc::DarkStateObservables o;
            const PointStatus ps = guarded([&] {
                require_nonneg("darkstate.omega-grid", x);
                o = btc::dark_state_observables(btc::build_dark_state(a.n, x, btc::PairChoice::max_m1, a.tol), a.tol);
            });
            const bool ok = ps.status == "ok";
            const btc::HpCascaded mf = btc::hp_cascaded(x, x, a.n);
            const double mf_sy = mf.stationary_phase ? mf.sy1 : std::nan("");
            const double mf_sz = mf.stationary_phase ? mf.sz1 : std::nan("");
            obs.row({std::to_string(a.n), fmt(x), ok ? fmt(o.sx1) : "nan", ok ? fmt(o.sx2) : "nan",
                     ok ? fmt(o.sy1) : "nan", ok ? fmt(o.sy2) : "nan", ok ? fmt(o.sz1) : "nan",
                     ok ? fmt(o.sz2) : "nan", fmt(mf_sy), fmt(mf_sz), ps.status});
            run.point({{"n", a.n}, {"omega_over_kappa", x}}, ps);
        }
        run.emit("darkstate_observables", obs);
    }
    return run.finish();
}

// ---------------------------------------------------------------- scgf

struct ScgfArgs {
    int n = 10;
    double omega = 0.5;
    std::optional<double> omega_d;
    std::string s_grid = "-0.05:0.05:0.005";
    double h_s = 1e-3;
};

int run_scgf(const ScgfArgs& a, const Globals& g, const CLI::App& app) {
    require_n("scgf.n", a.n, a.omega_d ? btc::SizeLimits{}.exact_cascaded : btc::SizeLimits{}.exact_single);
    require_nonneg("scgf.omega", a.omega);
    if (a.omega_d) {
        require_nonneg("scgf.omega-d", *a.omega_d);
    }
    if (!(a.h_s > 0.0)) {
        throw FieldError("scgf.h-s", "must be positive");
    }
    const std::vector<double> grid = parse_grid("scgf.s-grid", a.s_grid);
    const double w = to_kappa(g, a.omega, a.n);
    const btc::ModelParams p = a.omega_d ? btc::ModelParams::cascaded(a.n, w, to_kappa(g, *a.omega_d, a.n))
                                         : btc::ModelParams::single(a.n, w);
    btc::ScgfOptions so;
    so.h_s = a.h_s;
    Run run("scgf", g, app);

    btc::ScgfResult res;
    const PointStatus st = guarded([&] { res = btc::scgf_curve(p, grid, so); });
    run.point({{"n", a.n}, {"omega_over_kappa", w}}, st);
    std::optional<btc::HpCascaded> hpc;
    if (p.omega_d) {
        hpc = btc::hp_cascaded(p.omega, *p.omega_d, a.n);
    }
    Csv table({"n", "omega_over_kappa", "omega_d_over_kappa", "s", "theta", "theta_hp", "residual", "status"});
    const bool ok = st.status == "ok";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double hp = hpc ? hpc->scgf(grid[i]) : btc::hp_scgf(p.omega, p.kappa, grid[i]);
        table.row({std::to_string(a.n), fmt(p.omega), p.omega_d ? fmt(*p.omega_d) : "nan", fmt(grid[i]),
                   ok ? fmt(res.theta[i]) : "nan", fmt(hp), ok ? fmt(res.diagnostics[i].residual) : "nan", st.status});
    }
    run.emit("scgf", table);
    if (ok) {
        run.manifest()["theta_p0"] = res.theta_p0;
        run.manifest()["theta_pp0"] = res.theta_pp0;
        run.manifest()["h_s"] = res.h_s;
        run.manifest()["intensity"] = res.intensity;
        run.manifest()["stationary_residual"] = res.stationary_residual;
    }
    if (hpc) {
        run.manifest()["hp_stationary_phase"] = hpc->stationary_phase;
    }
    return run.finish();
}

// ---------------------------------------------------------------- qfi-check

struct QfiCheckArgs {
    int n = 30;
    double omega1 = 0.5;
    std::string omega2_grid = "0.3:0.7:0.02";
};

int run_qfi_check(const QfiCheckArgs& a, const Globals& g, const CLI::App& app) {
    require_n("qfi-check.n", a.n, btc::SizeLimits{}.exact_single);
    const double w1 = to_kappa(g, a.omega1, a.n);
    const std::vector<double> grid = parse_grid("qfi-check.omega2-grid", a.omega2_grid);
    Run run("qfi-check", g, app);
    const btc::Generator base = btc::build_btc_generator(btc::ModelParams::single(a.n, w1));

    std::vector<btc::EigenResult> res(grid.size());
    std::vector<PointStatus> st(grid.size());
    btc::parallel_for(grid.size(), g.threads, [&](std::size_t i) {
        st[i] = guarded([&] {
            btc::EigenOptions eo;
            eo.guess = btc::hp_deformed_eigenvalue(w1, to_kappa(g, grid[i], a.n));
            res[i] = btc::dominant_eigenvalue(btc::deform(base, w1, to_kappa(g, grid[i], a.n)), eo);
        });
    });
    Csv table({"n", "omega1_over_kappa", "omega2_over_kappa", "re_lambda", "im_lambda", "lambda_hp", "residual",
               "status"});
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double w2 = to_kappa(g, grid[i], a.n);
        const bool ok = st[i].status == "ok";
        table.row({std::to_string(a.n), fmt(w1), fmt(w2), ok ? fmt(res[i].value.real()) : "nan",
                   ok ? fmt(res[i].value.imag()) : "nan", fmt(btc::hp_deformed_eigenvalue(w1, w2)),
                   ok ? fmt(res[i].residual) : "nan", st[i].status});
        run.point({{"omega1_over_kappa", w1}, {"omega2_over_kappa", w2}}, st[i]);
    }
    run.emit("qfi_check", table);
    btc::QfiResult q;
    const PointStatus qs = guarded([&] { q = btc::qfi_rate(btc::ModelParams::single(a.n, w1)); });
    run.point({{"omega_over_kappa", w1}, {"quantity", "qfi_rate"}}, qs);
    if (qs.status == "ok") {
        run.manifest()["qfi_rate"] = q.qfi_rate;
        run.manifest()["qfi_rate_hp"] = btc::hp_qfi_rate();
        run.manifest()["diagonal_lambda"] = q.diagonal_lambda;
    }
    return run.finish();
}

// ---------------------------------------------------------------- trajectories

struct TrajArgs {
    int n = 10;
    double omega = 0.5;
    bool cascaded = false;
    double omega_d = 2.0;
    double delta = 0.01;
    bool records = true;
    bool jump_times = false;
    TrajectoryArgs traj;
};

int run_trajectories(const TrajArgs& a, const Globals& g, const CLI::App& app) {
    require_n("trajectories.n", a.n, btc::SizeLimits{}.generator_cascaded);
    btc::TrajectoryConfig cfg = a.traj.config("trajectories");
    btc::ModelParams p;
    if (a.cascaded) {
        require_nonneg("trajectories.omega-d", a.omega_d);
        const double wd = to_kappa(g, a.omega_d, a.n);
        p = btc::ModelParams::cascaded(a.n, wd + a.delta, wd);
    } else {
        require_nonneg("trajectories.omega", a.omega);
        p = btc::ModelParams::single(a.n, to_kappa(g, a.omega, a.n));
    }
    try {
        p.validate();
    } catch (const btc::ValidationError& e) {
        throw FieldError("trajectories", e.what());
    }
    Run run("trajectories", g, app);
    run.manifest()["seed"] = cfg.seed;

    std::vector<btc::CountRecord> recs;
    btc::IntensityStats stats;
    const btc::Generator gen = p.is_cascaded() ? btc::build_cascaded_generator(p) : btc::build_btc_generator(p);
    const PointStatus st = guarded([&] {
        recs = btc::run_ensemble(gen, cfg, g.threads, a.jump_times);
        stats = btc::ensemble_stats(recs);
    });
    run.point({{"n", a.n}, {"omega_over_kappa", p.omega}}, st);
    const bool ok = st.status == "ok";

    Csv summary({"n", "omega_over_kappa", "omega_d_over_kappa", "n_traj", "t_total", "t_burn", "seed", "mean_i_t",
                 "variance", "stderr_mean", "sigma_bar", "sigma_stderr", "status"});
    summary.row({std::to_string(a.n), fmt(p.omega), p.omega_d ? fmt(*p.omega_d) : "nan", std::to_string(cfg.n_traj),
                 fmt(cfg.t_total), fmt(cfg.t_burn), std::to_string(cfg.seed), ok ? fmt(stats.mean) : "nan",
                 ok ? fmt(stats.variance) : "nan", ok ? fmt(stats.stderr_mean) : "nan",
                 ok ? fmt(stats.sigma_prefactor) : "nan", ok ? fmt(stats.sigma_stderr) : "nan", st.status});
    run.emit("trajectories_summary", summary);
    if (ok && a.records) {
        Csv table({"traj_index", "n_counts", "i_t"});
        for (const auto& r : recs) {
            table.row({std::to_string(r.traj_index), std::to_string(r.n_counts), fmt(r.i_t)});
        }
        run.emit("trajectories", table);
    }
    if (ok && a.jump_times) {
        Csv table({"traj_index", "jump_time"});
        for (const auto& r : recs) {
            for (double t : r.jump_times) {
                table.row({std::to_string(r.traj_index), fmt(t)});
            }
        }
        run.emit("jump_times", table);
    }
    if (ok) {
        std::cout << "trajectories N=" << a.n << " mean_I_T=" << fmt(stats.mean) << " +- " << fmt(stats.stderr_mean)
                  << " sigma_bar=" << fmt(stats.sigma_prefactor) << '\n';
    }
    return run.finish();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Boundary time-crystal continuous-sensor simulator"};
    app.set_version_flag("--version", BTC_VERSION);
    app.set_config("--config", "", "INI/TOML config file; command-line flags win");
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    g.threads = btc::default_threads();
    app.add_option("--out", g.out_dir, "Output directory for CSV tables and the JSON manifest")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::Range(1, 1024))->capture_default_str();
    app.add_option("--units", g.units, "Units of omega inputs: omega_c or kappa (darkstate and delta are always kappa)")
        ->check(CLI::IsMember({"omega_c", "kappa"}))
        ->capture_default_str();

    BoundArgs bound;
    auto* sb = app.add_subcommand("bound", "QFI rate S_omega of the single BTC (fig2a, fig2b)");
    sb->add_option("--n", bound.n, "Number of spins")->capture_default_str();
    sb->add_option("--omega-grid", bound.omega_grid, "Drive grid start:stop:step or list")->capture_default_str();
    sb->add_option("--sizes", bound.sizes, "Sizes for the scaling table, e.g. 8:30:2");
    sb->add_option("--ratio", bound.ratio, "omega / omega_c for the scaling table")->capture_default_str();
    sb->add_option("--fit-window", bound.fit_window, "Largest sizes used in the power-law fit")->capture_default_str();
    sb->add_option("--qfi-step", bound.h, "QFI stencil step (kappa)")->capture_default_str();

    Protocol1Args p1;
    auto* s1 = app.add_subcommand("protocol1", "Single-BTC estimation error from photocounts (fig3a)");
    s1->add_option("--n", p1.n, "Number of spins")->capture_default_str();
    s1->add_option("--omega-grid", p1.omega_grid, "Drive grid start:stop:step or list")->capture_default_str();
    s1->add_option("--sizes", p1.sizes, "Sizes for the scaling table");
    s1->add_option("--ratio", p1.ratio, "omega / omega_c for the scaling table")->capture_default_str();
    s1->add_option("--fit-window", p1.fit_window, "Largest sizes used in the power-law fit")->capture_default_str();
    s1->add_flag("--no-bound", p1.no_bound, "Skip the S_omega^-1 column");

    Protocol2Args p2;
    auto* s2 = app.add_subcommand("protocol2", "Cascaded sensor-decoder estimation error (fig4c, fig4d, fig4e)");
    s2->add_option("--n", p2.n, "Number of spins per BTC for the delta grid")->capture_default_str();
    s2->add_option("--omega-d", p2.omega_d, "Decoder drive omega_D")->capture_default_str();
    s2->add_option("--delta-grid", p2.delta_grid, "Detuning omega - omega_D grid (kappa); skipped with --sizes unless given")
        ->capture_default_str();
    s2->add_option("--sizes", p2.sizes, "Sizes for the scaling table, e.g. 6:18:1");
    s2->add_option("--delta", p2.delta, "Detuning for the scaling table (kappa)")->capture_default_str();
    s2->add_option("--fit-window", p2.fit_window, "Largest sizes used in the power-law fit")->capture_default_str();
    s2->add_option("--method", p2.method, "auto, spectral or trajectories")
        ->check(CLI::IsMember({"auto", "spectral", "trajectories"}))
        ->capture_default_str();
    s2->add_option("--exact-cap", p2.exact_cap, "Largest N solved exactly in auto mode")->capture_default_str();
    s2->add_option("--d-omega", p2.d_omega, "Monte Carlo difference step (kappa)")->capture_default_str();
    s2->add_flag("--no-bound", p2.no_bound, "Skip the S_omega^-1 column");
    p2.traj.add(s2);

    DarkArgs dark;
    auto* sd = app.add_subcommand("darkstate", "Analytic dark state of the cascade on omega = omega_D");
    sd->add_option("--n", dark.n, "Number of spins per BTC")->capture_default_str();
    sd->add_option("--omega", dark.omega, "omega / kappa")->capture_default_str();
    sd->add_flag("--check", dark.check, "Verify residuals and pair-choice independence");
    sd->add_option("--omega-grid", dark.omega_grid, "omega / kappa grid for the observables table");
    sd->add_option("--tol", dark.tol, "Residual tolerance")->capture_default_str();

    ScgfArgs sc;
    auto* ss = app.add_subcommand("scgf", "Scaled cumulant generating function theta(s)");
    ss->add_option("--n", sc.n, "Number of spins")->capture_default_str();
    ss->add_option("--omega", sc.omega, "Drive omega")->capture_default_str();
    ss->add_option("--omega-d", sc.omega_d, "Decoder drive; selects the cascade");
    ss->add_option("--s-grid", sc.s_grid, "Counting-field grid")->capture_default_str();
    ss->add_option("--h-s", sc.h_s, "Finite-difference step in s")->capture_default_str();

    QfiCheckArgs qc;
    auto* sq = app.add_subcommand("qfi-check", "Deformed eigenvalue lambda_E(omega1, omega2) against the HP form");
    sq->add_option("--n", qc.n, "Number of spins")->capture_default_str();
    sq->add_option("--omega1", qc.omega1, "Left drive omega1")->capture_default_str();
    sq->add_option("--omega2-grid", qc.omega2_grid, "Right drive grid")->capture_default_str();

    TrajArgs tr;
    auto* st = app.add_subcommand("trajectories", "Photocount trajectories and integrated-intensity statistics");
    st->add_option("--n", tr.n, "Number of spins (per BTC)")->capture_default_str();
    st->add_option("--omega", tr.omega, "Drive omega (single BTC)")->capture_default_str();
    st->add_flag("--cascaded", tr.cascaded, "Simulate the cascade at omega = omega_D + delta");
    st->add_option("--omega-d", tr.omega_d, "Decoder drive omega_D (cascaded)")->capture_default_str();
    st->add_option("--delta", tr.delta, "Detuning omega - omega_D (kappa, cascaded)")->capture_default_str();
    st->add_flag("--records,!--no-records", tr.records, "Write the per-trajectory table (default on)");
    st->add_flag("--jump-times", tr.jump_times, "Also write every counted jump time");
    tr.traj.add(st);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (sb->parsed()) return run_bound(bound, g, app);
        if (s1->parsed()) return run_protocol1(p1, g, app);
        if (s2->parsed()) {
            // a scaling run skips the detuning grid unless one was asked for
            if (!p2.sizes.empty() && s2->count("--delta-grid") == 0) {
                p2.delta_grid.clear();
            }
            return run_protocol2(p2, g, app);
        }
        if (sd->parsed()) return run_darkstate(dark, g, app);
        if (ss->parsed()) return run_scgf(sc, g, app);
        if (sq->parsed()) return run_qfi_check(qc, g, app);
        if (st->parsed()) return run_trajectories(tr, g, app);
    } catch (const btc::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const btc::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitValidation;
}
