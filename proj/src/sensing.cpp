#include "btc/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "btc/parallel.hpp"

namespace btc {

std::string to_string(ProtocolMethod m) {
    return m == ProtocolMethod::spectral ? "spectral" : "trajectories";
}

namespace {

Generator build_generator(const ModelParams& p, const SizeLimits& limits) {
    return p.is_cascaded() ? build_cascaded_generator(p, limits) : build_btc_generator(p);
}

double intensity_at(const ModelParams& params, double omega, const StationaryOptions& so) {
    ModelParams p = params;
    p.omega = omega;
    return stationary_state(build_generator(p, so.limits), so).intensity;
}

std::optional<double> bound_for(const ModelParams& params, const ProtocolOptions& options) {
    if (!options.with_bound) {
        return std::nullopt;
    }
    const ModelParams single = ModelParams::single(params.n_spins, params.omega, params.kappa);
    return 1.0 / qfi_rate(single, options.qfi).sensitivity;
}

ProtocolResult spectral_error(const ModelParams& params, const ProtocolOptions& options) {
    check_exact_size(params, options.scgf.stationary.limits);
    const Generator g = build_generator(params, options.scgf.stationary.limits);
    const CumulantRates rates = cumulant_rates(g, options.scgf);
    const IntensitySlope slope = intensity_slope(params, options);
    if (rates.theta_pp0 < 0.0) {
        throw NumericalError("protocol: negative variance rate", rates.theta_pp0);
    }
    ProtocolResult out;
    out.params = params;
    out.method = ProtocolMethod::spectral;
    out.intensity = rates.intensity;
    out.sigma_prefactor = std::sqrt(rates.theta_pp0);
    out.intensity_derivative = std::abs(slope.value);
    out.delta_omega_bar = out.sigma_prefactor / out.intensity_derivative;
    out.h_used = slope.h;
    out.bound = bound_for(params, options);
    return out;
}

}  // namespace

IntensitySlope intensity_slope(const ModelParams& params, const ProtocolOptions& options) {
    if (!(options.h_omega > 0.0)) {
        throw ValidationError("protocol: h_omega must be positive");
    }
    const StationaryOptions& so = options.scgf.stationary;
    const double w = params.omega;
    double h = std::min(options.h_omega, w > 0.0 ? 0.5 * w : options.h_omega);
    if (w - h < 0.0) {
        throw ValidationError("protocol: omega - h must stay non-negative");
    }
    auto central = [&](double step) {
        return (intensity_at(params, w + step, so) - intensity_at(params, w - step, so)) / (2.0 * step);
    };
    double coarse = central(h);
    for (int k = 0; k < options.max_halvings; ++k) {
        const double fine = central(0.5 * h);
        const double scale = std::max(std::abs(fine), 1e-300);
        if (std::abs(fine - coarse) <= options.halving_tol * scale) {
            const double value = fine + (fine - coarse) / 3.0;
            if (!(std::abs(value) > 1e-12)) {
                throw NumericalError("protocol: intensity is flat in omega; the estimator is undefined", value);
            }
            return {value, 0.5 * h};
        }
        h *= 0.5;
        coarse = fine;
    }
    throw NumericalError("protocol: omega derivative did not settle under step halving", coarse);
}

ProtocolResult protocol1_error(const ModelParams& params, const ProtocolOptions& options) {
    params.validate();
    if (params.is_cascaded()) {
        throw ValidationError("protocol1: expects single-BTC parameters");
    }
    if (options.force_method == ProtocolMethod::trajectories) {
        ProtocolResult out;
        const McErrorResult mc = mc_estimation_error(params, options.trajectories, options.d_omega, options.threads);
        out.params = params;
        out.method = ProtocolMethod::trajectories;
        out.delta_omega_bar = mc.delta_omega_bar;
        out.intensity_derivative = std::abs(mc.derivative);
        out.sigma_prefactor = mc.sigma_prefactor;
        out.intensity = mc.centre.mean;
        out.error_bar = mc.error_bar;
        out.statistical_error = mc.statistical_error;
        out.h_used = options.d_omega;
        out.bound = bound_for(params, options);
        return out;
    }
    return spectral_error(params, options);
}

ProtocolResult protocol2_error(const ModelParams& params, const ProtocolOptions& options) {
    params.validate();
    if (!params.is_cascaded()) {
        throw ValidationError("protocol2: expects cascaded parameters (omega_d)");
    }
    if (params.omega == *params.omega_d) {
        throw ValidationError("protocol2: omega = omega_D is the dark line, an excluded point");
    }
    ProtocolMethod method = params.n_spins <= options.scgf.stationary.limits.exact_cascaded
                                ? ProtocolMethod::spectral
                                : ProtocolMethod::trajectories;
    if (options.force_method) {
        method = *options.force_method;
    }
    if (method == ProtocolMethod::spectral) {
        return spectral_error(params, options);
    }
    const McErrorResult mc = mc_estimation_error(params, options.trajectories, options.d_omega, options.threads);
    ProtocolResult out;
    out.params = params;
    out.method = ProtocolMethod::trajectories;
    out.delta_omega_bar = mc.delta_omega_bar;
    out.intensity_derivative = std::abs(mc.derivative);
    out.sigma_prefactor = mc.sigma_prefactor;
    out.intensity = mc.centre.mean;
    out.error_bar = mc.error_bar;
    out.statistical_error = mc.statistical_error;
    out.h_used = options.d_omega;
    out.bound = bound_for(params, options);
    return out;
}

ScalingFit fit_power_law(const std::vector<int>& sizes, const std::vector<double>& values, int fit_window) {
    if (sizes.size() != values.size()) {
        throw ValidationError("fit_power_law: sizes and values differ in length");
    }
    if (fit_window < 2 || static_cast<int>(sizes.size()) < fit_window) {
        throw ValidationError("fit_power_law: need at least fit_window >= 2 points");
    }
    std::vector<std::size_t> order(sizes.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sizes[a] < sizes[b]; });
    std::vector<double> x, y;
    for (std::size_t k = order.size() - static_cast<std::size_t>(fit_window); k < order.size(); ++k) {
        const std::size_t i = order[k];
        if (sizes[i] <= 0 || !(values[i] > 0.0)) {
            throw ValidationError("fit_power_law: sizes and values must be positive");
        }
        x.push_back(std::log(double(sizes[i])));
        y.push_back(std::log(values[i]));
    }
    const double n = double(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (!(sxx > 0.0)) {
        throw ValidationError("fit_power_law: sizes in the fit window must differ");
    }
    ScalingFit fit;
    fit.sizes = sizes;
    fit.values = values;
    fit.fit_window = fit_window;
    fit.exponent = sxy / sxx;
    const double intercept = my - fit.exponent * mx;
    fit.prefactor = std::exp(intercept);
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - intercept - fit.exponent * x[i];
        rss += r * r;
    }
    fit.residual_rms = std::sqrt(rss / n);
    return fit;
}

ScalingFit sensitivity_sweep(const std::vector<int>& sizes, const SweepSpec& spec, const ProtocolOptions& options) {
    if (static_cast<int>(sizes.size()) < spec.fit_window) {
        throw ValidationError("sensitivity_sweep: fewer sizes than the fit window");
    }
    std::vector<double> values(sizes.size());
    ProtocolOptions inner = options;
    inner.threads = 1;
    inner.with_bound = false;
    parallel_for(sizes.size(), options.threads, [&](std::size_t i) {
        const int n = sizes[i];
        const double wc = 0.5 * n;
        switch (spec.mode) {
            case SweepMode::bound:
                values[i] = qfi_rate(ModelParams::single(n, spec.ratio * wc), options.qfi).sensitivity;
                break;
            case SweepMode::protocol1:
                values[i] = protocol1_error(ModelParams::single(n, spec.ratio * wc), inner).delta_omega_bar;
                break;
            case SweepMode::protocol2: {
                const double wd = spec.ratio * wc;
                values[i] = protocol2_error(ModelParams::cascaded(n, wd + spec.delta_omega, wd), inner).delta_omega_bar;
                break;
            }
        }
    });
    return fit_power_law(sizes, values, spec.fit_window);
}

}  // namespace btc
