#include "shelab/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "shelab/error.hpp"
#include "shelab/monte_carlo.hpp"
#include "shelab/quadrature.hpp"

namespace shelab {

namespace {

LatticeRegularization resolve(LatticeRegularization reg, double t) {
    const LatticeRegularization def = default_regularization(t);
    if (reg.steps == 0) reg.steps = def.steps;
    if (reg.dx == 0.0) reg.dx = def.dx;
    return reg;
}

double factorial(std::size_t n) { return std::tgamma(static_cast<double>(n) + 1.0); }

// Brownian path from x over [0, t]: x + sqrt(t) bridge(s/t) + (s/t)(Y - x).
void bridge_path(NormalSource& g, double t, std::size_t steps, int d, const double* x, double* out) {
    fill_bridge(g, steps, d, out);
    double end[8];
    const double sd = std::sqrt(t);
    for (int k = 0; k < d; ++k) end[k] = sd * g();
    for (std::size_t i = 0; i <= steps; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(steps);
        double* p = out + i * static_cast<std::size_t>(d);
        for (int k = 0; k < d; ++k) p[k] = x[k] + sd * p[k] + frac * end[k];
    }
}

}  // namespace

double fn_kernel(const InitialDatum& u0, double t, std::span<const double> x, std::span<const double> times,
                 std::span<const double> points) {
    const std::size_t n = times.size();
    const std::size_t d = x.size();
    if (n == 0) throw Error("invalid-argument", "fn_kernel needs n >= 1");
    if (points.size() != n * d) throw Error("invalid-argument", "points must hold n * d coordinates");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
    for (std::size_t i = 0; i < n; ++i) {
        if (!(times[order[i]] > 0.0) || !(times[order[i]] < t))
            throw Error("invalid-argument", "times must lie in (0, t)");
        if (i > 0 && times[order[i]] == times[order[i - 1]])
            throw Error("coincident-times", "fn_kernel needs distinct times");
    }
    std::vector<double> lag(d);
    auto point = [&](std::size_t j) { return points.subspan(order[j] * d, d); };
    double v = 1.0 / factorial(n);
    for (std::size_t k = 0; k < d; ++k) lag[k] = x[k] - point(n - 1)[k];
    v *= heat_kernel(t - times[order[n - 1]], lag);
    for (std::size_t j = n - 1; j >= 1; --j) {
        for (std::size_t k = 0; k < d; ++k) lag[k] = point(j)[k] - point(j - 1)[k];
        v *= heat_kernel(times[order[j]] - times[order[j - 1]], lag);
    }
    return v * heat_convolve(u0, times[order[0]], point(0));
}

ChaosTerm chaos_variance_bridge(std::size_t n, const CovarianceSpec& spec, double t, std::span<const double> x,
                                const InitialDatum& u0, std::size_t n_mc, std::uint64_t seed,
                                LatticeRegularization reg) {
    ChaosTerm term;
    term.order = n;
    term.method = ChaosMethod::bridge_rep;
    if (n == 0) {
        const double m = heat_convolve(u0, t, x);
        term.variance = m * m;
        term.method = ChaosMethod::exact;
        return term;
    }
    reg = resolve(reg, t);
    const UnsmoothedPathKernel kernel(spec, t, reg);
    const int d = spec.dim();
    const std::size_t steps = reg.steps;
    const std::size_t stride = (steps + 1) * static_cast<std::size_t>(d);
    const double nf = factorial(n);
    const Estimate e = monte_carlo(n_mc, seed, [&](NormalSource& g) {
        thread_local std::vector<double> buf;
        buf.resize(2 * stride);
        bridge_path(g, t, steps, d, x.data(), buf.data());
        bridge_path(g, t, steps, d, x.data(), buf.data() + stride);
        const double q = pair_integral(kernel, buf.data(), buf.data() + stride);
        return u0(buf.data() + steps * d, d) * u0(buf.data() + stride + steps * d, d) * std::pow(q, n) / nf;
    });
    term.variance = e.value;
    term.se = e.se;
    return term;
}

ChaosTerm chaos_variance_simplex(std::size_t n, const CovarianceSpec& spec, double t, const InitialDatum& u0,
                                 LatticeRegularization reg) {
    if (!spec.temporal_dirac() || !spec.spatial_dirac())
        throw Error("unsupported", "simplex quadrature is implemented for space-time white noise only");
    if (!u0.is_constant()) throw Error("unsupported", "simplex quadrature needs a constant initial datum");
    if (n < 1 || n > 2) throw Error("unsupported", "simplex quadrature is implemented for n in {1, 2}");
    reg = resolve(reg, t);
    const double h = reg.dx;
    const std::vector<double> w = trapezoid_weights(t, reg.steps);
    const std::size_t m = reg.steps + 1;
    const double ds = t / static_cast<double>(reg.steps);
    const double amp = spec.amplitude();
    const double c2 = u0.lower() * u0.lower();

    // P(|D_s| < h/2) for D_s ~ N(0, 2 s): the window probability of the
    // difference of two independent Brownian motions.
    auto window = [&](double var) { return var <= 0.0 ? 1.0 : std::erf(0.5 * h / std::sqrt(2.0 * var)); };

    ChaosTerm term;
    term.order = n;
    term.method = ChaosMethod::simplex_quadrature;
    if (n == 1) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += w[i] * window(2.0 * ds * static_cast<double>(i)) / h;
        term.variance = c2 * amp * s;
        return term;
    }
    // E[Q^2] = sum_i sum_l w_i w_l E[X_i X_l], X_i = 1{|D_i| < h/2} / h.
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double vi = 2.0 * ds * static_cast<double>(i);
        total += w[i] * w[i] * window(vi) / (h * h);
        for (std::size_t l = i + 1; l < m; ++l) {
            const double vgap = 2.0 * ds * static_cast<double>(l - i);
            const double sg = std::sqrt(2.0 * vgap);
            auto cond = [&](double y) {
                return 0.5 * (std::erf((0.5 * h - y) / sg) - std::erf((-0.5 * h - y) / sg));
            };
            double joint;
            if (vi == 0.0) {
                joint = cond(0.0);
            } else {
                const double sd = std::sqrt(vi);
                joint = integrate_smooth(
                    [&](double y) { return std::exp(-y * y / (2.0 * vi)) / (sd * std::sqrt(2.0 * M_PI)) * cond(y); },
                    -0.5 * h, 0.5 * h, 1e-10);
            }
            total += 2.0 * w[i] * w[l] * joint / (h * h);
        }
    }
    term.variance = c2 * amp * amp * total / 2.0;
    return term;
}

Estimate bridge_functional_constant(const CovarianceSpec& spec, std::size_t n_mc, std::uint64_t seed,
                                    std::size_t steps, double dx) {
    const int d = spec.dim();
    const std::vector<double> w = trapezoid_weights(1.0, steps);
    const std::size_t stride = (steps + 1) * static_cast<std::size_t>(d);
    const double root2 = std::sqrt(2.0);
    return monte_carlo(n_mc, seed, [&](NormalSource& g) {
        thread_local std::vector<double> buf;
        buf.resize(stride);
        fill_bridge(g, steps, d, buf.data());
        double s = 0.0;
        double y[8];
        for (std::size_t i = 0; i <= steps; ++i) {
            for (int k = 0; k < d; ++k) y[k] = root2 * buf[i * d + k];
            s += w[i] * gamma_lattice(spec, std::span<const double>(y, d), dx);
        }
        return spec.amplitude() * s;
    });
}

double k_n_bound(std::size_t n, double bridge_constant) {
    return std::pow(bridge_constant, static_cast<double>(n)) / factorial(n);
}

double chaos_variance_bound(std::size_t n, const CovarianceSpec& spec, double t, std::span<const double> x,
                            const InitialDatum& u0, double C) {
    const double m = heat_convolve_abs(u0, t, x);
    const double nn = static_cast<double>(n);
    return C * m * m * std::pow(t, (2.0 - spec.alpha0() - spec.alpha() / 2.0) * nn) *
           std::pow(factorial(n), spec.alpha() / 2.0 - 1.0);
}

double fit_chaos_constant(const ChaosTerm& first, const CovarianceSpec& spec, double t, std::span<const double> x,
                          const InitialDatum& u0) {
    if (first.order != 1) throw Error("invalid-argument", "the chaos constant is fitted on the n = 1 term");
    return first.variance / chaos_variance_bound(1, spec, t, x, u0, 1.0);
}

ChaosSecondMoment chaos_second_moment(const CovarianceSpec& spec, double t, std::span<const double> x,
                                      const InitialDatum& u0, std::size_t n_trunc, std::size_t n_mc,
                                      std::uint64_t seed, LatticeRegularization reg, double tail_tolerance) {
    ChaosSecondMoment out;
    const double m0 = heat_convolve(u0, t, x);
    out.terms.push_back(ChaosTerm{0, m0 * m0, 0.0, ChaosMethod::exact});
    out.estimate = {m0 * m0, 0.0};
    if (n_trunc == 0) return out;

    reg = resolve(reg, t);
    const UnsmoothedPathKernel kernel(spec, t, reg);
    const int d = spec.dim();
    const std::size_t steps = reg.steps;
    const std::size_t stride = (steps + 1) * static_cast<std::size_t>(d);
    // Components 0..n_trunc-1 hold orders 1..n_trunc; the last holds their sum.
    const auto est = monte_carlo(n_mc, n_trunc + 1, seed, [&](NormalSource& g, std::span<double> outv) {
        thread_local std::vector<double> buf;
        buf.resize(2 * stride);
        bridge_path(g, t, steps, d, x.data(), buf.data());
        bridge_path(g, t, steps, d, x.data(), buf.data() + stride);
        const double q = pair_integral(kernel, buf.data(), buf.data() + stride);
        const double weight = u0(buf.data() + steps * d, d) * u0(buf.data() + stride + steps * d, d);
        double term = weight;
        double sum = 0.0;
        for (std::size_t n = 1; n <= n_trunc; ++n) {
            term *= q / static_cast<double>(n);
            outv[n - 1] = term;
            sum += term;
        }
        outv[n_trunc] = sum;
    });
    for (std::size_t n = 1; n <= n_trunc; ++n)
        out.terms.push_back(ChaosTerm{n, est[n - 1].value, est[n - 1].se, ChaosMethod::bridge_rep});
    out.estimate = {m0 * m0 + est[n_trunc].value, est[n_trunc].se};

    out.fitted_constant = fit_chaos_constant(out.terms[1], spec, t, x, u0);
    for (std::size_t n = n_trunc + 1; n <= n_trunc + 200; ++n) {
        const double b = chaos_variance_bound(n, spec, t, x, u0, out.fitted_constant);
        if (!std::isfinite(b)) break;
        out.tail_bound += b;
    }
    if (out.tail_bound > tail_tolerance * out.estimate.value)
        out.warnings.push_back("truncation-tail: fitted tail bound exceeds the requested tolerance");
    return out;
}

MomentBoundExponents moment_bound_exponents(const CovarianceSpec& spec) {
    const double a = spec.alpha();
    return {(4.0 - a) / (2.0 - a), spec.beta(), 4.0 / (2.0 - a)};
}

namespace {
double moment_form(double p, double intensity, const CovarianceSpec& spec, double t, std::span<const double> x,
                   const InitialDatum& u0, double C1, double C2) {
    const auto e = moment_bound_exponents(spec);
    return std::pow(C1 * heat_convolve_abs(u0, t, x), p) *
           std::exp(C2 * std::pow(intensity, e.intensity_power) * std::pow(t, e.t_power) * std::pow(p, e.p_power));
}
}  // namespace

double moment_bound_upper(double p, double intensity, const CovarianceSpec& spec, double t,
                          std::span<const double> x, const InitialDatum& u0, double C1, double C2) {
    if (!(p >= 1.0)) throw Error("invalid-argument", "upper moment bound needs p >= 1");
    return moment_form(p, intensity, spec, t, x, u0, C1, C2);
}

double moment_bound_lower(double p, double intensity, const CovarianceSpec& spec, double t,
                          std::span<const double> x, const InitialDatum& u0, double C1, double C2) {
    if (!(p > 1.0)) throw Error("invalid-argument", "lower moment bound needs p > 1");
    return moment_form(p, intensity, spec, t, x, u0, C1, C2);
}

}  // namespace shelab
