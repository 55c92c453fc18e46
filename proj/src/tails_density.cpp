#include "shelab/tails_density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "shelab/error.hpp"
#include "shelab/malliavin.hpp"

namespace shelab {

namespace {

[[noreturn]] void below_threshold(const char* what, double a, double threshold) {
    std::ostringstream os;
    os << what << ": argument " << a << " is below the validity threshold " << threshold;
    throw Error("below-validity-threshold", os.str());
}

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

// ---- moment envelopes ------------------------------------------------------------------

void MomentEnvelope::validate() const {
    if (!(rho > 1.0)) throw Error("invalid-envelope", "rho must exceed 1");
    if (!finite_positive(kappa1_tilde) || !finite_positive(kappa2_tilde))
        throw Error("invalid-envelope", "envelope constants must be positive");
    if (kappa1 < kappa1_tilde || kappa2 < kappa2_tilde)
        throw Error("invalid-envelope", "need kappa1 >= kappa1~ and kappa2 >= kappa2~");
}

double MomentEnvelope::upper_threshold() const { return kappa1 * std::exp(rho * kappa2); }

double MomentEnvelope::lower_threshold() const { return 0.5 * kappa1_tilde * std::exp(kappa2_tilde); }

double default_rho(const CovarianceSpec& spec) { return (4.0 - spec.alpha()) / (2.0 - spec.alpha()); }

MomentEnvelope fit_moment_envelope(std::span<const double> m, double rho) {
    if (m.size() < 2) throw Error("invalid-argument", "envelope fit needs moments p = 1..P with P >= 2");
    for (double v : m)
        if (!finite_positive(v)) throw Error("invalid-argument", "raw moments must be positive and finite");
    const double floor = 1e-12;
    MomentEnvelope env;
    env.rho = rho;
    env.kappa1 = env.kappa1_tilde = m[0];
    const double lk = std::log(m[0]);
    double hi = floor, lo = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < m.size(); ++i) {
        const double p = static_cast<double>(i + 1);
        const double r = (std::log(m[i]) - p * lk) / std::pow(p, rho);
        hi = std::max(hi, r);
        lo = std::min(lo, r);
    }
    env.kappa2 = hi;
    env.kappa2_tilde = std::max(floor, lo);
    env.validate();
    return env;
}

double tail_upper(double a, const MomentEnvelope& env) {
    env.validate();
    const double threshold = env.upper_threshold();
    if (!(a >= threshold)) below_threshold("tail_upper", a, threshold);
    const double rho = env.rho;
    const double rate = std::pow(rho, rho / (1.0 - rho)) * (rho - 1.0) * std::pow(env.kappa2, 1.0 / (1.0 - rho));
    return std::exp(-rate * std::pow(std::log(a / env.kappa1), rho / (rho - 1.0)));
}

double tail_lower(double a, const MomentEnvelope& env) {
    env.validate();
    const double threshold = env.lower_threshold();
    if (!(a >= threshold)) below_threshold("tail_lower", a, threshold);
    const double rho = env.rho;
    const double pre = 2.0 * std::log(env.kappa1 / env.kappa1_tilde) + std::pow(2.0, rho) * env.kappa2 -
                       2.0 * env.kappa2_tilde;
    if (!(pre > 0.0)) throw Error("invalid-envelope", "lower-tail prefactor must be positive");
    const double arg = std::log(2.0 * a / env.kappa1_tilde) / env.kappa2_tilde;
    return 0.25 * std::exp(-pre * std::pow(arg, rho / (rho - 1.0)));
}

// ---- right-tail envelopes --------------------------------------------------------------

EnvelopeExponents envelope_exponents(const CovarianceSpec& spec) {
    const double a0 = spec.alpha0(), a = spec.alpha();
    const double s = 4.0 - 2.0 * a0 - a;
    return {(4.0 - a) / 2.0, -s / 2.0, -s / 4.0, -s / 2.0};
}

BoundPair right_tail_envelopes(double a, double t, const CovarianceSpec& spec, const RightTailConstants& c) {
    if (!(t > 0.0)) throw Error("invalid-argument", "t must be positive");
    const double threshold = c.a0 * std::exp(c.b0 * std::pow(t, spec.beta()));
    if (!(a >= threshold)) below_threshold("right_tail_envelopes", a, threshold);
    const double l = std::log(c.c3 * a), lt = std::log(c.c3t * a);
    if (!(l > 0.0) || !(lt > 0.0)) below_threshold("right_tail_envelopes (log argument)", a, 1.0 / std::min(c.c3, c.c3t));
    const EnvelopeExponents e = envelope_exponents(spec);
    const double tt = std::pow(t, e.t_power);
    return {c.c1t * std::exp(-c.c2t * tt * std::pow(lt, e.log_power)),
            c.c1 * std::exp(-c.c2 * tt * std::pow(l, e.log_power))};
}

// ---- small ball ---------------------------------------------------------------------------

void SmallBallParams::validate() const {
    if (!finite_positive(lambda)) throw Error("invalid-argument", "lambda must be positive");
    if (!(b > 0.0 && b <= 1.0)) throw Error("invalid-argument", "b must lie in (0, 1]");
}

double SmallBallParams::threshold() const { return 0.5 * std::exp(-2.0 * std::sqrt(lambda * std::log(2.0 / b))); }

SmallBallParams small_ball_params(std::span<const SmallBallInputs> points) {
    if (points.empty()) throw Error("invalid-argument", "empty x grid");
    double lam = 0.0, ratio = 0.0;
    for (const auto& p : points) {
        if (!finite_positive(p.heat)) throw Error("invalid-argument", "p_t * u0 must be positive");
        const double h2 = p.heat * p.heat;
        lam = std::max(lam, 32.0 * p.second_moment * p.second_moment_sqrt2 / (h2 * h2));
        ratio = std::max(ratio, p.second_moment / h2);
    }
    SmallBallParams sb{lam, 1.0 / (8.0 * ratio)};
    sb.validate();
    return sb;
}

SmallBallParams lambda_b_global(double t, const std::vector<std::vector<double>>& x_grid, const CovarianceSpec& spec,
                                const InitialDatum& u0, std::size_t n_mc, std::uint64_t seed,
                                const MomentOptions& opt, double intensity) {
    std::vector<SmallBallInputs> pts;
    for (std::size_t i = 0; i < x_grid.size(); ++i) {
        const auto& x = x_grid[i];
        const Estimate m = moment_k(2, t, x, spec, u0, n_mc, derive_seed(seed, "m2", i), intensity, opt).estimate;
        const Estimate ms =
            moment_k(2, t, x, spec, u0, n_mc, derive_seed(seed, "m2-sqrt2", i), std::sqrt(2.0) * intensity, opt)
                .estimate;
        if (!(m.value > 3.0 * m.se) || !(ms.value > 3.0 * ms.se))
            throw Error("insufficient-precision", "second moment is not resolved above 3 SE");
        pts.push_back({m.value, ms.value, heat_convolve(u0, t, x)});
    }
    return small_ball_params(pts);
}

double small_ball_bound(double r, const SmallBallParams& sb) {
    sb.validate();
    const double rs = sb.threshold();
    if (!(r > 0.0)) throw Error("invalid-argument", "r must be positive");
    if (!(r < rs)) {
        std::ostringstream os;
        os << "r = " << r << " is not below r* = " << rs;
        throw Error("above-small-ball-threshold", os.str());
    }
    const double z = std::log(2.0 * r) / std::sqrt(sb.lambda) + 2.0 * std::sqrt(std::log(2.0 / sb.b));
    return 2.0 * std::exp(-0.25 * z * z);
}

double u_negative_moment_bound(double p, const SmallBallParams& sb, double heat) {
    sb.validate();
    return du_negative_moment_bound(p, sb.lambda, sb.b, heat);
}

// ---- empirical ---------------------------------------------------------------------------

PzMargin paley_zygmund_margin(std::span<const double> x, double theta) {
    if (x.size() < 2) throw Error("invalid-argument", "need at least 2 samples");
    if (!(theta > 0.0 && theta < 1.0)) throw Error("invalid-argument", "theta must lie in (0, 1)");
    const double n = static_cast<double>(x.size());
    double m1 = 0.0, m2 = 0.0;
    for (double v : x) {
        if (v < 0.0) throw Error("invalid-argument", "Paley-Zygmund needs nonnegative samples");
        m1 += v;
        m2 += v * v;
    }
    m1 /= n;
    m2 /= n;
    if (m2 == 0.0) throw Error("degenerate-samples", "all samples are zero");
    const double cut = theta * m1;
    double hit = 0.0;
    for (double v : x) hit += v >= cut ? 1.0 : 0.0;
    hit /= n;
    const double k = (1.0 - theta) * (1.0 - theta);
    PzMargin out;
    out.margin = hit - k * m1 * m1 / m2;
    // Influence of each sample on the plug-in margin; the threshold's own
    // dependence on the mean is ignored.
    RunningStats psi;
    for (double v : x) {
        const double ind = v >= cut ? 1.0 : 0.0;
        psi.add(ind - k * (2.0 * m1 / m2 * v - m1 * m1 / (m2 * m2) * v * v));
    }
    out.se_band = psi.standard_error();
    return out;
}

Frequency empirical_survival(std::span<const double> x, double a) {
    if (x.size() < 2) throw Error("invalid-argument", "need at least 2 samples");
    const auto k = static_cast<std::size_t>(std::count_if(x.begin(), x.end(), [a](double v) { return v >= a; }));
    return {static_cast<double>(k) / static_cast<double>(x.size()), wilson_interval(k, x.size())};
}

Frequency empirical_small_ball(std::span<const double> x, double r, double normalizer) {
    if (x.size() < 2) throw Error("invalid-argument", "need at least 2 samples");
    if (!(normalizer > 0.0)) throw Error("invalid-argument", "normalizer must be positive");
    const double cut = r * normalizer;
    const auto k = static_cast<std::size_t>(std::count_if(x.begin(), x.end(), [cut](double v) { return v < cut; }));
    return {static_cast<double>(k) / static_cast<double>(x.size()), wilson_interval(k, x.size())};
}

double kde(std::span<const double> x, double h, double y) {
    if (!(h > 0.0)) throw Error("invalid-argument", "bandwidth must be positive");
    if (x.empty()) throw Error("invalid-argument", "no samples");
    double s = 0.0;
    for (double v : x) {
        const double z = (y - v) / h;
        s += std::exp(-0.5 * z * z);
    }
    return s / (static_cast<double>(x.size()) * h * std::sqrt(2.0 * M_PI));
}

double silverman_bandwidth(std::span<const double> x) {
    if (x.size() < 2) throw Error("invalid-argument", "need at least 2 samples");
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    RunningStats st;
    for (double v : s) st.add(v);
    const double iqr = quantile_sorted(s, 0.75) - quantile_sorted(s, 0.25);
    double spread = std::sqrt(st.variance());
    if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
    if (!(spread > 0.0)) throw Error("degenerate-samples", "samples have no spread");
    return 0.9 * spread * std::pow(static_cast<double>(s.size()), -0.2);
}

double kde_log(std::span<const double> x, double log_bandwidth, double y) {
    if (!(y > 0.0)) return 0.0;
    std::vector<double> lx;
    lx.reserve(x.size());
    for (double v : x) {
        if (!(v > 0.0)) throw Error("invalid-argument", "log-scale KDE needs positive samples");
        lx.push_back(std::log(v));
    }
    return kde(lx, log_bandwidth, std::log(y)) / y;
}

// ---- density envelopes ----------------------------------------------------------------------

void DensityEnvelope::validate() const {
    for (double v : {c1, c2, c3, c1t, c2t, c3t, a0})
        if (!finite_positive(v)) throw Error("invalid-argument", "density envelope constants must be positive");
}

DensityBounds density_envelopes(double y, double t, const CovarianceSpec& spec, const DensityEnvelope& de) {
    de.validate();
    if (!(t > 0.0)) throw Error("invalid-argument", "t must be positive");
    const double threshold = std::max(de.a0 * std::exp(de.b0 * std::pow(t, spec.beta())), 1.0 / de.c3);
    if (!(y >= threshold) || !(std::log(de.c3 * y) > 0.0)) below_threshold("density_envelopes", y, threshold);
    const EnvelopeExponents e = envelope_exponents(spec);
    const double tt = std::pow(t, e.t_power);
    DensityBounds out;
    out.upper = de.c1 * std::pow(t, e.prefactor_upper) * std::exp(-de.c2 * tt * std::pow(std::log(de.c3 * y), e.log_power));
    const double lt = std::log(de.c3t * y);
    out.lower_valid = y > de.heat + 1.0 && lt > 0.0;
    out.lower = out.lower_valid
                    ? de.c1t * std::pow(t, e.prefactor_lower) * std::exp(-de.c2t * tt * std::pow(lt, e.log_power))
                    : std::numeric_limits<double>::quiet_NaN();
    return out;
}

double left_tail_density_bound(double y, double t, const CovarianceSpec& spec, const LeftTailConstants& c) {
    if (!(t > 0.0)) throw Error("invalid-argument", "t must be positive");
    const double ceiling = c.a0 * std::exp(-c.b0 * std::pow(t, spec.beta()));
    if (!(y > 0.0) || !(y < ceiling)) {
        std::ostringstream os;
        os << "left-tail bound needs 0 < y < " << ceiling << ", got " << y;
        throw Error("outside-validity", os.str());
    }
    const double z = -c.c1 * std::log(y) - c.c2;
    return c.C * std::pow(t, envelope_exponents(spec).prefactor_upper) * std::exp(-z * z);
}

DensityEnvelope fit_density_envelope(double slope, double y_low, double f_low, double y_high, double f_high,
                                     double t, const CovarianceSpec& spec, double heat) {
    if (!(slope < 0.0)) throw Error("fit-failure", "right-tail regression slope is not negative");
    if (!(y_low > 1.0 && y_high > y_low) || !finite_positive(f_low) || !finite_positive(f_high))
        throw Error("fit-failure", "density anchors must satisfy 1 < y_low < y_high with positive values");
    const EnvelopeExponents e = envelope_exponents(spec);
    const double tt = std::pow(t, e.t_power);
    DensityEnvelope de;
    de.c3 = de.c3t = 1.0;
    de.c2 = -0.5 * slope / tt;
    de.c2t = -2.0 * slope / tt;
    de.c1 = f_low * std::exp(de.c2 * tt * std::pow(std::log(y_low), e.log_power)) / std::pow(t, e.prefactor_upper);
    de.c1t = f_high * std::exp(de.c2t * tt * std::pow(std::log(y_high), e.log_power)) / std::pow(t, e.prefactor_lower);
    de.a0 = y_low;
    de.b0 = 0.0;
    de.heat = heat;
    de.validate();
    return de;
}

// ---- tables -----------------------------------------------------------------------------------

std::vector<TableRow> right_tail_table(std::span<const double> x, const MomentEnvelope& env, double q,
                                       std::size_t max_points) {
    if (x.size() < 2) throw Error("invalid-argument", "need at least 2 samples");
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    const double cut = quantile_sorted(s, q);
    const auto first = static_cast<std::size_t>(std::upper_bound(s.begin(), s.end(), cut) - s.begin());
    std::vector<TableRow> rows;
    if (first >= s.size()) return rows;
    const std::size_t avail = s.size() - first;
    const std::size_t n = std::min(max_points, avail);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t idx = first + (n == 1 ? 0 : j * (avail - 1) / (n - 1));
        TableRow r;
        r.abscissa = s[idx];
        const Frequency f = empirical_survival(s, r.abscissa);
        r.empirical = f.value;
        r.ci_low = f.ci.low;
        r.ci_high = f.ci.high;
        if (r.abscissa >= env.upper_threshold()) {
            r.bound = tail_upper(r.abscissa, env);
            r.dominated = r.ci_low <= r.bound;
        } else {
            r.in_domain = false;
            r.bound = std::numeric_limits<double>::quiet_NaN();
        }
        rows.push_back(r);
    }
    return rows;
}

std::vector<TableRow> small_ball_table(std::span<const double> x, const SmallBallParams& sb, double normalizer,
                                       std::size_t points) {
    const double rs = sb.threshold();
    std::vector<TableRow> rows;
    for (std::size_t j = 1; j <= points; ++j) {
        TableRow r;
        r.abscissa = rs * std::pow(10.0, -0.5 * static_cast<double>(j));
        const Frequency f = empirical_small_ball(x, r.abscissa, normalizer);
        r.empirical = f.value;
        r.ci_low = f.ci.low;
        r.ci_high = f.ci.high;
        r.bound = small_ball_bound(r.abscissa, sb);
        r.dominated = r.ci_low <= r.bound;
        rows.push_back(r);
    }
    return rows;
}

std::vector<TableRow> paley_zygmund_table(std::span<const double> x) {
    double m1 = 0.0, m2 = 0.0;
    for (double v : x) {
        m1 += v;
        m2 += v * v;
    }
    m1 /= static_cast<double>(x.size());
    m2 /= static_cast<double>(x.size());
    std::vector<TableRow> rows;
    for (int j = 1; j <= 9; ++j) {
        const double theta = 0.1 * j;
        const PzMargin m = paley_zygmund_margin(x, theta);
        const Frequency f = empirical_survival(x, theta * m1);
        TableRow r;
        r.abscissa = theta;
        r.empirical = f.value;
        r.ci_low = f.ci.low;
        r.ci_high = f.ci.high;
        r.bound = (1.0 - theta) * (1.0 - theta) * m1 * m1 / m2;
        r.dominated = m.margin >= -3.0 * m.se_band;
        rows.push_back(r);
    }
    return rows;
}

bool all_dominated(std::span<const TableRow> rows) {
    return std::all_of(rows.begin(), rows.end(), [](const TableRow& r) { return !r.in_domain || r.dominated; });
}

}  // namespace shelab
