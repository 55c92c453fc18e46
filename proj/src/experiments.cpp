#include "shelab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "shelab/chaos.hpp"
#include "shelab/error.hpp"
#include "shelab/feynman_kac.hpp"
#include "shelab/malliavin.hpp"
#include "shelab/quadrature.hpp"
#include "shelab/rng.hpp"
#include "shelab/tails_density.hpp"

namespace shelab {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

class Csv {
public:
    Csv(const fs::path& path, std::vector<std::string> header) : out_(path), path_(path.string()) {
        if (!out_) throw Error("io-error", "cannot write " + path_);
        row(header);
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }
    const std::string& path() const { return path_; }

private:
    std::ofstream out_;
    std::string path_;
};

std::string fmt(double v) { return format_double(v); }
std::string fmt_size(std::size_t v) { return std::to_string(v); }
std::string flag(bool b) { return b ? "true" : "false"; }

std::string fmt_point(const std::vector<double>& x) {
    std::string s;
    for (std::size_t i = 0; i < x.size(); ++i) s += (i ? ";" : "") + format_double(x[i]);
    return s;
}

std::size_t scaled(std::size_t n, double scale) {
    return std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(static_cast<double>(n) * scale)));
}

struct Context {
    ExperimentConfig cfg;
    CovarianceSpec spec;
    InitialDatum u0;
    fs::path out;
    std::uint64_t root = 0;
    std::uint64_t command_seed = 0;
    int threads = 1;
    double scale = 1.0;
    CommandResult result;

    Context(const ExperimentConfig& c, const RunOptions& opt, const std::string& verb)
        : cfg(c), spec(make_spec(c)), u0(make_initial(c)) {
        cfg.validate();
        out = opt.out_dir.empty() ? fs::path(cfg.output_dir) : fs::path(opt.out_dir);
        fs::create_directories(out);
        root = opt.seed ? *opt.seed : cfg.seed;
        command_seed = derive_seed(root, verb);
        threads = std::max(1, opt.threads);
        if (!(opt.budget_scale > 0.0)) throw Error("invalid-argument", "budget scale must be positive");
        scale = opt.budget_scale;
        result.command = verb;
        result.seeds.push_back({"root", root});
        result.seeds.push_back({verb, command_seed});
    }

    std::uint64_t seed(const std::string& label, std::uint64_t index) {
        const std::uint64_t s = derive_seed(command_seed, label, index);
        result.seeds.push_back({label + "/" + std::to_string(index), s});
        return s;
    }

    std::size_t n_fields() const { return scaled(cfg.budgets.n_fields, scale); }
    std::size_t n_paths() const { return std::max<std::size_t>(1, scaled(cfg.budgets.n_paths, scale)); }
    std::size_t n_mc() const { return scaled(cfg.budgets.n_mc, scale); }

    LatticeRegularization regularization() const { return {cfg.regularization.steps, cfg.regularization.dx}; }

    MomentOptions moment_options() const {
        MomentOptions o;
        o.regularization = regularization();
        o.max_k = cfg.budgets.max_k;
        return o;
    }

    Csv csv(const std::string& name, std::vector<std::string> header) {
        Csv c(out / name, std::move(header));
        result.csv_paths.push_back(c.path());
        return c;
    }

    void fail() { result.ok = false; }
};

void table_header(Context& ctx, const std::string& name, Csv*& slot, std::optional<Csv>& storage) {
    storage.emplace(ctx.csv(name, {"t", "x", "abscissa", "empirical", "empirical_CI_low", "empirical_CI_high",
                                   "bound", "dominated_flag"}));
    slot = &*storage;
}

void write_rows(Context& ctx, Csv& csv, double t, const std::vector<double>& x, const std::vector<TableRow>& rows) {
    for (const auto& r : rows) {
        const std::string f = !r.in_domain ? "out-of-domain" : flag(r.dominated);
        if (r.in_domain && !r.dominated) ctx.fail();
        csv.row({fmt(t), fmt_point(x), fmt(r.abscissa), fmt(r.empirical), fmt(r.ci_low), fmt(r.ci_high), fmt(r.bound),
                 f});
    }
}

std::vector<double> raw_moments(std::span<const double> v, int p_max) {
    std::vector<double> m;
    for (int p = 1; p <= p_max; ++p) {
        double s = 0.0;
        for (double x : v) s += std::pow(x, p);
        m.push_back(s / static_cast<double>(v.size()));
    }
    return m;
}

}  // namespace

LatticeSpec lattice_for(const ExperimentConfig& config, double t) {
    double xr = 0.0;
    for (const auto& x : config.points)
        for (double v : x) xr = std::max(xr, std::abs(v));
    const int d = make_spec(config).dim();
    LatticeSpec lat = LatticeSpec::desk_default(t, xr, d);
    if (config.lattice.dt > 0.0) lat.dt = config.lattice.dt;
    if (config.lattice.L > 0.0) lat.L = config.lattice.L;
    if (config.lattice.dx > 0.0) lat.dx = config.lattice.dx;
    lat.validate();
    return lat;
}

// ---- moments ------------------------------------------------------------------------------

CommandResult run_moments(const ExperimentConfig& config, const RunOptions& opt) {
    Context ctx(config, opt, "moments");
    const auto& c = ctx.cfg;
    const std::size_t kmax = c.budgets.max_k;
    const MomentOptions mo = ctx.moment_options();
    const auto ex = moment_bound_exponents(ctx.spec);

    struct Cell {
        double t;
        std::vector<double> x;
        std::vector<MomentResult> m;  // k = 1..kmax
        ChaosSecondMoment chaos;
    };
    std::vector<Cell> cells;
    std::size_t idx = 0;
    for (double t : c.times)
        for (const auto& x : c.points) {
            Cell cell{t, x, {}, {}};
            for (std::size_t k = 1; k <= kmax; ++k)
                cell.m.push_back(moment_k(k, t, x, ctx.spec, ctx.u0, ctx.n_mc(), ctx.seed("moment_k", idx * 16 + k),
                                          c.intensity, mo));
            cell.chaos = chaos_second_moment(ctx.spec.with_amplitude(ctx.spec.amplitude() * c.intensity * c.intensity),
                                             t, x, ctx.u0, c.budgets.chaos_order, ctx.n_mc(), ctx.seed("chaos", idx),
                                             ctx.regularization());
            for (const auto& r : cell.m)
                for (const auto& w : r.warnings) ctx.result.warnings.push_back(w);
            for (const auto& w : cell.chaos.warnings) ctx.result.warnings.push_back(w);
            cells.push_back(std::move(cell));
            ++idx;
        }

    // Constants of the moment envelope: upper side at the smallest t, lower side at the largest.
    const double t_lo = *std::min_element(c.times.begin(), c.times.end());
    const double t_hi = *std::max_element(c.times.begin(), c.times.end());
    double C2_up = 0.0, C2_low = std::numeric_limits<double>::infinity();
    for (const auto& cell : cells) {
        const double h = heat_convolve_abs(ctx.u0, cell.t, cell.x);
        for (std::size_t k = 1; k <= kmax; ++k) {
            const double p = static_cast<double>(k);
            const double m = cell.m[k - 1].estimate.value;
            if (!(m > 0.0) || !(h > 0.0)) continue;
            const double denom = std::pow(c.intensity, ex.intensity_power) * std::pow(cell.t, ex.t_power) *
                                 std::pow(p, ex.p_power);
            const double r = (std::log(m) - p * std::log(h)) / denom;
            if (cell.t == t_lo) C2_up = std::max(C2_up, r);
            if (cell.t == t_hi && k >= 2) C2_low = std::min(C2_low, r);
        }
    }
    if (!std::isfinite(C2_low)) C2_low = 0.0;
    C2_low = std::max(0.0, C2_low);

    Csv csv = ctx.csv("moments.csv", {"t", "x", "k", "estimator", "estimate", "se", "bound_upper", "bound_lower", "flag"});
    for (const auto& cell : cells) {
        for (std::size_t k = 1; k <= kmax; ++k) {
            const double p = static_cast<double>(k);
            const Estimate e = cell.m[k - 1].estimate;
            const double up = moment_bound_upper(p, c.intensity, ctx.spec, cell.t, cell.x, ctx.u0, 1.0, C2_up);
            const double low =
                k >= 2 ? moment_bound_lower(p, c.intensity, ctx.spec, cell.t, cell.x, ctx.u0, 1.0, C2_low) : kNaN;
            const double tol = 1e-12 * std::abs(up);
            bool ok = e.value - 3.0 * e.se <= up + tol;
            if (k >= 2) ok = ok && low <= e.value + 3.0 * e.se + 1e-12 * std::abs(low);
            if (!ok) ctx.fail();
            csv.row({fmt(cell.t), fmt_point(cell.x), fmt_size(k), "moment_k", fmt(e.value), fmt(e.se), fmt(up),
                     fmt(low), flag(ok)});
        }
        if (kmax >= 2) {
            const Estimate e = cell.chaos.estimate;
            const bool ok = agree_within(e, cell.m[1].estimate, 3.0);
            if (!ok) ctx.fail();
            csv.row({fmt(cell.t), fmt_point(cell.x), "2", "chaos", fmt(e.value), fmt(e.se),
                     fmt(moment_bound_upper(2.0, c.intensity, ctx.spec, cell.t, cell.x, ctx.u0, 1.0, C2_up)),
                     fmt(moment_bound_lower(2.0, c.intensity, ctx.spec, cell.t, cell.x, ctx.u0, 1.0, C2_low)),
                     flag(ok)});
        }
    }
    Csv terms = ctx.csv("moments_chaos_terms.csv", {"t", "x", "order", "variance", "se", "method"});
    for (const auto& cell : cells)
        for (const auto& term : cell.chaos.terms) {
            const char* m = term.method == ChaosMethod::exact              ? "exact"
                            : term.method == ChaosMethod::simplex_quadrature ? "simplex_quadrature"
                                                                              : "bridge_rep";
            terms.row({fmt(cell.t), fmt_point(cell.x), fmt_size(term.order), fmt(term.variance), fmt(term.se), m});
        }
    return ctx.result;
}

// ---- tails -----------------------------------------------------------------------------------

CommandResult run_tails(const ExperimentConfig& config, const RunOptions& opt) {
    Context ctx(config, opt, "tails");
    const auto& c = ctx.cfg;
    const double rho = c.rho > 0.0 ? c.rho : default_rho(ctx.spec);
    const FkOptions fk{c.intensity};
    const MomentOptions mo = ctx.moment_options();

    Csv summary = ctx.csv("tails_summary.csv", {"t", "x", "heat", "mean", "se", "kappa1", "kappa2", "rho", "lambda",
                                                 "b", "r_star", "mean_flag"});
    std::optional<Csv> pz_s, right_s, small_s, neg_s;
    Csv *pz, *right, *small, *neg;
    table_header(ctx, "tails_paley_zygmund.csv", pz, pz_s);
    table_header(ctx, "tails_right.csv", right, right_s);
    table_header(ctx, "tails_small_ball.csv", small, small_s);
    table_header(ctx, "tails_negative_moment.csv", neg, neg_s);

    std::size_t idx = 0;
    for (double t : c.times)
        for (const auto& x : c.points) {
            const LatticeSpec lat = lattice_for(c, t);
            const Ensemble ens = generate_ensemble(t, x, ctx.spec, c.smoothing, ctx.u0, ctx.n_fields(), ctx.n_paths(),
                                                   ctx.seed("ensemble", idx), fk, &lat, ctx.threads);
            const std::vector<double> v = ens.values();
            const double heat = heat_convolve(ctx.u0, t, x);
            const Estimate mean = ens.mean();
            const bool mean_ok = std::abs(mean.value - heat) <= 3.0 * mean.se + 1e-12 * std::abs(heat);
            if (!mean_ok) ctx.fail();

            const bool degenerate = std::all_of(v.begin(), v.end(), [&](double y) { return y == v.front(); });
            MomentEnvelope env;
            SmallBallParams sb;
            bool have_env = false, have_sb = false;
            if (!degenerate) {
                try {
                    env = fit_moment_envelope(raw_moments(v, 4), rho);
                    have_env = true;
                } catch (const Error& e) {
                    ctx.result.warnings.push_back(std::string("envelope fit: ") + e.what());
                }
            }
            try {
                sb = lambda_b_global(t, {x}, ctx.spec, ctx.u0, ctx.n_mc(), ctx.seed("lambda_b", idx), mo, c.intensity);
                have_sb = true;
            } catch (const Error& e) {
                ctx.result.warnings.push_back(std::string("lambda_b: ") + e.what());
            }

            if (std::all_of(v.begin(), v.end(), [](double y) { return y >= 0.0; }))
                write_rows(ctx, *pz, t, x, paley_zygmund_table(v));
            if (have_env) write_rows(ctx, *right, t, x, right_tail_table(v, env, 0.99));
            if (have_sb && heat > 0.0) {
                write_rows(ctx, *small, t, x, small_ball_table(v, sb, heat));
                if (std::all_of(v.begin(), v.end(), [](double y) { return y > 0.0; })) {
                    const Estimate em = ens.raw_moment(-0.5);
                    TableRow r;
                    r.abscissa = 0.5;
                    r.empirical = em.value;
                    r.ci_low = em.value - 1.96 * em.se;
                    r.ci_high = em.value + 1.96 * em.se;
                    r.bound = u_negative_moment_bound(0.5, sb, heat);
                    r.dominated = em.value - 3.0 * em.se <= r.bound;
                    write_rows(ctx, *neg, t, x, {r});
                }
            }
            summary.row({fmt(t), fmt_point(x), fmt(heat), fmt(mean.value), fmt(mean.se),
                         fmt(have_env ? env.kappa1 : kNaN), fmt(have_env ? env.kappa2 : kNaN), fmt(rho),
                         fmt(have_sb ? sb.lambda : kNaN), fmt(have_sb ? sb.b : kNaN),
                         fmt(have_sb ? sb.threshold() : kNaN), flag(mean_ok)});
            ++idx;
        }
    return ctx.result;
}

// ---- density ------------------------------------------------------------------------------------

namespace {

// Pointwise normal-approximation band of a Gaussian KDE: var ~ f / (n h 2 sqrt(pi)).
Interval kde_band(double f, std::size_t n, double h, double jacobian = 1.0) {
    const double sd = std::sqrt(std::max(0.0, f * jacobian) / (static_cast<double>(n) * h * 2.0 * std::sqrt(M_PI)));
    return {f - 1.96 * sd, f + 1.96 * sd};
}

}  // namespace

CommandResult run_density(const ExperimentConfig& config, const RunOptions& opt) {
    Context ctx(config, opt, "density");
    const auto& c = ctx.cfg;
    const FkOptions fk{c.intensity};
    const std::vector<std::string> table{"t", "x", "abscissa", "empirical", "empirical_CI_low", "empirical_CI_high",
                                         "bound", "dominated_flag"};

    if (c.density.mode == "injected_normal") {
        Csv csv = ctx.csv("density_injected.csv", table);
        const std::size_t n = scaled(c.density.n_injected, ctx.scale);
        NormalSource g(ctx.seed("injected", 0));
        std::vector<double> v(n);
        for (auto& y : v) y = g();
        const double h = silverman_bandwidth(v);
        const std::vector<double> x0{0.0};
        for (double y : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
            const double f = kde(v, h, y);
            const double pdf = std::exp(-0.5 * y * y) / std::sqrt(2.0 * M_PI);
            const Interval band = kde_band(f, n, h);
            // The analytic pdf is the reference; agreement within 2% is checked at 0.
            const bool ok = y != 0.0 || std::abs(f / pdf - 1.0) <= 0.02;
            if (!ok) ctx.fail();
            csv.row({fmt(0.0), fmt_point(x0), fmt(y), fmt(f), fmt(band.low), fmt(band.high), fmt(pdf),
                     y == 0.0 ? flag(ok) : "out-of-domain"});
        }
        Csv meta = ctx.csv("density_shape.csv", {"t", "x", "statistic", "value"});
        meta.row({fmt(0.0), fmt_point(x0), "bandwidth_linear", fmt(h)});
        meta.row({fmt(0.0), fmt_point(x0), "n_samples", fmt_size(n)});
        return ctx.result;
    }

    Csv right = ctx.csv("density_right.csv", table);
    Csv right_lower = ctx.csv("density_right_lower.csv", table);
    Csv left = ctx.csv("density_left.csv", table);
    Csv shape = ctx.csv("density_shape.csv", {"t", "x", "statistic", "value"});
    const EnvelopeExponents ee = envelope_exponents(ctx.spec);

    std::size_t idx = 0;
    for (double t : c.times)
        for (const auto& x : c.points) {
            const LatticeSpec lat = lattice_for(c, t);
            const Ensemble ens = generate_ensemble(t, x, ctx.spec, c.smoothing, ctx.u0, ctx.n_fields(), ctx.n_paths(),
                                                   ctx.seed("ensemble", idx), fk, &lat, ctx.threads);
            ++idx;
            std::vector<double> v = ens.values();
            std::sort(v.begin(), v.end());
            const std::size_t n = v.size();
            const double heat = heat_convolve(ctx.u0, t, x);
            if (!(v.front() > 0.0) || v.front() == v.back()) {
                ctx.result.warnings.push_back("density: ensemble is degenerate or not positive; skipped");
                continue;
            }
            std::vector<double> logs;
            for (double y : v) logs.push_back(std::log(y));
            const double hlog = silverman_bandwidth(logs);
            const double hlin = silverman_bandwidth(v);

            // Right tail: log-spaced points across the top decile.
            const double q90 = quantile_sorted(v, 0.9);
            const double lo = std::max(q90, 1.0 + 1e-9), hi = v.back();
            std::vector<double> ys, fs, xs, ls;
            const std::size_t m = c.density.eval_points;
            if (hi > lo)
                for (std::size_t j = 0; j < m; ++j) {
                    const double y = lo * std::pow(hi / lo, static_cast<double>(j) / static_cast<double>(m - 1));
                    const double f = kde_log(v, hlog, y);
                    if (!(f > 0.0)) continue;
                    ys.push_back(y);
                    fs.push_back(f);
                    xs.push_back(std::pow(std::log(y), ee.log_power));
                    ls.push_back(std::log(f));
                }
            LinearFit fit;
            bool have_fit = ys.size() >= 3;
            if (have_fit) fit = linear_fit(xs, ls);
            shape.row({fmt(t), fmt_point(x), "slope", fmt(have_fit ? fit.slope : kNaN)});
            shape.row({fmt(t), fmt_point(x), "intercept", fmt(have_fit ? fit.intercept : kNaN)});
            shape.row({fmt(t), fmt_point(x), "r_squared", fmt(have_fit ? fit.r_squared : kNaN)});
            shape.row({fmt(t), fmt_point(x), "log_power", fmt(ee.log_power)});
            shape.row({fmt(t), fmt_point(x), "bandwidth_log", fmt(hlog)});
            shape.row({fmt(t), fmt_point(x), "bandwidth_linear", fmt(hlin)});
            shape.row({fmt(t), fmt_point(x), "n_samples", fmt_size(n)});

            if (have_fit && fit.slope < 0.0) {
                const DensityEnvelope de =
                    fit_density_envelope(fit.slope, ys.front(), fs.front(), ys.back(), fs.back(), t, ctx.spec, heat);
                for (std::size_t j = 0; j < ys.size(); ++j) {
                    const DensityBounds b = density_envelopes(ys[j], t, ctx.spec, de);
                    const Interval band = kde_band(fs[j], n, hlog, ys[j]);
                    const bool ok = band.low <= b.upper * (1.0 + 1e-9);
                    if (!ok) ctx.fail();
                    right.row({fmt(t), fmt_point(x), fmt(ys[j]), fmt(fs[j]), fmt(band.low), fmt(band.high),
                               fmt(b.upper), flag(ok)});
                    const bool ok_low = !b.lower_valid || band.high >= b.lower * (1.0 - 1e-9);
                    if (!ok_low) ctx.fail();
                    right_lower.row({fmt(t), fmt_point(x), fmt(ys[j]), fmt(fs[j]), fmt(band.low), fmt(band.high),
                                     fmt(b.lower), b.lower_valid ? flag(ok_low) : "out-of-domain"});
                }
            } else {
                ctx.result.warnings.push_back("density: right-tail regression unavailable or slope not negative");
            }

            // Left tail: three points below the smallest sample, linear-scale KDE.
            double prev = -1.0;
            bool monotone = true;
            for (int j = 1; j <= 3; ++j) {
                const double y = v.front() * 0.25 * j;
                const double f = kde(v, hlin, y);
                if (j > 1) monotone = monotone && f > prev;
                prev = f;
                const Interval band = kde_band(f, n, hlin);
                left.row({fmt(t), fmt_point(x), fmt(y), fmt(f), fmt(band.low), fmt(band.high), fmt(kNaN),
                          j == 3 ? flag(monotone) : "out-of-domain"});
            }
            if (!monotone) ctx.fail();
            shape.row({fmt(t), fmt_point(x), "left_monotone", flag(monotone)});
        }
    return ctx.result;
}

// ---- malliavin ------------------------------------------------------------------------------------

CommandResult run_malliavin(const ExperimentConfig& config, const RunOptions& opt) {
    Context ctx(config, opt, "malliavin");
    const auto& c = ctx.cfg;
    const std::vector<double>& x = c.points.front();
    const MomentOptions mo = ctx.moment_options();
    const CovarianceSpec spec = ctx.spec.with_amplitude(ctx.spec.amplitude() * c.intensity * c.intensity);

    Csv moments = ctx.csv("malliavin_moments.csv", {"t", "x", "quantity", "estimate", "se"});
    Csv checks = ctx.csv("malliavin_checks.csv",
                         {"check", "t", "value", "se", "target_low", "target_high", "flag"});

    // Scaling of E Z in t.
    std::vector<double> lt, lz;
    for (std::size_t i = 0; i < c.malliavin_times.size(); ++i) {
        const double t = c.malliavin_times[i];
        const ZEstimate z = z_first_moment(t, x, spec, ctx.u0, ctx.n_mc(), ctx.seed("ez-scaling", i), mo);
        for (const auto& w : z.warnings) ctx.result.warnings.push_back(w);
        moments.row({fmt(t), fmt_point(x), "ez", fmt(z.estimate.value), fmt(z.estimate.se)});
        if (z.estimate.value > 0.0) {
            lt.push_back(std::log(t));
            lz.push_back(std::log(z.estimate.value));
        }
    }
    const double target = 2.0 - ctx.spec.alpha0() - ctx.spec.alpha() / 2.0;
    if (lt.size() >= 2 && lt.size() == c.malliavin_times.size()) {
        const LinearFit fit = linear_fit(lt, lz);
        const bool ok = std::abs(fit.slope - target) <= 0.2;
        if (!ok) ctx.fail();
        checks.row({"scaling_slope", fmt(kNaN), fmt(fit.slope), fmt(kNaN), fmt(target - 0.2), fmt(target + 0.2),
                    flag(ok)});
    } else {
        checks.row({"scaling_slope", fmt(kNaN), fmt(kNaN), fmt(kNaN), fmt(target - 0.2), fmt(target + 0.2),
                    "out-of-domain"});
    }

    std::size_t idx = 0;
    for (double t : c.times) {
        MalliavinStats ms;
        bool have = true;
        try {
            ms = malliavin_stats(t, x, spec, ctx.u0, ctx.n_mc(), ctx.seed("stats", idx), mo);
        } catch (const Error& e) {
            if (e.code() != "insufficient-precision") throw;
            have = false;
            ctx.result.warnings.push_back(std::string("malliavin: ") + e.what());
        }
        if (!have) {
            checks.row({"small_ball", fmt(t), fmt(kNaN), fmt(kNaN), fmt(kNaN), fmt(kNaN), "out-of-domain"});
            checks.row({"negative_moment", fmt(t), fmt(kNaN), fmt(kNaN), fmt(kNaN), fmt(kNaN), "out-of-domain"});
            ++idx;
            continue;
        }
        moments.row({fmt(t), fmt_point(x), "ez", fmt(ms.ez.value), fmt(ms.ez.se)});
        moments.row({fmt(t), fmt_point(x), "ez2", fmt(ms.ez2.value), fmt(ms.ez2.se)});
        moments.row({fmt(t), fmt_point(x), "itilde", fmt(ms.itilde.value), fmt(ms.itilde.se)});
        moments.row({fmt(t), fmt_point(x), "lambda", fmt(ms.lambda), fmt(kNaN)});
        moments.row({fmt(t), fmt_point(x), "b", fmt(ms.b), fmt(kNaN)});

        const LatticeSpec lat = lattice_for(c, t);
        const Ensemble ens = generate_z_ensemble(t, x, ctx.spec, c.smoothing, ctx.u0, ctx.n_fields(), ctx.n_paths(),
                                                 ctx.seed("z-ensemble", idx), FkOptions{c.intensity}, &lat,
                                                 ctx.threads);
        const std::vector<double> v = ens.values();
        const SmallBallParams sb{ms.lambda, std::min(1.0, ms.b)};
        const auto rows = small_ball_table(v, sb, ms.ez.value);
        double worst = -std::numeric_limits<double>::infinity();
        for (const auto& r : rows) worst = std::max(worst, r.ci_low - r.bound);
        const bool sb_ok = all_dominated(rows);
        if (!sb_ok) ctx.fail();
        checks.row({"small_ball", fmt(t), fmt(worst), fmt(kNaN), fmt(-std::numeric_limits<double>::infinity()),
                    fmt(0.0), flag(sb_ok)});

        if (std::all_of(v.begin(), v.end(), [](double y) { return y > 0.0; })) {
            const Estimate em = ens.raw_moment(-0.5);
            const double bound = du_negative_moment_bound(0.5, ms.lambda, ms.b, ms.ez.value);
            const bool ok = em.value - 3.0 * em.se <= bound;
            if (!ok) ctx.fail();
            checks.row({"negative_moment", fmt(t), fmt(em.value), fmt(em.se), fmt(0.0), fmt(bound), flag(ok)});
        } else {
            checks.row({"negative_moment", fmt(t), fmt(kNaN), fmt(kNaN), fmt(0.0), fmt(kNaN), "out-of-domain"});
        }
        ++idx;
    }
    return ctx.result;
}

// ---- validate ---------------------------------------------------------------------------------------

UniformBoundCheck uniform_covariance_check(const CovarianceSpec& spec, const SmoothingParams& sp, std::size_t grid,
                                           double max_lag, double rel_tol) {
    sp.validate();
    const int d = spec.dim();
    std::vector<double> lags(grid);
    for (std::size_t j = 0; j < grid; ++j) lags[j] = max_lag * static_cast<double>(j + 1) / static_cast<double>(grid);

    // Temporal ratios (or the mass of a dirac factor, the same for every lag).
    std::vector<double> rt(grid);
    if (spec.temporal_dirac()) {
        const double reach = 10.0 * std::sqrt(sp.delta) + 10.0;
        const double mass = integrate_smooth([&](double u) { return smoothed_time_factor(spec, sp.delta, 0.0, u); },
                                             -reach, reach, 1e-10);
        std::fill(rt.begin(), rt.end(), mass);
    } else {
        for (std::size_t j = 0; j < grid; ++j)
            rt[j] = smoothed_time_factor(spec, sp.delta, 0.0, lags[j]) / gamma0(spec, lags[j]);
    }
    std::vector<double> rs(grid);
    const std::vector<double> origin(d, 0.0);
    if (spec.spatial_dirac()) {
        const double reach = 10.0 * std::sqrt(sp.epsilon) + 10.0;
        const double mass = integrate_smooth(
            [&](double u) {
                const double y[1] = {u};
                return smoothed_space_factor(spec, sp.epsilon, origin, y);
            },
            -reach, reach, 1e-10);
        std::fill(rs.begin(), rs.end(), mass);
    } else {
        for (std::size_t j = 0; j < grid; ++j) {
            const std::vector<double> y(d, lags[j]);
            rs[j] = smoothed_space_factor(spec, sp.epsilon, origin, y) / gamma(spec, y);
        }
    }
    UniformBoundCheck out;
    if (spec.amplitude() == 0.0) return out;
    for (std::size_t i = 0; i < grid; ++i)
        for (std::size_t j = 0; j < grid; ++j) {
            const double r = rt[i] * rs[j];
            if (r > out.worst_ratio) {
                out.worst_ratio = r;
                out.worst_time_lag = lags[i];
                out.worst_space_lag = lags[j];
            }
        }
    out.ok = out.worst_ratio <= 1.0 + rel_tol;
    return out;
}

double kl_max_eigenvalue(const CovarianceSpec& spec, const SmoothingParams& sp, const LatticeSpec& lattice) {
    const KLBasis b = kl_decompose(spec, sp, lattice);
    return b.eigenvalues().front();
}

CommandResult run_validate(const ExperimentConfig& config, const RunOptions& opt) {
    Context ctx(config, opt, "validate");
    Csv csv = ctx.csv("validate.csv", {"check", "computed", "expected", "tolerance", "flag"});
    auto exact = [&](const std::string& name, double got, double want, double rel = 1e-12) {
        const bool ok = std::abs(got - want) <= rel * std::max(1.0, std::abs(want));
        if (!ok) ctx.fail();
        csv.row({name, fmt(got), fmt(want), fmt(rel), flag(ok)});
    };
    auto at_most = [&](const std::string& name, double got, double limit, double rel) {
        const bool ok = got <= limit * (1.0 + rel);
        if (!ok) ctx.fail();
        csv.row({name, fmt(got), fmt(limit), fmt(rel), flag(ok)});
    };

    {
        MomentEnvelope env{1.0, 1.0, 1.0, 1.0, 2.0};
        exact("tail_upper_rho2", tail_upper(std::exp(4.0), env), std::exp(-4.0));
        exact("tail_lower_rho2", tail_lower(std::exp(1.0) / 2.0, env), 0.25 * std::exp(-2.0));
    }
    {
        const SmallBallParams sb{1.0, 2.0 * std::exp(-4.0)};
        exact("small_ball_bound", small_ball_bound(0.5 * std::exp(-8.0), sb), 2.0 * std::exp(-4.0));
        const SmallBallParams sb1{1.0, 0.125};
        exact("negative_moment_p0", u_negative_moment_bound(0.0, sb1, 1.0), 1.0);
        exact("negative_moment_p1", u_negative_moment_bound(1.0, sb1, 1.0),
              2.0 * std::exp(2.0 * std::sqrt(std::log(16.0))) * (1.0 + 4.0 * std::sqrt(M_PI) * std::exp(1.0)));
        const SmallBallInputs unit{1.0, 1.0, 1.0};
        const SmallBallParams toy = small_ball_params(std::span<const SmallBallInputs>(&unit, 1));
        exact("lambda_unit_plugin", toy.lambda, 32.0);
        exact("b_unit_plugin", toy.b, 0.125);
    }
    {
        const std::vector<double> ones(8, 1.0);
        exact("paley_zygmund_constant", paley_zygmund_margin(ones, 0.5).margin, 0.75);
        const std::vector<double> two{0.0, 2.0, 0.0, 2.0};
        exact("paley_zygmund_two_point", paley_zygmund_margin(two, 0.5).margin, 0.375);
        const std::vector<double> s{1.0, 2.0, 3.0, 4.0};
        exact("empirical_survival", empirical_survival(s, 2.5).value, 0.5);
        const std::vector<double> zero{0.0};
        exact("kde_single_sample", kde(zero, 0.5, 0.0), 1.0 / std::sqrt(2.0 * M_PI * 0.25));
    }
    {
        const CovarianceSpec w = CovarianceSpec::white();
        const EnvelopeExponents e = envelope_exponents(w);
        exact("white_log_power", e.log_power, 1.5);
        exact("white_t_power", e.t_power, -0.5);
        exact("white_prefactor_power", e.prefactor_upper, -0.25);
        exact("white_beta", w.beta(), 1.0);
    }
    {
        const double t = ctx.cfg.times.front();
        const LatticeSpec lat = lattice_for(ctx.cfg, t);
        at_most("kl_max_eigenvalue", kl_max_eigenvalue(ctx.spec, ctx.cfg.smoothing, lat), 1.0, 1e-8);
        try {
            const UniformBoundCheck u = uniform_covariance_check(ctx.spec, ctx.cfg.smoothing);
            at_most("q_smoothed_uniform_bound", u.worst_ratio, 1.0, 1e-6);
        } catch (const Error& e) {
            if (e.code() != "unsupported") throw;
            csv.row({"q_smoothed_uniform_bound", fmt(kNaN), fmt(1.0), fmt(1e-6), "out-of-domain"});
        }
    }
    return ctx.result;
}

// ---- dispatch -----------------------------------------------------------------------------------------

CommandResult run_command(const std::string& verb, const ExperimentConfig& config, const RunOptions& opt) {
    const auto start = std::chrono::steady_clock::now();
    CommandResult r;
    if (verb == "moments")
        r = run_moments(config, opt);
    else if (verb == "tails")
        r = run_tails(config, opt);
    else if (verb == "density")
        r = run_density(config, opt);
    else if (verb == "malliavin")
        r = run_malliavin(config, opt);
    else if (verb == "validate")
        r = run_validate(config, opt);
    else
        throw Error("invalid-argument", "unknown command " + verb);
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    json m;
    m["command"] = r.command;
    m["version"] = kVersion;
    char hash[20];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(config)));
    m["config_hash"] = hash;
    m["config"] = to_json(config);
    m["threads"] = opt.threads;
    m["budget_scale"] = opt.budget_scale;
    m["csv"] = r.csv_paths;
    m["wall_clock_seconds"] = r.wall_seconds;
    m["ok"] = r.ok;
    m["warnings"] = r.warnings;
    json seeds = json::array();
    for (const auto& s : r.seeds) seeds.push_back({{"label", s.label}, {"seed", s.seed}});
    m["seed_ledger"] = seeds;
    const fs::path out = opt.out_dir.empty() ? fs::path(config.output_dir) : fs::path(opt.out_dir);
    std::ofstream(out / "manifest.json") << m.dump(2) << '\n';
    return r;
}

}  // namespace shelab
