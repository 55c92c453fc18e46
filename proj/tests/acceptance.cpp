// Acceptance run: one PASS/FAIL line per criterion, measured values alongside.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "shelab/chaos.hpp"
#include "shelab/config.hpp"
#include "shelab/error.hpp"
#include "shelab/experiments.hpp"
#include "shelab/feynman_kac.hpp"
#include "shelab/malliavin.hpp"
#include "shelab/rng.hpp"
#include "shelab/tails_density.hpp"

using namespace shelab;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 20240101;
const std::vector<double> kOrigin{0.0};

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
    std::printf("%s [%d] %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

// Runs a criterion, turning an exception into a FAIL line.
void criterion(int id, const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
    const auto start = std::chrono::steady_clock::now();
    try {
        auto [ok, detail] = body();
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::ostringstream os;
        os << detail << " [" << std::fixed;
        os.precision(1);
        os << s << " s]";
        report(id, name, ok, os.str());
    } catch (const std::exception& e) {
        report(id, name, false, std::string("exception ") + e.what());
    }
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

double elapsed(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<CovarianceSpec> families() {
    return {CovarianceSpec::white(), CovarianceSpec(PowerLawTime{0.5, 1.0, 1.0}, RieszSpace{0.5, 1.0, 1}),
            CovarianceSpec(FractionalTime{0.75}, FractionalProductSpace{{0.75}})};
}

const char* family_name(std::size_t i) {
    static const char* names[] = {"white", "power_law/riesz", "fractional/fractional_product"};
    return names[i];
}

}  // namespace

int main() {
    const auto white = CovarianceSpec::white();
    const auto one = InitialDatum::constant(1.0);
    const SmoothingParams sp{0.01, 0.01};
    std::vector<const Ensemble*> generated;

    // 1. Mean identity on two horizons.
    std::vector<Ensemble> mean_ensembles;
    criterion(1, "mean identity", [&] {
        bool ok = true;
        std::string detail;
        for (double t : {0.25, 0.5}) {
            const LatticeSpec lat = LatticeSpec::desk_default(t).padded_for(white, sp);
            mean_ensembles.push_back(generate_ensemble(t, kOrigin, white, sp, one, 1024, 512,
                                                       derive_seed(kSeed, "mean", static_cast<std::uint64_t>(t * 100)),
                                                       {}, &lat));
            const Estimate m = mean_ensembles.back().mean();
            const bool hit = std::abs(m.value - 1.0) <= 3.0 * m.se;
            ok = ok && hit;
            detail += "t=" + num(t) + " mean " + num(m.value) + " se " + num(m.se) + "; ";
        }
        return std::make_pair(ok, detail);
    });
    for (const auto& e : mean_ensembles) generated.push_back(&e);

    // 2. Chaos expansion against the Feynman-Kac second moment.
    criterion(2, "chaos vs Feynman-Kac second moment", [&] {
        bool ok = true;
        std::string detail;
        for (double t : {0.25, 0.5}) {
            const auto start = std::chrono::steady_clock::now();
            const auto chaos = chaos_second_moment(white, t, kOrigin, one, 6, 200000, derive_seed(kSeed, "chaos", 0));
            const auto fk = moment_k(2, t, kOrigin, white, one, 200000, derive_seed(kSeed, "moment2", 0));
            const double secs = elapsed(start);
            const bool hit = agree_within(chaos.estimate, fk.estimate) && secs <= 300.0;
            ok = ok && hit;
            detail += "t=" + num(t) + " chaos " + num(chaos.estimate.value) + "+-" + num(chaos.estimate.se) + " fk " +
                      num(fk.estimate.value) + "+-" + num(fk.estimate.se) + " (" + num(secs) + " s); ";
        }
        return std::make_pair(ok, detail);
    });

    // 3. Bridge functional constant.
    criterion(3, "bridge functional constant", [&] {
        const Estimate c = bridge_functional_constant(white, 100000, derive_seed(kSeed, "bridge", 0), 4096, 0.02);
        const double target = std::sqrt(std::numbers::pi) / 2.0;
        const double rel = std::abs(c.value / target - 1.0);
        return std::make_pair(rel <= 0.01, "estimate " + num(c.value) + " se " + num(c.se) + " target " + num(target) +
                                               " rel err " + num(rel));
    });

    // 4. KL eigenvalue bound.
    criterion(4, "KL eigenvalue bound", [&] {
        double worst = 0.0;
        const auto specs = families();
        for (double eps : {1e-1, 1e-2})
            for (double delta : {1e-1, 1e-2})
                for (const auto& spec : specs)
                    worst = std::max(worst, kl_max_eigenvalue(spec, {eps, delta}, LatticeSpec::desk_default(0.25)));
        return std::make_pair(worst <= 1.0 + 1e-8, "max eigenvalue " + num(worst));
    });

    // 5. Pointwise bound of the smoothed covariance.
    criterion(5, "uniform covariance bound", [&] {
        bool ok = true;
        std::string detail;
        const auto specs = families();
        for (std::size_t f = 0; f < specs.size(); ++f) {
            double worst = 0.0;
            double at_t = 0.0, at_x = 0.0;
            for (double eps : {1e-1, 1e-2})
                for (double delta : {1e-1, 1e-2}) {
                    const auto r = uniform_covariance_check(specs[f], {eps, delta}, 64, 1.0, 1e-6);
                    ok = ok && r.ok;
                    if (r.worst_ratio > worst) {
                        worst = r.worst_ratio;
                        at_t = r.worst_time_lag;
                        at_x = r.worst_space_lag;
                    }
                }
            detail += std::string(family_name(f)) + " worst ratio " + num(worst) + " at lags (" + num(at_t) + ", " +
                      num(at_x) + "); ";
        }
        return std::make_pair(ok, detail);
    });

    // Ensemble shared by the tail, small-ball, negative-moment and density criteria.
    const double t_tail = 0.25;
    const LatticeSpec tail_lat = LatticeSpec::desk_default(t_tail).padded_for(white, sp);
    Ensemble tail_ens;
    Ensemble z_ens;
    bool have_tail = false, have_z = false;
    try {
        tail_ens = generate_ensemble(t_tail, kOrigin, white, sp, one, 2000, 256, derive_seed(kSeed, "tail", 0), {},
                                     &tail_lat);
        generated.push_back(&tail_ens);
        have_tail = true;
        z_ens = generate_z_ensemble(t_tail, kOrigin, white, sp, one, 1000, 128, derive_seed(kSeed, "z", 0), {},
                                    &tail_lat);
        generated.push_back(&z_ens);
        have_z = true;
    } catch (const std::exception& e) {
        std::printf("ensemble generation failed: %s\n", e.what());
    }
    const std::vector<double> tail_values = have_tail ? tail_ens.values() : std::vector<double>{};

    // 6. Paley-Zygmund margins on every ensemble.
    criterion(6, "Paley-Zygmund margins", [&] {
        bool ok = have_tail && have_z;
        double worst = INFINITY;
        for (const Ensemble* e : generated) {
            const auto v = e->values();
            for (double theta = 0.1; theta < 0.95; theta += 0.1) {
                const PzMargin m = paley_zygmund_margin(v, theta);
                worst = std::min(worst, m.margin + 3.0 * m.se_band);
                ok = ok && m.margin >= -3.0 * m.se_band;
            }
        }
        return std::make_pair(ok, std::to_string(generated.size()) + " ensembles, min(margin + 3 SE) " + num(worst));
    });

    // 7. Right tail against the fitted moment envelope.
    criterion(7, "right-tail domination", [&] {
        if (!have_tail) throw Error("missing-ensemble", "tail ensemble unavailable");
        std::vector<double> moments;
        for (int p = 1; p <= 4; ++p) moments.push_back(tail_ens.raw_moment(p).value);
        const MomentEnvelope env = fit_moment_envelope(moments, 3.0);
        const auto rows = right_tail_table(tail_values, env, 0.99);
        std::size_t in_domain = 0;
        for (const auto& r : rows) in_domain += r.in_domain;
        return std::make_pair(all_dominated(rows), std::to_string(rows.size()) + " rows (" + std::to_string(in_domain) +
                                                       " in domain), kappa1 " + num(env.kappa1) + " kappa2 " +
                                                       num(env.kappa2) + " threshold " + num(env.upper_threshold()));
    });

    // 8. Small-ball domination with plug-in lambda and b.
    SmallBallParams sb;
    bool have_sb = false;
    criterion(8, "small-ball domination", [&] {
        if (!have_tail) throw Error("missing-ensemble", "tail ensemble unavailable");
        sb = lambda_b_global(t_tail, {kOrigin}, white, one, 100000, derive_seed(kSeed, "lambda_b", 0));
        have_sb = true;
        const auto rows = small_ball_table(tail_values, sb, heat_convolve(one, t_tail, kOrigin), 10);
        double max_emp = 0.0;
        for (const auto& r : rows) max_emp = std::max(max_emp, r.empirical);
        return std::make_pair(all_dominated(rows), "lambda " + num(sb.lambda) + " b " + num(sb.b) + " r* " +
                                                       num(sb.threshold()) + " max empirical " + num(max_emp));
    });

    // 9. Scaling of E Z in t.
    criterion(9, "Malliavin scaling slope", [&] {
        std::vector<double> lt, lz;
        std::string detail;
        for (double t : {0.05, 0.1, 0.2, 0.4}) {
            MomentOptions mo;
            mo.regularization = {128, 12.0 * std::sqrt(t) / 128.0};
            const auto z = z_first_moment(t, kOrigin, white, one, 200000, derive_seed(kSeed, "ez", 0), mo);
            lt.push_back(std::log(t));
            lz.push_back(std::log(z.estimate.value));
            detail += "E Z(" + num(t) + ")=" + num(z.estimate.value) + " ";
        }
        const LinearFit fit = linear_fit(lt, lz);
        return std::make_pair(std::abs(fit.slope - 0.5) <= 0.2, "slope " + num(fit.slope) + "; " + detail);
    });

    // 10. Negative moments of u and Z.
    criterion(10, "negative moments", [&] {
        if (!have_tail || !have_z) throw Error("missing-ensemble", "ensembles unavailable");
        if (!have_sb) sb = lambda_b_global(t_tail, {kOrigin}, white, one, 100000, derive_seed(kSeed, "lambda_b", 0));
        const Estimate eu = tail_ens.raw_moment(-0.5);
        const double bu = u_negative_moment_bound(0.5, sb, heat_convolve(one, t_tail, kOrigin));
        const MalliavinStats ms = malliavin_stats(t_tail, kOrigin, white, one, 100000, derive_seed(kSeed, "stats", 0));
        const Estimate ez = z_ens.raw_moment(-0.5);
        const double bz = du_negative_moment_bound(0.5, ms.lambda, ms.b, ms.ez.value);
        const bool ok = eu.value - 3.0 * eu.se <= bu && ez.value - 3.0 * ez.se <= bz;
        return std::make_pair(ok, "E u^-1/2 " + num(eu.value) + " bound " + num(bu) + "; E Z^-1/2 " + num(ez.value) +
                                      " bound " + num(bz) + " (lambda " + num(ms.lambda) + ", b " + num(ms.b) + ")");
    });

    // 11. Density shape from the KDE.
    criterion(11, "density shape", [&] {
        if (!have_tail) throw Error("missing-ensemble", "tail ensemble unavailable");
        std::vector<double> v = tail_values;
        std::sort(v.begin(), v.end());
        std::vector<double> logs;
        for (double y : v) logs.push_back(std::log(y));
        const double hlog = silverman_bandwidth(logs);
        const double lo = std::max(quantile_sorted(v, 0.9), 1.0 + 1e-9), hi = v.back();
        std::vector<double> xs, ls;
        for (std::size_t j = 0; j < 64; ++j) {
            const double y = lo * std::pow(hi / lo, static_cast<double>(j) / 63.0);
            const double f = kde_log(v, hlog, y);
            if (!(f > 0.0)) continue;
            xs.push_back(std::pow(std::log(y), 1.5));
            ls.push_back(std::log(f));
        }
        const LinearFit fit = linear_fit(xs, ls);
        const double hlin = silverman_bandwidth(v);
        double f1 = kde(v, hlin, 0.25 * v.front());
        double f2 = kde(v, hlin, 0.5 * v.front());
        double f3 = kde(v, hlin, 0.75 * v.front());
        const bool left = f1 < f2 && f2 < f3;
        const bool ok = fit.slope < 0.0 && fit.r_squared >= 0.8 && left;
        return std::make_pair(ok, "slope " + num(fit.slope) + " R^2 " + num(fit.r_squared) + "; left KDE " + num(f1) +
                                      " < " + num(f2) + " < " + num(f3));
    });

    // 12. Byte-identical CSVs on re-runs of every command.
    criterion(12, "determinism", [&] {
        const fs::path root = fs::temp_directory_path() / "shelab_acceptance_determinism";
        fs::remove_all(root);
        ExperimentConfig config;
        std::size_t files = 0;
        bool ok = true;
        std::string mismatched;
        for (const char* verb : {"moments", "tails", "density", "malliavin", "validate"}) {
            std::vector<std::vector<std::string>> outputs;
            for (int rep = 0; rep < 2; ++rep) {
                const fs::path dir = root / (std::string(verb) + std::to_string(rep));
                fs::create_directories(dir);
                RunOptions opt;
                opt.out_dir = dir.string();
                opt.budget_scale = 0.1;
                std::vector<std::string> contents;
                for (const auto& p : run_command(verb, config, opt).csv_paths) contents.push_back(slurp(p));
                outputs.push_back(contents);
            }
            files += outputs[0].size();
            if (outputs[0] != outputs[1]) {
                ok = false;
                mismatched += std::string(verb) + " ";
            }
        }
        fs::remove_all(root);
        return std::make_pair(ok, std::to_string(files) + " CSV files compared" +
                                      (mismatched.empty() ? "" : ", mismatched: " + mismatched));
    });

    std::printf("%d of 12 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
