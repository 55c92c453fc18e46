#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "shelab/error.hpp"
#include "shelab/tails_density.hpp"

using namespace shelab;

namespace {

MomentEnvelope unit_envelope(double rho) {
    MomentEnvelope env;
    env.kappa1 = env.kappa1_tilde = env.kappa2 = env.kappa2_tilde = 1.0;
    env.rho = rho;
    return env;
}

}  // namespace

TEST_CASE("paley-zygmund margin") {
    const std::vector<double> ones(50, 1.0);
    CHECK(paley_zygmund_margin(ones, 0.5).margin == doctest::Approx(0.75));
    CHECK(paley_zygmund_margin(ones, 1.0 - 1e-9).margin == doctest::Approx(1.0));
    std::vector<double> two(100, 0.0);
    for (std::size_t i = 0; i < 50; ++i) two[i] = 2.0;
    CHECK(paley_zygmund_margin(two, 0.5).margin == doctest::Approx(0.375));

    const auto rows = paley_zygmund_table(two);
    CHECK(rows.size() == 9);
    CHECK(all_dominated(rows));
}

TEST_CASE("moment envelope fit") {
    // m_p = k1^p e^{k2 (p^rho - p)} keeps m_1 = k1, so the ratios are k2 (1 - p^{1 - rho})
    std::vector<double> m;
    for (int p = 1; p <= 4; ++p) m.push_back(std::pow(1.3, p) * std::exp(0.2 * (std::pow(p, 3.0) - p)));
    const auto env = fit_moment_envelope(m, 3.0);
    CHECK(env.kappa1 == doctest::Approx(1.3));
    CHECK(env.kappa1_tilde == doctest::Approx(1.3));
    CHECK(env.kappa2 == doctest::Approx(0.2 * (1.0 - 1.0 / 16.0)).epsilon(1e-9));
    CHECK(env.kappa2_tilde == doctest::Approx(0.2 * (1.0 - 1.0 / 4.0)).epsilon(1e-9));
    CHECK(default_rho(CovarianceSpec::white()) == doctest::Approx(3.0));
}

TEST_CASE("right tail from moment envelopes") {
    const auto env = unit_envelope(2.0);
    CHECK(tail_upper(std::exp(4.0), env) == doctest::Approx(std::exp(-4.0)).epsilon(1e-13));
    const double edge = env.upper_threshold() * (1.0 + 1e-9);
    CHECK(std::isfinite(tail_upper(edge, env)));
    CHECK_THROWS_AS(tail_upper(env.upper_threshold() * 0.9, env), Error);
    double prev = 2.0;
    for (double a = edge; a < 1e6; a *= 1.7) {
        const double v = tail_upper(a, env);
        CHECK(v < prev);
        prev = v;
    }

    CHECK(tail_lower(std::numbers::e / 2.0, env) == doctest::Approx(0.25 * std::exp(-2.0)).epsilon(1e-13));

    MomentEnvelope ordered = env;
    ordered.kappa1 = 1.2;
    ordered.kappa1_tilde = 1.0;
    ordered.kappa2 = 0.6;
    ordered.kappa2_tilde = 0.5;
    ordered.rho = 3.0;
    const double start = std::max(ordered.upper_threshold(), ordered.lower_threshold());
    for (double a = start; a < 1e8; a *= 2.3) CHECK(tail_lower(a, ordered) <= tail_upper(a, ordered));

    MomentEnvelope bad = env;
    bad.kappa2 = 0.1;
    bad.kappa2_tilde = 1.0;
    bad.rho = 1.5;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("right tail envelopes in t and a") {
    const auto white = CovarianceSpec::white();
    const auto e = envelope_exponents(white);
    CHECK(e.log_power == doctest::Approx(1.5));
    CHECK(e.t_power == doctest::Approx(-0.5));
    CHECK(e.prefactor_upper == doctest::Approx(-0.25));

    RightTailConstants c;
    c.c2 = 0.7;
    c.c2t = 1.4;
    for (double a = 2.0; a < 1e6; a *= 3.0) {
        const auto b = right_tail_envelopes(a, 0.5, white, c);
        CHECK(b.lower <= b.upper);
    }
    const double a = 1e30;
    const auto b = right_tail_envelopes(a, 0.5, white, c);
    CHECK(std::log(b.upper) / std::pow(std::log(a), 1.5) == doctest::Approx(-0.7 * std::pow(0.5, -0.5)).epsilon(1e-3));
}

TEST_CASE("small ball quantities") {
    const std::vector<SmallBallInputs> unit{{1.0, 1.0, 1.0}};
    const auto sb = small_ball_params(unit);
    CHECK(sb.lambda == doctest::Approx(32.0));
    CHECK(sb.b == doctest::Approx(0.125));

    const std::vector<SmallBallInputs> noisy{{1.4, 2.5, 1.0}, {1.3, 2.1, 0.9}};
    CHECK(small_ball_params(noisy).b <= 0.125);

    const SmallBallParams exact{1.0, 2.0 * std::exp(-4.0)};
    CHECK(small_ball_bound(0.5 * std::exp(-8.0), exact) == doctest::Approx(2.0 * std::exp(-4.0)).epsilon(1e-12));
    CHECK(small_ball_bound(exact.threshold() * (1.0 - 1e-12), exact) == doctest::Approx(2.0).epsilon(1e-9));
    double prev = 0.0;
    for (double r = exact.threshold() * 1e-6; r < exact.threshold(); r *= 1.9) {
        const double v = small_ball_bound(r, exact);
        CHECK(v > prev);
        prev = v;
    }

    CHECK(u_negative_moment_bound(0.0, {1.0, 0.125}, 1.0) == doctest::Approx(1.0));
    CHECK(u_negative_moment_bound(1.0, {1.0, 0.125}, 1.0) ==
          doctest::Approx(2.0 * std::exp(2.0 * std::sqrt(std::log(16.0))) *
                          (1.0 + 4.0 * std::sqrt(std::numbers::pi) * std::exp(1.0)))
              .epsilon(1e-13));
}

TEST_CASE("empirical frequencies") {
    const std::vector<double> s{1.0, 2.0, 3.0, 4.0};
    CHECK(empirical_survival(s, 2.5).value == 0.5);
    CHECK(empirical_survival(s, 10.0).value == 0.0);
    CHECK(empirical_survival(s, -std::numeric_limits<double>::infinity()).value == 1.0);
    CHECK(empirical_survival(s, 2.0).value == 0.75);
    const auto f = empirical_small_ball(s, 0.5, 5.0);
    CHECK(f.value == 0.5);
    CHECK(f.ci.low <= 0.5);
    CHECK(f.ci.high >= 0.5);
}

TEST_CASE("kernel density estimates") {
    const std::vector<double> single{0.0};
    const double h = 0.3;
    CHECK(kde(single, h, 0.0) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi * h * h)));

    std::mt19937_64 rng(12);
    std::normal_distribution<double> nd;
    std::vector<double> xs(100000);
    for (auto& x : xs) x = nd(rng);
    const double bw = silverman_bandwidth(xs);
    CHECK(kde(xs, bw, 0.0) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(0.02));
    for (double y : {-8.0, -1.0, 0.5, 9.0}) CHECK(kde(xs, bw, y) >= 0.0);

    std::vector<double> pos(20000);
    for (auto& x : pos) x = std::exp(0.5 * nd(rng));
    // log-normal density at 1 is 1 / (0.5 sqrt(2 pi))
    std::vector<double> logs(pos.size());
    for (std::size_t i = 0; i < pos.size(); ++i) logs[i] = std::log(pos[i]);
    CHECK(kde_log(pos, silverman_bandwidth(logs), 1.0) ==
          doctest::Approx(1.0 / (0.5 * std::sqrt(2.0 * std::numbers::pi))).epsilon(0.05));
}

TEST_CASE("density envelopes") {
    const auto white = CovarianceSpec::white();
    DensityEnvelope de;
    de.c2 = 0.5;
    de.c2t = 1.0;
    de.heat = 1.0;
    for (double y = 2.5; y < 1e4; y *= 2.0) {
        const auto b = density_envelopes(y, 1.0, white, de);
        REQUIRE(b.lower_valid);
        CHECK(b.lower <= b.upper);
    }
    CHECK_FALSE(density_envelopes(1.5, 1.0, white, de).lower_valid);
    de.a0 = 3.0;
    CHECK_THROWS_WITH_AS(density_envelopes(2.0, 1.0, white, de), doctest::Contains("below-validity-threshold"), Error);

    LeftTailConstants lc;
    lc.c1 = 0.5;
    double prev = INFINITY;
    for (double y : {1e-3, 1e-6, 1e-9}) {
        const double v = left_tail_density_bound(y, 0.25, white, lc);
        CHECK(v < prev);
        prev = v;
    }
    CHECK(left_tail_density_bound(1e-300, 0.25, white, lc) < 1e-100);
    CHECK_THROWS_WITH_AS(left_tail_density_bound(2.0, 0.25, white, lc), doctest::Contains("outside-validity"), Error);
}

TEST_CASE("bound tables") {
    // all samples sit below the envelope's validity threshold e^3
    std::vector<double> below(200);
    for (std::size_t i = 0; i < below.size(); ++i) below[i] = static_cast<double>(i + 1) / 20.0;
    const auto env = unit_envelope(3.0);
    const auto rows = right_tail_table(below, env);
    REQUIRE_FALSE(rows.empty());
    for (const auto& r : rows) CHECK_FALSE(r.in_domain);
    CHECK(all_dominated(rows));

    const std::vector<double> ones(200, 1.0);
    const auto sb = small_ball_table(ones, {1.0, 0.125}, 1.0);
    CHECK(sb.size() == 10);
    for (const auto& r : sb) {
        CHECK(r.empirical == 0.0);
        CHECK(r.dominated);
    }
}
