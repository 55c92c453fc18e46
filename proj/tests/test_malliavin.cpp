#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "shelab/chaos.hpp"
#include "shelab/error.hpp"
#include "shelab/malliavin.hpp"

using namespace shelab;

namespace {

const double kOrigin[] = {0.0};

LatticeSpec small_lattice() {
    LatticeSpec lat;
    lat.T = 0.1;
    lat.dt = 0.01;
    lat.L = 1.0;
    lat.dx = 0.05;
    return lat;
}

}  // namespace

TEST_CASE("zero kernel annihilates the derivative moments") {
    const auto zero = CovarianceSpec::white().with_amplitude(0.0);
    const auto one = InitialDatum::constant(1.0);
    CHECK(z_first_moment(0.25, kOrigin, zero, one, 1000, 1).estimate.value == 0.0);
    CHECK(z_second_moment(0.25, kOrigin, zero, one, 1000, 1).estimate.value == 0.0);
    CHECK(tilde_i(0.25, kOrigin, zero, one, 1000, 1).estimate.value == 0.0);

    const SmoothingParams sp{0.05, 0.05};
    const auto lat = small_lattice().padded_for(zero, sp);
    const auto field = smooth_field(sample_white_base(lat, 1), zero, sp);
    CHECK(z_conditioned(0.1, kOrigin, field, zero, sp, one, 100, 2).value == 0.0);
}

TEST_CASE("second moment dominates the squared first moment") {
    const auto white = CovarianceSpec::white();
    const auto one = InitialDatum::constant(1.0);
    const Estimate ez = z_first_moment(0.25, kOrigin, white, one, 20000, 1).estimate;
    const Estimate ez2 = z_second_moment(0.25, kOrigin, white, one, 20000, 2).estimate;
    const double sq_se = 2.0 * ez.value * ez.se;
    CHECK(ez2.value >= ez.value * ez.value - 3.0 * std::sqrt(ez2.se * ez2.se + sq_se * sq_se));
}

TEST_CASE("tilde I is symmetric under swapping the path pairs") {
    const auto white = CovarianceSpec::white();
    const auto one = InitialDatum::constant(1.0);
    const auto a = tilde_i(0.25, kOrigin, white, one, 4096, 7).estimate;
    const auto b = tilde_i(0.25, kOrigin, white, one, 4096, 7, {}, true).estimate;
    CHECK(a.value >= 0.0);
    CHECK(agree_within(a, b));
    CHECK(a.value != b.value);
}

TEST_CASE("lambda and b from moment plug-ins") {
    const auto lb = lambda_b_point({1.0, 0.01}, {1.0, 0.01}, {1.0, 0.01});
    CHECK(lb.lambda == doctest::Approx(32.0));
    CHECK(lb.b == doctest::Approx(0.125));
    CHECK_THROWS_WITH_AS(lambda_b_point({0.1, 0.05}, {1.0, 0.01}, {1.0, 0.01}),
                         doctest::Contains("insufficient-precision"), Error);

    const auto stats = malliavin_stats(0.25, kOrigin, CovarianceSpec::white(), InitialDatum::constant(1.0), 8192, 3);
    CHECK(stats.b <= 0.125);
    CHECK(stats.lambda > 0.0);
}

TEST_CASE("negative moment bound") {
    CHECK(du_negative_moment_bound(0.0, 1.0, 0.125, 1.0) == doctest::Approx(1.0));
    const double expected = 2.0 * std::exp(2.0 * std::sqrt(std::log(16.0))) *
                            (1.0 + 4.0 * std::sqrt(std::numbers::pi) * std::exp(1.0));
    CHECK(du_negative_moment_bound(1.0, 1.0, 0.125, 1.0) == doctest::Approx(expected).epsilon(1e-13));
    double prev = 0.0;
    for (double lambda : {0.1, 0.5, 1.0, 2.0, 5.0}) {
        const double v = du_negative_moment_bound(0.5, lambda, 0.1, 0.3);
        CHECK(v >= prev);
        prev = v;
    }
    prev = INFINITY;
    for (double b : {0.001, 0.01, 0.05, 0.125}) {
        const double v = du_negative_moment_bound(0.5, 1.0, b, 0.3);
        CHECK(v <= prev);
        prev = v;
    }
    CHECK_THROWS_AS(du_negative_moment_bound(-1.0, 1.0, 0.1, 1.0), Error);
}

TEST_CASE("derivative moment bounds") {
    const auto white = CovarianceSpec::white();
    const auto bump = InitialDatum::gaussian_bump(1.0, 1.0, 1);
    const DuConstants c{1.7, 0.3};
    CHECK(du_kth_moment_bound(0, 2.0, 0.5, kOrigin, white, bump, c) ==
          doctest::Approx(1.7 * moment_bound_upper(2.0, 1.0, white, 0.5, kOrigin, bump, 1.0, 0.3)));

    const auto one = InitialDatum::constant(1.0);
    const DuConstants flat{1.0, 0.0};
    CHECK(du_kth_moment_bound(1, 2.0, 4.0, kOrigin, white, one, flat) /
              du_kth_moment_bound(1, 2.0, 1.0, kOrigin, white, one, flat) ==
          doctest::Approx(2.0));

    const auto env = du_lambda_b_envelope(1.0, white, {2.0, 0.0, 0.5, 0.0});
    CHECK(env.lambda == doctest::Approx(2.0));
    CHECK(env.b == doctest::Approx(0.5));
}

TEST_CASE("conditioned derivative norm averages to the annealed first moment") {
    const auto white = CovarianceSpec::white();
    const SmoothingParams sp{0.05, 0.05};
    const auto one = InitialDatum::constant(1.0);
    const auto lat = small_lattice().padded_for(white, sp);
    const auto ens = generate_z_ensemble(0.1, kOrigin, white, sp, one, 300, 64, 4, {}, &lat, 1);
    for (double v : ens.values()) CHECK(v >= 0.0);

    MomentOptions mo;
    mo.mode = MomentMode::smoothed_lattice;
    mo.model = std::make_shared<const SmoothingOperator>(white, sp, lat);
    const auto annealed = z_first_moment(0.1, kOrigin, white, one, 20000, 5, mo);
    MESSAGE("ensemble " << ens.mean().value << " +- " << ens.mean().se << ", annealed " << annealed.estimate.value
                        << " +- " << annealed.estimate.se);
    CHECK(agree_within(ens.mean(), annealed.estimate));
}
