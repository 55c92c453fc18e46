#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "shelab/error.hpp"
#include "shelab/paths.hpp"
#include "shelab/stats.hpp"

using namespace shelab;

TEST_CASE("heat kernel") {
    const double zero[] = {0.0};
    CHECK(heat_kernel(1.0 / (2.0 * std::numbers::pi), zero) == doctest::Approx(1.0).epsilon(1e-14));

    // semigroup p_1 * p_1 = p_2 by midpoint quadrature
    for (double x : {0.0, 1.0}) {
        double s = 0.0;
        const double h = 1e-3;
        for (double y = -20.0 + h / 2; y < 20.0; y += h) {
            const double a[] = {y};
            const double b[] = {x - y};
            s += heat_kernel(1.0, a) * heat_kernel(1.0, b) * h;
        }
        const double xs[] = {x};
        CHECK(s == doctest::Approx(heat_kernel(2.0, xs)).epsilon(1e-9));
    }
}

TEST_CASE("heat convolution of initial data") {
    const double zero[] = {0.0};
    CHECK(heat_convolve(InitialDatum::constant(1.0), 0.3, zero) == 1.0);
    CHECK(heat_convolve(InitialDatum::gaussian_bump(1.0, 1.0, 1), 1.0, zero) ==
          doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-10));
    const double x[] = {0.7};
    // amplitude sqrt(v / (v + t)) exp(-x^2 / (2 (v + t)))
    CHECK(heat_convolve(InitialDatum::gaussian_bump(2.0, 0.5, 1), 0.25, x) ==
          doctest::Approx(2.0 * std::sqrt(0.5 / 0.75) * std::exp(-0.49 / 1.5)).epsilon(1e-10));
}

TEST_CASE("initial datum bounds are checked") {
    CHECK_THROWS_AS(InitialDatum::function([](std::span<const double> y) { return 2.0 + y[0]; }, 0.0, 3.0, 1, "ramp"),
                    Error);
    const auto ok = InitialDatum::function([](std::span<const double> y) { return 1.5 + std::sin(y[0]); }, 0.5, 2.5, 1,
                                           "wave");
    const double y[] = {0.0};
    CHECK(ok(y) == doctest::Approx(1.5));
}

TEST_CASE("brownian endpoint variance") {
    const std::size_t n = 20000;
    const double t = 0.5;
    const auto bundle = sample_bm(n, 1, t, 16, std::vector<double>{0.3}, 5);
    std::vector<double> sq(n);
    for (std::size_t p = 0; p < n; ++p) {
        const double d = bundle.path(p).node(16)[0] - 0.3;
        sq[p] = d * d;
        CHECK(bundle.path(p).node(0)[0] == 0.3);
    }
    const Estimate v = mean_estimate(sq);
    CHECK(std::abs(v.value - t) <= 3.0 * v.se);
}

TEST_CASE("bridge endpoints and marginal variance") {
    const std::size_t n = 20000;
    const auto bundle = sample_bridge(n, 1, 64, 9);
    std::vector<double> q(n), h(n);
    for (std::size_t p = 0; p < n; ++p) {
        const auto path = bundle.path(p);
        CHECK(path.node(0)[0] == 0.0);
        CHECK(std::abs(path.node(64)[0]) < 1e-12);
        q[p] = path.node(16)[0] * path.node(16)[0];
        h[p] = path.node(32)[0] * path.node(32)[0];
    }
    const Estimate vq = mean_estimate(q);
    const Estimate vh = mean_estimate(h);
    CHECK(std::abs(vq.value - 0.1875) <= 3.0 * vq.se);
    CHECK(std::abs(vh.value - 0.25) <= 3.0 * vh.se);
}

TEST_CASE("bridge is reversible in time") {
    const std::size_t n = 5000, steps = 64;
    const auto a = sample_bridge(n, 1, steps, 21);
    const auto b = sample_bridge(n, 1, steps, 22);
    // integral of B^2 over the first half versus the reversed path's first half
    auto first_half = [&](const PathView& v, bool reversed) {
        double s = 0.0;
        for (std::size_t i = 0; i <= steps / 2; ++i) {
            const double w = (i == 0 || i == steps / 2) ? 0.5 : 1.0;
            const double y = v.node(reversed ? steps - i : i)[0];
            s += w * y * y;
        }
        return s / static_cast<double>(steps);
    };
    std::vector<double> fa(n), fb(n);
    for (std::size_t p = 0; p < n; ++p) {
        fa[p] = first_half(a.path(p), false);
        fb[p] = first_half(b.path(p), true);
    }
    CHECK(ks_two_sample(fa, fb).p_value > 0.01);
}

TEST_CASE("same seed gives the same paths") {
    const auto a = sample_bm(8, 2, 1.0, 32, std::vector<double>{0.0, 1.0}, 77);
    const auto b = sample_bm(8, 2, 1.0, 32, std::vector<double>{0.0, 1.0}, 77);
    for (std::size_t p = 0; p < 8; ++p)
        for (std::size_t i = 0; i <= 32; ++i) {
            CHECK(a.path(p).node(i)[0] == b.path(p).node(i)[0]);
            CHECK(a.path(p).node(i)[1] == b.path(p).node(i)[1]);
        }
}

TEST_CASE("piecewise linear interpolation along a path") {
    const std::vector<double> data = {0.0, 1.0, 3.0};
    const PathView v{data.data(), 2, 1, 1.0};
    double out = 0.0;
    v.at(0.75, &out);
    CHECK(out == doctest::Approx(2.0));
    CHECK(trapezoid_weights(1.0, 2) == std::vector<double>{0.25, 0.5, 0.25});
}
