#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "shelab/covariance.hpp"
#include "shelab/error.hpp"
#include "shelab/path_kernels.hpp"
#include "shelab/paths.hpp"

using namespace shelab;

namespace {

CovarianceSpec power_riesz(double a0, double a) { return CovarianceSpec(PowerLawTime{a0, 1.0, 1.0}, RieszSpace{a, 1.0, 1}); }

// int_0^b u^-e g(u) du with u = w^m, m = 1 / (1 - e), which removes the singularity.
template <class G>
double singular_at_zero(const G& g, double e, double b) {
    boost::math::quadrature::tanh_sinh<double> ts;
    const double m = 1.0 / (1.0 - e);
    return m * ts.integrate([&](double w) { return g(std::pow(w, m)); }, 0.0, std::pow(b, 1.0 / m));
}

// (eta * eta)(x) for an even half kernel c|u|^-e, split at the two singularities.
double self_convolution(const HalfKernel& eta, double x) {
    const double c = eta.coefficient, e = eta.exponent;
    boost::math::quadrature::exp_sinh<double> es;
    // the integrand on [0, x] is symmetric about x / 2
    const double mid = 2.0 * singular_at_zero([&](double u) { return c * eta(x - u); }, e, x / 2);
    const double near = singular_at_zero([&](double v) { return c * eta(x + v); }, e, x);
    const double far = es.integrate([&](double v) { return eta(v) * eta(x + v); }, x,
                                    std::numeric_limits<double>::infinity());
    return mid + 2.0 * (near + far);
}

double p(double t, double x) { return std::exp(-x * x / (2.0 * t)) / std::sqrt(2.0 * std::numbers::pi * t); }

}  // namespace

TEST_CASE("pointwise kernels") {
    const double one[] = {1.0};
    const double four[] = {4.0};
    CHECK(gamma0(power_riesz(0.5, 0.5), 4.0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(gamma0(CovarianceSpec(FractionalTime{0.75}, DiracSpace{}), 1.0) == doctest::Approx(0.375).epsilon(1e-14));
    CHECK(gamma(power_riesz(0.5, 0.5), four) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(gamma(CovarianceSpec(DiracTime{}, FractionalProductSpace{{0.75}}), one) ==
          doctest::Approx(0.375).epsilon(1e-14));

    CHECK_THROWS_WITH_AS(gamma0(CovarianceSpec::white(), 1.0), doctest::Contains("dirac-requires-lattice-weight"),
                         Error);
    CHECK_THROWS_WITH_AS(gamma0(power_riesz(0.5, 0.5), 0.0), doctest::Contains("singular-at-zero"), Error);
}

TEST_CASE("riesz kernel scales homogeneously") {
    const auto spec = power_riesz(0.5, 0.7);
    const double x[] = {0.3};
    const double cx[] = {0.3 * 2.5};
    CHECK(gamma(spec, cx) == doctest::Approx(std::pow(2.5, -0.7) * gamma(spec, x)).epsilon(1e-13));
}

TEST_CASE("scaling exponent beta") {
    CHECK(beta_exponent(CovarianceSpec::white()) == doctest::Approx(1.0));
    CHECK(beta_exponent(power_riesz(0.5, 0.5)) == doctest::Approx(5.0 / 3.0));
    CHECK(CovarianceSpec::white().alpha0() == 1.0);
    CHECK(CovarianceSpec::white().alpha() == 1.0);
}

TEST_CASE("half kernels convolve back to the covariance") {
    const auto spec = power_riesz(0.5, 0.5);
    const auto& fk = spec.factorization();
    for (double x : {0.5, 1.0, 3.0}) {
        const double pt[] = {x};
        CHECK(self_convolution(fk.temporal, x) == doctest::Approx(gamma0(spec, x)).epsilon(1e-6));
        CHECK(self_convolution(fk.spatial.radial, x) == doctest::Approx(gamma(spec, pt)).epsilon(1e-6));
    }
    const auto frac = CovarianceSpec(FractionalTime{0.8}, FractionalProductSpace{{0.7}});
    const auto& ff = frac.factorization();
    CHECK(self_convolution(ff.temporal, 2.0) == doctest::Approx(gamma0(frac, 2.0)).epsilon(1e-6));
    CHECK(self_convolution(ff.spatial.factors[0], 0.7) ==
          doctest::Approx(0.7 * 0.4 * std::pow(0.7, 2.0 * 0.7 - 2.0)).epsilon(1e-6));
}

TEST_CASE("mollified dirac half kernel") {
    const HalfKernel dirac{};
    CHECK(smoothed_eta(dirac, 1.0, 0.0, 0.0) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)));
    CHECK(smoothed_eta(dirac, 1.0, 1.0, 1.0) ==
          doctest::Approx(std::exp(-0.5) / std::sqrt(2.0 * std::numbers::pi)));
}

TEST_CASE("mollified power law half kernel converges off the diagonal") {
    const auto& eta = power_riesz(0.5, 0.5).factorization().temporal;
    const double target = eta(1.0);
    const double err1 = std::abs(smoothed_eta(eta, 1e-1, 1.0, 0.0) / target - 1.0);
    const double err2 = std::abs(smoothed_eta(eta, 1e-2, 1.0, 0.0) / target - 1.0);
    CHECK(err2 < err1);
    CHECK(err2 < 0.05);
}

TEST_CASE("smoothed covariance is symmetric and bounded for white noise") {
    const auto spec = CovarianceSpec::white();
    for (double s : {0.1, 0.01}) {
        const SmoothingParams sp{s, s};
        const double x1[] = {0.2};
        const double x2[] = {-0.4};
        CHECK(q_smoothed(spec, sp, 0.3, 0.1, x1, x2) == doctest::Approx(q_smoothed(spec, sp, 0.1, 0.3, x2, x1)));
        const double diag = q_smoothed(spec, sp, 0.25, 0.25, x1, x1);
        CHECK(diag <= p(2.0 * s, 0.0) * p(2.0 * s, 0.0) * (1.0 + 1e-12));
        CHECK(diag > 0.0);
    }
}

TEST_CASE("pairwise functional") {
    const auto bundle = sample_bm(4, 1, 0.25, 64, std::vector<double>{0.0}, 11);
    const UnsmoothedPathKernel zero(CovarianceSpec::white().with_amplitude(0.0), 0.25, {64, 0.05});
    CHECK(q_pairwise_functional(zero, bundle) == 0.0);

    const UnsmoothedPathKernel kernel(power_riesz(0.5, 0.5), 0.25, {64, 0.05});
    double sum = 0.0;
    for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t k = j + 1; k < 4; ++k) sum += pair_integral(kernel, bundle.path(j).data, bundle.path(k).data);
    CHECK(q_pairwise_functional(kernel, bundle) == doctest::Approx(sum).epsilon(1e-14));
    CHECK(q_pairwise_functional(power_riesz(0.5, 0.5), bundle, 0.05) == doctest::Approx(sum).epsilon(1e-14));
}

TEST_CASE("frozen paths reproduce the power law double integral") {
    const double a0 = 0.5, t = 1.0, dx = 0.1;
    const auto spec = power_riesz(a0, 0.5);
    const double origin[] = {0.0};
    const double exact = 2.0 * std::pow(t, 2.0 - a0) / ((1.0 - a0) * (2.0 - a0)) * gamma_lattice(spec, origin, dx);
    auto rel_err = [&](std::size_t steps) {
        const UnsmoothedPathKernel kernel(spec, t, {steps, dx});
        const std::vector<double> frozen(steps + 1, 0.0);
        // Q2 of two paths counts the ordered double integral once.
        return std::abs(pair_integral(kernel, frozen.data(), frozen.data()) / exact - 1.0);
    };
    const double coarse = rel_err(256);
    const double fine = rel_err(4096);
    MESSAGE("relative error 256 steps " << coarse << ", 4096 steps " << fine);
    CHECK(fine < coarse);
    CHECK(fine < 0.02);
}
