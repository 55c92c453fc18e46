#include "shelab/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "shelab/error.hpp"
#include "shelab/quadrature.hpp"

namespace shelab {

namespace {

constexpr double kQuadTol = 1e-8;
constexpr double kInnerTol = 1e-11;  // inner integrals of nested quadratures
// p_s(u) drops below 1e-12 of its peak beyond this many sqrt(s).
constexpr double kMollifierReach = 7.5;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double gaussian_density(double var, double u) {
    return std::exp(-u * u / (2.0 * var)) / std::sqrt(2.0 * M_PI * var);
}

std::optional<HalfKernel> power_half(int d, double a, double coeff) {
    if (!(a > 0.0) || !(a < d)) return std::nullopt;
    HalfKernel h;
    h.dirac = false;
    h.exponent = 0.5 * (d + a);
    h.coefficient = std::sqrt(coeff / riesz_convolution_constant(d, a));
    return h;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw Error("invalid-spec", what);
}

double spatial_lattice_1d(double c, double a, double u, double dx) {
    const double r = std::max(std::abs(u), 0.5 * dx);
    return c * std::pow(r, -a);
}

}  // namespace

double HalfKernel::operator()(double u) const {
    if (dirac) throw Error("dirac-requires-lattice-weight", "half kernel is a Dirac mass");
    if (u == 0.0) throw Error("singular-at-zero", "half kernel evaluated at 0");
    return coefficient * std::pow(std::abs(u), -exponent);
}

void SmoothingParams::validate() const {
    if (!(epsilon > 0.0) || !(delta > 0.0))
        throw Error("invalid-smoothing", "epsilon and delta must be positive");
}

double riesz_convolution_constant(int d, double a) {
    const double dd = d;
    return std::pow(M_PI, dd / 2.0) * std::pow(std::tgamma((dd - a) / 4.0), 2) * std::tgamma(a / 2.0) /
           (std::pow(std::tgamma((dd + a) / 4.0), 2) * std::tgamma((dd - a) / 2.0));
}

CovarianceSpec::CovarianceSpec(TemporalKernel temporal, SpatialKernel spatial, double amplitude)
    : temporal_(std::move(temporal)), spatial_(std::move(spatial)), amplitude_(amplitude) {
    require(amplitude_ >= 0.0 && std::isfinite(amplitude_), "amplitude must be finite and >= 0");

    std::optional<HalfKernel> eta0;
    std::visit(overloaded{
                   [&](const DiracTime&) { eta0 = HalfKernel{}; },
                   [&](const PowerLawTime& k) {
                       require(k.alpha0 >= 0.0 && k.alpha0 < 1.0, "power_law alpha0 must lie in [0,1)");
                       require(k.c0 > 0.0 && k.C0 >= k.c0, "power_law needs 0 < c0 <= C0");
                       eta0 = power_half(1, k.alpha0, k.C0);
                   },
                   [&](const FractionalTime& k) {
                       require(k.hurst > 0.5 && k.hurst < 1.0, "fractional H0 must lie in (1/2,1)");
                       eta0 = power_half(1, 2.0 - 2.0 * k.hurst, k.hurst * (2.0 * k.hurst - 1.0));
                   }},
               temporal_);

    std::optional<SpatialHalfKernel> eta;
    std::visit(overloaded{
                   [&](const DiracSpace&) {
                       dim_ = 1;
                       eta = SpatialHalfKernel{};
                   },
                   [&](const RieszSpace& k) {
                       require(k.alpha > 0.0 && k.alpha < 2.0, "riesz alpha must lie in (0,2)");
                       require(k.coefficient > 0.0, "riesz coefficient must be positive");
                       require(k.dim >= 1, "dimension must be >= 1");
                       dim_ = k.dim;
                       if (auto h = power_half(k.dim, k.alpha, k.coefficient)) {
                           SpatialHalfKernel s;
                           s.kind = SpatialHalfKernel::Kind::radial;
                           s.dim = k.dim;
                           s.radial = *h;
                           eta = s;
                       }
                   },
                   [&](const FractionalProductSpace& k) {
                       require(!k.hurst.empty(), "fractional_product needs at least one Hurst index");
                       double sum = 0.0;
                       SpatialHalfKernel s;
                       s.kind = SpatialHalfKernel::Kind::product;
                       s.dim = static_cast<int>(k.hurst.size());
                       for (double h : k.hurst) {
                           require(h > 0.5 && h < 1.0, "fractional_product H_i must lie in (1/2,1)");
                           sum += h;
                           s.factors.push_back(*power_half(1, 2.0 - 2.0 * h, h * (2.0 * h - 1.0)));
                       }
                       dim_ = s.dim;
                       require(sum > dim_ - 1.0, "fractional_product needs sum H_i > d - 1");
                       eta = s;
                   }},
               spatial_);

    require(alpha() < 2.0, "effective alpha must be < 2");
    const double b = beta();
    require(std::isfinite(b) && b > 0.0, "beta exponent must be finite and positive");
    if (eta0 && eta) factorization_ = FactorizedKernel{*eta0, *eta};
}

CovarianceSpec CovarianceSpec::white() { return CovarianceSpec(DiracTime{}, DiracSpace{}); }

CovarianceSpec CovarianceSpec::with_amplitude(double a) const {
    CovarianceSpec copy = *this;
    if (!(a >= 0.0)) throw Error("invalid-spec", "amplitude must be >= 0");
    copy.amplitude_ = a;
    return copy;
}

double CovarianceSpec::alpha0() const {
    return std::visit(overloaded{[](const DiracTime&) { return 1.0; },
                                 [](const PowerLawTime& k) { return k.alpha0; },
                                 [](const FractionalTime& k) { return 2.0 - 2.0 * k.hurst; }},
                      temporal_);
}

double CovarianceSpec::alpha() const {
    return std::visit(overloaded{[](const DiracSpace&) { return 1.0; },
                                 [](const RieszSpace& k) { return k.alpha; },
                                 [](const FractionalProductSpace& k) {
                                     double s = 0.0;
                                     for (double h : k.hurst) s += h;
                                     return 2.0 * static_cast<double>(k.hurst.size()) - 2.0 * s;
                                 }},
                      spatial_);
}

double CovarianceSpec::beta() const { return (4.0 - 2.0 * alpha0() - alpha()) / (2.0 - alpha()); }

bool CovarianceSpec::temporal_dirac() const { return std::holds_alternative<DiracTime>(temporal_); }
bool CovarianceSpec::spatial_dirac() const { return std::holds_alternative<DiracSpace>(spatial_); }

const FactorizedKernel& CovarianceSpec::factorization() const {
    if (!factorization_)
        throw Error("missing-factorization",
                    "no closed-form square root for this kernel (power laws need exponent < dimension)");
    return *factorization_;
}

double beta_exponent(const CovarianceSpec& spec) { return spec.beta(); }

double gamma0(const CovarianceSpec& spec, double t) {
    return std::visit(
        overloaded{[](const DiracTime&) -> double {
                       throw Error("dirac-requires-lattice-weight", "dirac temporal kernel has no pointwise value");
                   },
                   [t](const PowerLawTime& k) -> double {
                       if (t == 0.0) throw Error("singular-at-zero", "power_law kernel at lag 0");
                       return k.C0 * std::pow(std::abs(t), -k.alpha0);
                   },
                   [t](const FractionalTime& k) -> double {
                       if (t == 0.0) throw Error("singular-at-zero", "fractional kernel at lag 0");
                       return k.hurst * (2.0 * k.hurst - 1.0) * std::pow(std::abs(t), 2.0 * k.hurst - 2.0);
                   }},
        spec.temporal());
}

double gamma(const CovarianceSpec& spec, std::span<const double> x) {
    if (static_cast<int>(x.size()) != spec.dim()) throw Error("invalid-argument", "lag dimension mismatch");
    return std::visit(
        overloaded{[](const DiracSpace&) -> double {
                       throw Error("dirac-requires-lattice-weight", "dirac spatial kernel has no pointwise value");
                   },
                   [x](const RieszSpace& k) -> double {
                       double r2 = 0.0;
                       for (double v : x) r2 += v * v;
                       if (r2 == 0.0) throw Error("singular-at-zero", "riesz kernel at lag 0");
                       return k.coefficient * std::pow(r2, -0.5 * k.alpha);
                   },
                   [x](const FractionalProductSpace& k) -> double {
                       double v = 1.0;
                       for (std::size_t i = 0; i < x.size(); ++i) {
                           if (x[i] == 0.0) throw Error("singular-at-zero", "fractional_product kernel at lag 0");
                           const double h = k.hurst[i];
                           v *= h * (2.0 * h - 1.0) * std::pow(std::abs(x[i]), 2.0 * h - 2.0);
                       }
                       return v;
                   }},
        spec.spatial());
}

double gamma0_lattice(const CovarianceSpec& spec, double t, double dt) {
    if (std::abs(t) >= 0.5 * dt) {
        if (spec.temporal_dirac()) return 0.0;
        return gamma0(spec, t);
    }
    if (spec.temporal_dirac()) return 1.0 / dt;
    return gamma0(spec, 0.5 * dt);
}

double gamma_lattice(const CovarianceSpec& spec, std::span<const double> x, double dx) {
    if (static_cast<int>(x.size()) != spec.dim()) throw Error("invalid-argument", "lag dimension mismatch");
    return std::visit(overloaded{[&](const DiracSpace&) -> double {
                                     return std::abs(x[0]) < 0.5 * dx ? 1.0 / dx : 0.0;
                                 },
                                 [&](const RieszSpace& k) -> double {
                                     double r2 = 0.0;
                                     for (double v : x) r2 += v * v;
                                     return spatial_lattice_1d(k.coefficient, k.alpha, std::sqrt(r2), dx);
                                 },
                                 [&](const FractionalProductSpace& k) -> double {
                                     double v = 1.0;
                                     for (std::size_t i = 0; i < x.size(); ++i) {
                                         const double h = k.hurst[i];
                                         v *= spatial_lattice_1d(h * (2.0 * h - 1.0), 2.0 - 2.0 * h, x[i], dx);
                                     }
                                     return v;
                                 }},
                      spec.spatial());
}

double smoothed_white_factor(double scale, double u1, double u2) {
    return std::exp(-0.5 * scale * (u1 * u1 + u2 * u2)) * gaussian_density(2.0 * scale, u1 - u2);
}

double smoothed_eta(const HalfKernel& eta, double scale, double t, double r) {
    if (!(scale > 0.0)) throw Error("invalid-smoothing", "mollifier scale must be positive");
    if (eta.dirac) return gaussian_density(scale, t - r) * std::exp(-0.5 * scale * t * t);
    const double reach = kMollifierReach * std::sqrt(scale);
    const double lo = r - reach;
    const double hi = r + reach;
    // Integrate in the gap g = |t - u| so the singularity sits at g = 0, where
    // tanh-sinh nodes keep full relative precision.
    auto side = [&](double sign, double g_max) {
        if (!(g_max > 0.0)) return 0.0;
        auto integrand = [&](double g) {
            if (g == 0.0) return 0.0;
            const double u = t + sign * g;
            return eta.coefficient * std::pow(g, -eta.exponent) * gaussian_density(scale, u - r) *
                   std::exp(-0.5 * scale * u * u);
        };
        return integrate_endpoint_singular(integrand, 0.0, g_max, kInnerTol);
    };
    if (t > lo && t < hi) return side(-1.0, t - lo) + side(1.0, hi - t);
    // t outside the window: the integrand is smooth on [lo, hi]
    auto integrand = [&](double u) {
        return eta.coefficient * std::pow(std::abs(t - u), -eta.exponent) * gaussian_density(scale, u - r) *
               std::exp(-0.5 * scale * u * u);
    };
    return integrate_smooth(integrand, lo, hi, kInnerTol);
}

double smoothed_eta_space(const SpatialHalfKernel& eta, double scale, std::span<const double> x,
                          std::span<const double> z) {
    if (x.size() != z.size() || static_cast<int>(x.size()) != eta.dim)
        throw Error("invalid-argument", "dimension mismatch in smoothed_eta_space");
    switch (eta.kind) {
        case SpatialHalfKernel::Kind::dirac:
            return smoothed_eta(HalfKernel{}, scale, x[0], z[0]);
        case SpatialHalfKernel::Kind::radial:
            if (eta.dim != 1) throw Error("unsupported", "radial half kernel smoothing implemented for d = 1 only");
            return smoothed_eta(eta.radial, scale, x[0], z[0]);
        case SpatialHalfKernel::Kind::product: {
            double v = 1.0;
            for (std::size_t i = 0; i < x.size(); ++i) v *= smoothed_eta(eta.factors[i], scale, x[i], z[i]);
            return v;
        }
    }
    return 0.0;
}

double smoothed_factor_1d(const HalfKernel& eta, double scale, double u1, double u2) {
    if (!(scale > 0.0)) throw Error("invalid-smoothing", "mollifier scale must be positive");
    if (eta.dirac) return smoothed_white_factor(scale, u1, u2);
    // Beyond |r| = sqrt(60/scale) the taper factor exp(-scale r^2) is below e^-60.
    const double a = std::min(u1, u2);
    const double b = std::max(u1, u2);
    const double reach = kMollifierReach * std::sqrt(scale) + std::sqrt(60.0 / scale);
    const double lo = std::min(a, 0.0) - reach;
    const double hi = std::max(b, 0.0) + reach;
    auto integrand = [&](double r) {
        return smoothed_eta(eta, scale, u1, r) * smoothed_eta(eta, scale, u2, r);
    };
    return integrate_smooth_pieces(integrand, {lo, a, b, hi}, kQuadTol);
}

double smoothed_time_factor(const CovarianceSpec& spec, double delta, double t1, double t2) {
    return smoothed_factor_1d(spec.factorization().temporal, delta, t1, t2);
}

double smoothed_space_factor(const CovarianceSpec& spec, double epsilon, std::span<const double> x1,
                             std::span<const double> x2) {
    const auto& eta = spec.factorization().spatial;
    if (static_cast<int>(x1.size()) != eta.dim || x1.size() != x2.size())
        throw Error("invalid-argument", "dimension mismatch in smoothed_space_factor");
    switch (eta.kind) {
        case SpatialHalfKernel::Kind::dirac:
            return smoothed_white_factor(epsilon, x1[0], x2[0]);
        case SpatialHalfKernel::Kind::radial:
            if (eta.dim != 1)
                throw Error("unsupported", "smoothed radial spatial factor is implemented for d = 1 only");
            return smoothed_factor_1d(eta.radial, epsilon, x1[0], x2[0]);
        case SpatialHalfKernel::Kind::product: {
            double v = 1.0;
            for (std::size_t i = 0; i < x1.size(); ++i)
                v *= smoothed_factor_1d(eta.factors[i], epsilon, x1[i], x2[i]);
            return v;
        }
    }
    return 0.0;
}

double q_smoothed(const CovarianceSpec& spec, const SmoothingParams& sp, double t1, double t2,
                  std::span<const double> x1, std::span<const double> x2) {
    sp.validate();
    if (spec.amplitude() == 0.0) return 0.0;
    return spec.amplitude() * smoothed_time_factor(spec, sp.delta, t1, t2) *
           smoothed_space_factor(spec, sp.epsilon, x1, x2);
}

}  // namespace shelab
