#include "shelab/paths.hpp"

#include <cmath>
#include <sstream>

#include "shelab/error.hpp"
#include "shelab/quadrature.hpp"

namespace shelab {

void PathView::at(double s, double* out) const {
    if (s < 0.0 || s > t) throw Error("invalid-argument", "path evaluated outside [0, t]");
    const double u = s / step();
    auto i = static_cast<std::size_t>(std::floor(u));
    if (i >= steps) i = steps - 1;
    const double frac = u - static_cast<double>(i);
    const double* a = node(i);
    const double* b = node(i + 1);
    for (int k = 0; k < dim; ++k) out[k] = a[k] * (1.0 - frac) + b[k] * frac;
}

PathBundle::PathBundle(Kind kind, std::size_t n, int dim, double t, std::size_t steps, std::vector<double> start,
                       std::uint64_t seed)
    : kind_(kind), n_(n), dim_(dim), t_(t), steps_(steps), start_(std::move(start)), seed_(seed) {
    if (steps_ < 2) throw Error("invalid-argument", "paths need at least 2 steps");
    if (dim_ < 1) throw Error("invalid-argument", "path dimension must be >= 1");
    if (!(t_ > 0.0)) throw Error("invalid-argument", "path horizon must be positive");
    if (static_cast<int>(start_.size()) != dim_) throw Error("invalid-argument", "start point dimension mismatch");
    data_.assign(n_ * (steps_ + 1) * static_cast<std::size_t>(dim_), 0.0);
}

PathView PathBundle::path(std::size_t p) const {
    if (p >= n_) throw Error("invalid-argument", "path index out of range");
    return PathView{data_.data() + p * (steps_ + 1) * static_cast<std::size_t>(dim_), steps_, dim_, t_};
}

void PathBundle::check_increment_variance() const {
    const double ds = t_ / static_cast<double>(steps_);
    const double expected = kind_ == Kind::brownian ? ds : ds * (1.0 - ds);
    double sum = 0.0;
    std::size_t m = 0;
    for (std::size_t p = 0; p < n_; ++p) {
        const PathView v = path(p);
        for (std::size_t i = 0; i < steps_; ++i)
            for (int k = 0; k < dim_; ++k) {
                const double inc = v.node(i + 1)[k] - v.node(i)[k];
                sum += inc * inc;
                ++m;
            }
    }
    if (m == 0) return;
    const double ratio = sum / (static_cast<double>(m) * expected);
    const double se = std::sqrt(2.0 / static_cast<double>(m));
    if (std::abs(ratio - 1.0) > 5.0 * se) {
        std::ostringstream os;
        os << "pooled increment variance ratio " << ratio << " deviates by more than 5 SE (" << se << ")";
        throw Error("path-variance-check", os.str());
    }
}

void fill_brownian(NormalSource& normals, double t, std::size_t steps, int d, const double* start, double* out) {
    const double sd = std::sqrt(t / static_cast<double>(steps));
    for (int k = 0; k < d; ++k) out[k] = start[k];
    for (std::size_t i = 1; i <= steps; ++i) {
        double* cur = out + i * static_cast<std::size_t>(d);
        const double* prev = cur - d;
        for (int k = 0; k < d; ++k) cur[k] = prev[k] + sd * normals();
    }
}

void fill_bridge(NormalSource& normals, std::size_t steps, int d, double* out) {
    const double zero[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    if (d > 8) throw Error("invalid-argument", "bridge dimension above 8");
    fill_brownian(normals, 1.0, steps, d, zero, out);
    const double* end = out + steps * static_cast<std::size_t>(d);
    for (std::size_t i = 0; i <= steps; ++i) {
        const double s = static_cast<double>(i) / static_cast<double>(steps);
        double* cur = out + i * static_cast<std::size_t>(d);
        for (int k = 0; k < d; ++k) cur[k] -= s * end[k];
    }
    // end is now exactly zero up to rounding of s = 1; pin it.
    for (int k = 0; k < d; ++k) out[steps * static_cast<std::size_t>(d) + k] = 0.0;
}

PathBundle sample_bm(std::size_t n, int d, double t, std::size_t steps, std::span<const double> x,
                     std::uint64_t seed) {
    PathBundle bundle(PathBundle::Kind::brownian, n, d, t, steps, std::vector<double>(x.begin(), x.end()), seed);
    NormalSource normals(seed);
    const std::size_t stride = (steps + 1) * static_cast<std::size_t>(d);
    for (std::size_t p = 0; p < n; ++p)
        fill_brownian(normals, t, steps, d, bundle.start_.data(), bundle.data_.data() + p * stride);
    bundle.check_increment_variance();
    return bundle;
}

PathBundle sample_bridge(std::size_t n, int d, std::size_t steps, std::uint64_t seed) {
    PathBundle bundle(PathBundle::Kind::bridge, n, d, 1.0, steps, std::vector<double>(d, 0.0), seed);
    NormalSource normals(seed);
    const std::size_t stride = (steps + 1) * static_cast<std::size_t>(d);
    for (std::size_t p = 0; p < n; ++p) fill_bridge(normals, steps, d, bundle.data_.data() + p * stride);
    bundle.check_increment_variance();
    return bundle;
}

std::vector<double> trapezoid_weights(double t, std::size_t steps) {
    const double h = t / static_cast<double>(steps);
    std::vector<double> w(steps + 1, h);
    w.front() = w.back() = 0.5 * h;
    return w;
}

double heat_kernel(double t, std::span<const double> x) {
    if (!(t > 0.0)) throw Error("invalid-argument", "heat kernel needs t > 0");
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    const double d = static_cast<double>(x.size());
    return std::pow(2.0 * M_PI * t, -0.5 * d) * std::exp(-r2 / (2.0 * t));
}

InitialDatum InitialDatum::constant(double c) {
    if (!(c > 0.0) || !std::isfinite(c)) throw Error("invalid-initial-datum", "constant must be positive and finite");
    InitialDatum u;
    u.constant_ = true;
    u.value_ = c;
    u.lower_ = u.upper_ = c;
    u.name_ = "constant";
    return u;
}

InitialDatum InitialDatum::function(Function f, double lower, double upper, int dim, std::string name) {
    if (!f) throw Error("invalid-initial-datum", "empty function");
    if (dim < 1 || dim > 3) throw Error("invalid-initial-datum", "function data supported for d in {1,2,3}");
    if (!(lower <= upper) || !std::isfinite(lower) || !std::isfinite(upper))
        throw Error("invalid-initial-datum", "declared bounds must be finite and ordered");
    InitialDatum u;
    u.constant_ = false;
    u.f_ = std::move(f);
    u.lower_ = lower;
    u.upper_ = upper;
    u.dim_ = dim;
    u.name_ = std::move(name);
    // Probe grid on [-10, 10]^dim.
    const int per_axis = dim == 1 ? 401 : (dim == 2 ? 81 : 21);
    std::vector<int> idx(dim, 0);
    std::vector<double> y(dim);
    while (true) {
        for (int k = 0; k < dim; ++k) y[k] = -10.0 + 20.0 * idx[k] / (per_axis - 1);
        const double v = u.f_(y);
        if (!(v >= lower - 1e-12) || !(v <= upper + 1e-12)) {
            std::ostringstream os;
            os << "value " << v << " outside declared bounds [" << lower << ", " << upper << "]";
            throw Error("invalid-initial-datum", os.str());
        }
        int k = 0;
        while (k < dim && ++idx[k] == per_axis) idx[k++] = 0;
        if (k == dim) break;
    }
    return u;
}

InitialDatum InitialDatum::gaussian_bump(double amplitude, double variance, int dim) {
    if (!(amplitude > 0.0) || !(variance > 0.0)) throw Error("invalid-initial-datum", "bump needs positive parameters");
    auto u = function(
        [amplitude, variance](std::span<const double> y) {
            double r2 = 0.0;
            for (double v : y) r2 += v * v;
            return amplitude * std::exp(-r2 / (2.0 * variance));
        },
        0.0, amplitude, dim, "gaussian_bump");
    u.amplitude_ = amplitude;
    u.variance_ = variance;
    return u;
}

double InitialDatum::operator()(std::span<const double> y) const {
    if (constant_) return value_;
    if (static_cast<int>(y.size()) != dim_) throw Error("invalid-argument", "initial datum dimension mismatch");
    return f_(y);
}

namespace {

double gauss_hermite_convolve(const InitialDatum& u0, double t, std::span<const double> x, int m, bool absolute) {
    const QuadratureRule rule = gauss_hermite(m);
    const int d = static_cast<int>(x.size());
    const double scale = std::sqrt(2.0 * t);
    std::vector<int> idx(d, 0);
    std::vector<double> y(d);
    double total = 0.0;
    while (true) {
        double w = 1.0;
        for (int k = 0; k < d; ++k) {
            y[k] = x[k] + scale * rule.nodes[idx[k]];
            w *= rule.weights[idx[k]];
        }
        const double v = u0(y);
        total += w * (absolute ? std::abs(v) : v);
        int k = 0;
        while (k < d && ++idx[k] == m) idx[k++] = 0;
        if (k == d) break;
    }
    return total * std::pow(M_PI, -0.5 * d);
}

double convolve(const InitialDatum& u0, double t, std::span<const double> x, bool absolute) {
    if (!(t > 0.0)) throw Error("invalid-argument", "heat_convolve needs t > 0");
    if (u0.is_constant()) return absolute ? std::abs(u0.lower()) : u0.lower();
    if (static_cast<int>(x.size()) != u0.dim()) throw Error("invalid-argument", "point dimension mismatch");
    const int m = x.size() == 1 ? 96 : (x.size() == 2 ? 48 : 24);
    const double coarse = gauss_hermite_convolve(u0, t, x, m / 2, absolute);
    const double fine = gauss_hermite_convolve(u0, t, x, m, absolute);
    const double scale = std::max(std::abs(u0.upper()), std::abs(u0.lower()));
    if (!std::isfinite(fine) || std::abs(fine - coarse) > 1e-8 * scale + 1e-10 * std::abs(fine)) {
        std::ostringstream os;
        os << "Gauss-Hermite orders " << m / 2 << " and " << m << " disagree: " << coarse << " vs " << fine;
        throw Error("quadrature-failure", os.str());
    }
    return fine;
}

}  // namespace

double heat_convolve(const InitialDatum& u0, double t, std::span<const double> x) {
    return convolve(u0, t, x, false);
}

double heat_convolve_abs(const InitialDatum& u0, double t, std::span<const double> x) {
    return convolve(u0, t, x, true);
}

}  // namespace shelab
