#include "shelab/malliavin.hpp"

#include <cmath>
#include <sstream>

#include "shelab/error.hpp"
#include "shelab/monte_carlo.hpp"

namespace shelab {

namespace {

void warn_if_noisy(ZEstimate& z) {
    if (z.estimate.se > 0.5 * std::abs(z.estimate.value))
        z.warnings.push_back("variance-blowup: SE exceeds 50% of the estimate");
}

// Draws `count` Brownian paths from x into a thread-local buffer and hands the
// integrand the path pointers and the product of u0 at the endpoints.
template <class Integrand>
ZEstimate path_mc(std::size_t count, double t, std::span<const double> x, const CovarianceSpec& spec,
                  const InitialDatum& u0, std::size_t n_mc, std::uint64_t seed, const MomentOptions& opt,
                  Integrand&& integrand) {
    if (static_cast<int>(x.size()) != spec.dim()) throw Error("invalid-argument", "point dimension mismatch");
    const auto kernel = make_path_kernel(spec, t, opt);
    const std::size_t n = kernel->steps();
    const int d = spec.dim();
    const std::size_t stride = (n + 1) * static_cast<std::size_t>(d);
    ZEstimate z;
    z.estimate = monte_carlo(n_mc, seed, [&](NormalSource& g) {
        thread_local std::vector<double> buf;
        buf.resize(count * stride);
        const double* p[4] = {nullptr, nullptr, nullptr, nullptr};
        double weight = 1.0;
        for (std::size_t j = 0; j < count; ++j) {
            fill_brownian(g, t, n, d, x.data(), buf.data() + j * stride);
            p[j] = buf.data() + j * stride;
            weight *= u0(p[j] + n * d, d);
        }
        return weight * integrand(*kernel, p);
    });
    warn_if_noisy(z);
    return z;
}

}  // namespace

ZEstimate z_first_moment(double t, std::span<const double> x, const CovarianceSpec& spec, const InitialDatum& u0,
                         std::size_t n_mc, std::uint64_t seed, const MomentOptions& opt) {
    return path_mc(2, t, x, spec, u0, n_mc, seed, opt, [](const PathKernel& k, const double* const* p) {
        const double q = pair_integral(k, p[0], p[1]);
        return q * std::exp(q);
    });
}

namespace {

struct FourPathPairs {
    double q12, q34, q13, total;
};

FourPathPairs four_pairs(const PathKernel& k, const double* const* p) {
    FourPathPairs f;
    f.q12 = pair_integral(k, p[0], p[1]);
    f.q34 = pair_integral(k, p[2], p[3]);
    f.q13 = pair_integral(k, p[0], p[2]);
    f.total = f.q12 + f.q34 + f.q13 + pair_integral(k, p[0], p[3]) + pair_integral(k, p[1], p[2]) +
              pair_integral(k, p[1], p[3]);
    return f;
}

}  // namespace

ZEstimate z_second_moment(double t, std::span<const double> x, const CovarianceSpec& spec, const InitialDatum& u0,
                          std::size_t n_mc, std::uint64_t seed, const MomentOptions& opt) {
    return path_mc(4, t, x, spec, u0, n_mc, seed, opt, [](const PathKernel& k, const double* const* p) {
        const FourPathPairs f = four_pairs(k, p);
        return f.q12 * f.q34 * std::exp(f.total);
    });
}

ZEstimate tilde_i(double t, std::span<const double> x, const CovarianceSpec& spec, const InitialDatum& u0,
                  std::size_t n_mc, std::uint64_t seed, const MomentOptions& opt, bool swap_pairs) {
    return path_mc(4, t, x, spec, u0, n_mc, seed, opt, [swap_pairs](const PathKernel& k, const double* const* p) {
        const double* r[4] = {p[0], p[1], p[2], p[3]};
        if (swap_pairs) {
            r[0] = p[2];
            r[1] = p[3];
            r[2] = p[0];
            r[3] = p[1];
        }
        const FourPathPairs f = four_pairs(k, r);
        return 4.0 * f.q12 * f.q34 * f.q13 * std::exp(f.total);
    });
}

ConditionedEstimate z_conditioned(double t, std::span<const double> x, const FieldSample& field,
                                  const CovarianceSpec& spec, const SmoothingParams& sp, const InitialDatum& u0,
                                  std::size_t n_pairs, std::uint64_t seed, const FkOptions& opt) {
    if (field.kind != FieldKind::smoothed || !field.model)
        throw Error("invalid-argument", "z_conditioned needs a smoothed field");
    if (field.smoothing.epsilon != sp.epsilon || field.smoothing.delta != sp.delta ||
        field.model->spec().amplitude() != spec.amplitude())
        throw Error("invalid-argument", "field was generated for a different covariance or smoothing");
    if (n_pairs == 0) throw Error("invalid-argument", "n_pairs must be positive");
    const std::size_t n = field_steps_for(field.lattice, t);
    const int d = field.lattice.dim;
    if (static_cast<int>(x.size()) != d) throw Error("invalid-argument", "point dimension differs from the field");
    NormalSource normals(seed);
    const std::size_t stride = (n + 1) * static_cast<std::size_t>(d);
    std::vector<double> buf(2 * stride);
    RunningStats stats;
    double max_v = -INFINITY;
    for (std::size_t p = 0; p < n_pairs; ++p) {
        fill_brownian(normals, t, n, d, x.data(), buf.data());
        fill_brownian(normals, t, n, d, x.data(), buf.data() + stride);
        const PathView a{buf.data(), n, d, t};
        const PathView b{buf.data() + stride, n, d, t};
        const double v = v_functional(a, field, opt.intensity) + v_functional(b, field, opt.intensity);
        max_v = std::max(max_v, v);
        if (v > opt.overflow_v) {
            std::ostringstream os;
            os << "exponent V reached " << v << "; reduce t or the noise intensity";
            throw Error("overflow", os.str());
        }
        const double q = opt.intensity * opt.intensity * field_pair_covariance(a, b, *field.model);
        stats.add(u0(a.node(n), d) * u0(b.node(n), d) * q * std::exp(v));
    }
    ConditionedEstimate out;
    out.value = stats.mean();
    out.se = stats.standard_error();
    out.n_paths = n_pairs;
    out.field_seed = field.seed;
    out.path_seed = seed;
    out.max_v = max_v;
    return out;
}

Ensemble generate_z_ensemble(double t, std::span<const double> x, const CovarianceSpec& spec,
                             const SmoothingParams& sp, const InitialDatum& u0, std::size_t n_fields,
                             std::size_t n_pairs, std::uint64_t seed, const FkOptions& opt,
                             const LatticeSpec* lattice, int threads) {
    if (n_fields < 2) throw Error("invalid-argument", "an ensemble needs at least 2 fields");
    double xr = 0.0;
    for (double v : x) xr = std::max(xr, std::abs(v));
    const LatticeSpec base = lattice ? *lattice : LatticeSpec::desk_default(t, xr, spec.dim());
    const LatticeSpec lat = base.padded_for(spec, sp);
    auto model = std::make_shared<const SmoothingOperator>(spec, sp, lat);
    Ensemble e;
    e.t = t;
    e.x.assign(x.begin(), x.end());
    e.smoothing = sp;
    e.n_paths = n_pairs;
    e.seed = seed;
    e.estimator = "malliavin_z_conditioned";
    e.samples.resize(n_fields);
    parallel_for(n_fields, threads, [&](std::size_t i) {
        const FieldSample field = smooth_field(sample_white_base(lat, derive_seed(seed, "field", i)), model);
        e.samples[i] = z_conditioned(t, x, field, spec, sp, u0, n_pairs, derive_seed(seed, "paths", i), opt);
    });
    return e;
}

LambdaB lambda_b_point(const Estimate& ez, const Estimate& ez2, const Estimate& itilde) {
    if (!(ez.value > 3.0 * ez.se)) {
        std::ostringstream os;
        os << "E Z = " << ez.value << " is not above 3 SE (" << ez.se << ")";
        throw Error("insufficient-precision", os.str());
    }
    if (!(ez2.value > 0.0)) throw Error("insufficient-precision", "E Z^2 estimate is not positive");
    LambdaB out;
    out.lambda = 32.0 * itilde.value * ez2.value / std::pow(ez.value, 4);
    out.b = ez.value * ez.value / (8.0 * ez2.value);
    return out;
}

MalliavinStats malliavin_stats(double t, std::span<const double> x, const CovarianceSpec& spec,
                               const InitialDatum& u0, std::size_t n_mc, std::uint64_t seed,
                               const MomentOptions& opt) {
    MalliavinStats s;
    s.t = t;
    s.x.assign(x.begin(), x.end());
    s.ez = z_first_moment(t, x, spec, u0, n_mc, derive_seed(seed, "ez"), opt).estimate;
    s.ez2 = z_second_moment(t, x, spec, u0, n_mc, derive_seed(seed, "ez2"), opt).estimate;
    s.itilde = tilde_i(t, x, spec, u0, n_mc, derive_seed(seed, "itilde"), opt).estimate;
    const LambdaB lb = lambda_b_point(s.ez, s.ez2, s.itilde);
    s.lambda = lb.lambda;
    s.b = lb.b;
    return s;
}

double du_negative_moment_bound(double p, double lambda, double b, double ez) {
    if (p < 0.0 || !(lambda > 0.0) || !(b > 0.0) || !(ez > 0.0))
        throw Error("invalid-argument", "negative-moment bound needs p >= 0 and positive lambda, b, E Z");
    return std::pow(2.0, p) * std::exp(2.0 * p * std::sqrt(lambda * std::log(2.0 / b))) *
           (1.0 + 4.0 * std::sqrt(M_PI * p * p * lambda) * std::exp(p * p * lambda)) * std::pow(ez, -p);
}

double du_kth_moment_bound(std::size_t k, double p, double t, std::span<const double> x,
                           const CovarianceSpec& spec, const InitialDatum& u0, const DuConstants& c) {
    const double a0 = spec.alpha0();
    const double a = spec.alpha();
    const double kk = static_cast<double>(k);
    return c.C_kp * std::pow(heat_convolve_abs(u0, t, x), p) * std::pow(t, (4.0 - 2.0 * a0 - a) / 4.0 * p * kk) *
           std::exp(c.c * std::pow(p, (4.0 - a) / (2.0 - a)) * std::pow(t, spec.beta()));
}

LambdaB du_lambda_b_envelope(double t, const CovarianceSpec& spec, const LambdaBEnvelopeConstants& c) {
    const double tb = std::pow(t, spec.beta());
    LambdaB out;
    out.lambda = c.C1 * std::pow(t, 2.0 - spec.alpha0() - spec.alpha() / 2.0) * std::exp(c.c1 * tb);
    out.b = c.C2 * std::exp(-c.c2 * tb);
    return out;
}

}  // namespace shelab
