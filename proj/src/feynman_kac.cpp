#include "shelab/feynman_kac.hpp"

#include <cmath>
#include <sstream>

#include "shelab/error.hpp"
#include "shelab/monte_carlo.hpp"

namespace shelab {

std::size_t field_steps_for(const LatticeSpec& lattice, double t) {
    if (!(t > 0.0) || t > lattice.T * (1.0 + 1e-12))
        throw Error("grid-mismatch", "horizon t must lie in (0, T] of the field lattice");
    const double r = t / lattice.dt;
    const double n = std::round(r);
    if (std::abs(r - n) > 1e-9 * std::max(1.0, n) || n < 2.0)
        throw Error("grid-mismatch", "horizon t must be a multiple (>= 2) of the lattice time step");
    return static_cast<std::size_t>(n);
}

FieldPathKernel::FieldPathKernel(std::shared_ptr<const SmoothingOperator> model, double t)
    : PathKernel(t, field_steps_for(model->lattice(), t), model->lattice().dim), model_(std::move(model)) {}

double FieldPathKernel::temporal(std::size_t i, std::size_t l) const {
    return model_->time_covariance(steps_ - i, steps_ - l);
}

double FieldPathKernel::spatial(const double* y1, const double* y2) const { return model_->space_covariance(y1, y2); }

// ---- V functional -----------------------------------------------------------------

namespace {

void check_path_against_field(const PathView& path, const FieldSample& field) {
    if (field.kind != FieldKind::smoothed || !field.model)
        throw Error("invalid-argument", "V functional needs a smoothed field with its operator");
    if (path.dim != field.lattice.dim) throw Error("grid-mismatch", "path and field dimensions differ");
    if (field_steps_for(field.lattice, path.t) != path.steps)
        throw Error("grid-mismatch", "path time grid differs from the field time lattice");
}

}  // namespace

double field_path_integral(const PathView& path, const FieldSample& field) {
    check_path_against_field(path, field);
    const std::size_t n = path.steps;
    const double h = path.step();
    double total = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
        const double w = (i == 0 || i == n) ? 0.5 * h : h;
        total += w * field.evaluate(n - i, path.node(i));
    }
    return total;
}

double field_pair_covariance(const PathView& a, const PathView& b, const SmoothingOperator& model) {
    if (a.steps != b.steps || a.dim != b.dim) throw Error("grid-mismatch", "paths use different grids");
    const std::size_t n = a.steps;
    const double h = a.step();
    if (model.spec().amplitude() == 0.0) return 0.0;
    auto weight = [&](std::size_t i) { return (i == 0 || i == n) ? 0.5 * h : h; };
    const bool same = a.data == b.data;
    double total = 0.0;
    if (a.dim == 1) {
        thread_local std::vector<AxisStencil> sa, sb;
        sa.resize(n + 1);
        sb.resize(n + 1);
        for (std::size_t i = 0; i <= n; ++i) {
            sa[i] = axis_stencil(model.lattice(), a.node(i)[0]);
            sb[i] = same ? sa[i] : axis_stencil(model.lattice(), b.node(i)[0]);
        }
        for (std::size_t i = 0; i <= n; ++i) {
            const AxisStencil& p = sa[i];
            if (p.weight[0] == 0.0 && p.weight[1] == 0.0) continue;
            const std::size_t lmax = same ? i : n;
            double row = 0.0;
            for (std::size_t l = 0; l <= lmax; ++l) {
                const AxisStencil& q = sb[l];
                double s = 0.0;
                for (int u = 0; u < 2; ++u)
                    for (int v = 0; v < 2; ++v)
                        s += p.weight[u] * q.weight[v] * model.space_covariance(0, p.index[u], q.index[v]);
                const double term = weight(l) * model.time_covariance(n - i, n - l) * s;
                row += (same && l != i) ? 2.0 * term : term;
            }
            total += weight(i) * row;
        }
        return total;
    }
    for (std::size_t i = 0; i <= n; ++i)
        for (std::size_t l = 0; l <= n; ++l)
            total += weight(i) * weight(l) * model.time_covariance(n - i, n - l) *
                     model.space_covariance(a.node(i), b.node(l));
    return total;
}

double field_path_variance(const PathView& path, const SmoothingOperator& model) {
    return field_pair_covariance(path, path, model);
}

double v_functional(const PathView& path, const FieldSample& field, double intensity) {
    const double first = field_path_integral(path, field);
    return intensity * first - 0.5 * intensity * intensity * field_path_variance(path, *field.model);
}

// ---- conditioned solution ------------------------------------------------------------

namespace {

void check_field_matches(const FieldSample& field, const CovarianceSpec& spec, const SmoothingParams& sp) {
    if (field.kind != FieldKind::smoothed || !field.model)
        throw Error("invalid-argument", "conditioned estimators need a smoothed field");
    if (field.model->spec().dim() != spec.dim() || field.model->spec().amplitude() != spec.amplitude())
        throw Error("invalid-argument", "field was generated for a different covariance");
    if (field.smoothing.epsilon != sp.epsilon || field.smoothing.delta != sp.delta)
        throw Error("invalid-argument", "field was generated for different smoothing parameters");
}

[[noreturn]] void overflow(double v) {
    std::ostringstream os;
    os << "exponent V reached " << v << "; reduce t or the noise intensity";
    throw Error("overflow", os.str());
}

template <class Visit>
void for_each_theta(double t, std::span<const double> x, const FieldSample& field, const InitialDatum& u0,
                    std::size_t n_paths, std::uint64_t seed, const FkOptions& opt, Visit&& visit) {
    const std::size_t n = field_steps_for(field.lattice, t);
    const int d = field.lattice.dim;
    if (static_cast<int>(x.size()) != d) throw Error("invalid-argument", "point dimension differs from the field");
    NormalSource normals(seed);
    std::vector<double> buf((n + 1) * static_cast<std::size_t>(d));
    for (std::size_t p = 0; p < n_paths; ++p) {
        fill_brownian(normals, t, n, d, x.data(), buf.data());
        const PathView path{buf.data(), n, d, t};
        const double v = v_functional(path, field, opt.intensity);
        if (v > opt.overflow_v) overflow(v);
        visit(path, v, u0(path.node(n), d) * std::exp(v));
    }
}

}  // namespace

ConditionedEstimate u_conditioned(double t, std::span<const double> x, const FieldSample& field,
                                  const CovarianceSpec& spec, const SmoothingParams& sp, const InitialDatum& u0,
                                  std::size_t n_paths, std::uint64_t seed, const FkOptions& opt) {
    check_field_matches(field, spec, sp);
    if (n_paths == 0) throw Error("invalid-argument", "n_paths must be positive");
    RunningStats stats;
    double max_v = -INFINITY;
    for_each_theta(t, x, field, u0, n_paths, seed, opt, [&](const PathView&, double v, double theta) {
        stats.add(theta);
        max_v = std::max(max_v, v);
    });
    ConditionedEstimate out;
    out.value = stats.mean();
    out.se = stats.standard_error();
    out.n_paths = n_paths;
    out.field_seed = field.seed;
    out.path_seed = seed;
    out.max_v = max_v;
    return out;
}

double weighted_expectation(const std::function<double(const PathView&)>& F, const FieldSample& field,
                            const CovarianceSpec& spec, const SmoothingParams& sp, double t,
                            std::span<const double> x, const InitialDatum& u0, std::size_t n_paths,
                            std::uint64_t seed, const FkOptions& opt) {
    check_field_matches(field, spec, sp);
    double num = 0.0, den = 0.0;
    for_each_theta(t, x, field, u0, n_paths, seed, opt, [&](const PathView& path, double, double theta) {
        num += F(path) * theta;
        den += theta;
    });
    if (!(den > 0.0)) throw Error("degenerate-weights", "all Feynman-Kac weights vanished");
    return num / den;
}

// ---- ensembles ---------------------------------------------------------------------------

std::vector<double> Ensemble::values() const {
    std::vector<double> v;
    v.reserve(samples.size());
    for (const auto& s : samples) v.push_back(s.value);
    return v;
}

Estimate Ensemble::mean() const { return mean_estimate(values()); }

Estimate Ensemble::raw_moment(double p) const {
    RunningStats s;
    for (const auto& c : samples) s.add(std::pow(c.value, p));
    return s.estimate();
}

Ensemble generate_ensemble(double t, std::span<const double> x, const CovarianceSpec& spec,
                           const SmoothingParams& sp, const InitialDatum& u0, std::size_t n_fields,
                           std::size_t n_paths, std::uint64_t seed, const FkOptions& opt,
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
    e.n_paths = n_paths;
    e.seed = seed;
    e.estimator = "feynman_kac_conditioned";
    e.samples.resize(n_fields);
    parallel_for(n_fields, threads, [&](std::size_t i) {
        const FieldSample white = sample_white_base(lat, derive_seed(seed, "field", i));
        const FieldSample field = smooth_field(white, model);
        e.samples[i] = u_conditioned(t, x, field, spec, sp, u0, n_paths, derive_seed(seed, "paths", i), opt);
    });
    return e;
}

// ---- moments -------------------------------------------------------------------------------

std::unique_ptr<PathKernel> make_path_kernel(const CovarianceSpec& spec, double t, const MomentOptions& opt) {
    if (opt.mode == MomentMode::smoothed_lattice) {
        if (!opt.model) throw Error("invalid-argument", "smoothed moment mode needs a smoothing operator");
        return std::make_unique<FieldPathKernel>(opt.model, t);
    }
    LatticeRegularization reg = opt.regularization;
    const LatticeRegularization def = default_regularization(t);
    if (reg.steps == 0) reg.steps = def.steps;
    if (reg.dx == 0.0) reg.dx = def.dx;
    return std::make_unique<UnsmoothedPathKernel>(spec, t, reg);
}

MomentResult moment_k(std::size_t k, double t, std::span<const double> x, const CovarianceSpec& spec,
                      const InitialDatum& u0, std::size_t n_mc, std::uint64_t seed, double intensity,
                      const MomentOptions& opt) {
    if (k < 1) throw Error("invalid-argument", "moment order must be >= 1");
    if (k > opt.max_k) throw Error("invalid-argument", "moment order above the configured guard");
    if (static_cast<int>(x.size()) != spec.dim()) throw Error("invalid-argument", "point dimension mismatch");
    const auto kernel = make_path_kernel(spec, t, opt);
    const std::size_t n = kernel->steps();
    const int d = spec.dim();
    const std::size_t stride = (n + 1) * static_cast<std::size_t>(d);
    const double lam2 = intensity * intensity;

    MomentResult res;
    res.estimate = monte_carlo(n_mc, seed, [&](NormalSource& g) {
        thread_local std::vector<double> buf;
        buf.resize(k * stride);
        std::vector<const double*> ptrs(k);
        double weight = 1.0;
        for (std::size_t j = 0; j < k; ++j) {
            fill_brownian(g, t, n, d, x.data(), buf.data() + j * stride);
            ptrs[j] = buf.data() + j * stride;
            weight *= u0(ptrs[j] + n * d, d);
        }
        return weight * std::exp(lam2 * q_pairwise_functional(*kernel, ptrs));
    });
    if (res.estimate.se > 0.5 * std::abs(res.estimate.value))
        res.warnings.push_back("variance-blowup: SE exceeds 50% of the estimate");
    return res;
}

}  // namespace shelab
