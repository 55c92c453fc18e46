#include "shelab/gaussian_field.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "shelab/error.hpp"
#include "shelab/rng.hpp"

namespace shelab {

namespace {

constexpr double kMollifierReach = 7.5;

std::size_t checked_ratio(double num, double den, const char* what) {
    const double r = num / den;
    const double n = std::round(r);
    if (!(n >= 1.0) || std::abs(r - n) > 1e-9 * std::max(1.0, n)) {
        std::ostringstream os;
        os << what << " = " << r << " is not a positive integer";
        throw Error("invalid-lattice", os.str());
    }
    return static_cast<std::size_t>(n);
}

std::size_t pad_cells(double pad, double h) {
    if (pad <= 0.0) return 0;
    return static_cast<std::size_t>(std::ceil(pad / h - 1e-9));
}

// Multiply a row-major tensor with extents `dims` by m (rows x dims[axis]) along `axis`.
std::vector<double> mode_product(const std::vector<double>& in, std::vector<std::size_t>& dims, int axis,
                                 const Eigen::MatrixXd& m) {
    const std::size_t n_old = dims[axis];
    const std::size_t n_new = static_cast<std::size_t>(m.rows());
    if (static_cast<std::size_t>(m.cols()) != n_old) throw Error("internal", "mode_product extent mismatch");
    std::size_t outer = 1, inner = 1;
    for (int a = 0; a < axis; ++a) outer *= dims[a];
    for (std::size_t a = axis + 1; a < dims.size(); ++a) inner *= dims[a];
    std::vector<double> out(outer * n_new * inner, 0.0);
    for (std::size_t o = 0; o < outer; ++o) {
        using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        Eigen::Map<const RowMat> src(in.data() + o * n_old * inner, n_old, inner);
        Eigen::Map<RowMat> dst(out.data() + o * n_new * inner, n_new, inner);
        dst.noalias() = m * src;
    }
    dims[axis] = n_new;
    return out;
}

std::vector<double> axis_nodes(const LatticeSpec& lat) {
    std::vector<double> v(lat.space_nodes());
    for (std::size_t m = 0; m < v.size(); ++m) v[m] = lat.space_node(m);
    return v;
}

std::vector<double> time_nodes(const LatticeSpec& lat) {
    std::vector<double> v(lat.time_nodes());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = lat.time_node(k);
    return v;
}

double reach_for(const HalfKernel& h, double scale) {
    const double moll = kMollifierReach * std::sqrt(scale);
    if (h.dirac) return moll;
    // Power-law half kernels decay only through the taper exp(-scale u^2 / 2);
    // cut where it drops below 1e-6.
    return moll + std::sqrt(2.0 * std::log(1e6) / scale);
}

}  // namespace

// ---- LatticeSpec -------------------------------------------------------------

void LatticeSpec::validate() const {
    if (!(dt > 0.0) || !(T > 0.0) || !(dx > 0.0) || !(L > 0.0))
        throw Error("invalid-lattice", "dt, T, dx, L must be positive");
    if (dim < 1 || dim > 2) throw Error("invalid-lattice", "lattices support d in {1, 2}");
    if (pad_t < 0.0 || pad_x < 0.0) throw Error("invalid-lattice", "padding must be >= 0");
    checked_ratio(T, dt, "T/dt");
    checked_ratio(2.0 * L, dx, "2L/dx");
    if (base_size() > max_cells || core_size() > max_cells) {
        std::ostringstream os;
        os << "lattice needs " << base_size() << " base cells (budget " << max_cells
           << "); use a coarser lattice or larger smoothing scales";
        throw Error("memory-budget", os.str());
    }
}

std::size_t LatticeSpec::time_nodes() const { return checked_ratio(T, dt, "T/dt") + 1; }
std::size_t LatticeSpec::space_nodes() const { return checked_ratio(2.0 * L, dx, "2L/dx") + 1; }

std::size_t LatticeSpec::core_size() const {
    std::size_t n = time_nodes();
    for (int a = 0; a < dim; ++a) n *= space_nodes();
    return n;
}

std::size_t LatticeSpec::base_time_cells() const { return checked_ratio(T, dt, "T/dt") + 2 * pad_cells(pad_t, dt); }
std::size_t LatticeSpec::base_space_cells() const {
    return checked_ratio(2.0 * L, dx, "2L/dx") + 2 * pad_cells(pad_x, dx);
}

std::size_t LatticeSpec::base_size() const {
    std::size_t n = base_time_cells();
    for (int a = 0; a < dim; ++a) n *= base_space_cells();
    return n;
}

double LatticeSpec::cell_weight() const { return dt * std::pow(dx, dim); }

LatticeSpec LatticeSpec::desk_default(double T, double x_range, int dim) {
    LatticeSpec lat;
    lat.T = T;
    lat.dt = T / 64.0;
    lat.L = std::abs(x_range) + 6.0 * std::sqrt(T);
    lat.dx = 2.0 * lat.L / 128.0;
    lat.dim = dim;
    lat.validate();
    return lat;
}

LatticeSpec LatticeSpec::padded_for(const CovarianceSpec& spec, const SmoothingParams& sp) const {
    sp.validate();
    const auto& fk = spec.factorization();
    LatticeSpec out = *this;
    out.pad_t = static_cast<double>(pad_cells(reach_for(fk.temporal, sp.delta), dt)) * dt;
    double sx = 0.0;
    switch (fk.spatial.kind) {
        case SpatialHalfKernel::Kind::dirac:
            sx = reach_for(HalfKernel{}, sp.epsilon);
            break;
        case SpatialHalfKernel::Kind::radial:
            sx = reach_for(fk.spatial.radial, sp.epsilon);
            break;
        case SpatialHalfKernel::Kind::product:
            for (const auto& f : fk.spatial.factors) sx = std::max(sx, reach_for(f, sp.epsilon));
            break;
    }
    out.pad_x = static_cast<double>(pad_cells(sx, dx)) * dx;
    out.validate();
    return out;
}

bool LatticeSpec::same_grid(const LatticeSpec& o) const {
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b)); };
    return close(dt, o.dt) && close(T, o.T) && close(dx, o.dx) && close(L, o.L) && dim == o.dim &&
           close(pad_t, o.pad_t) && close(pad_x, o.pad_x);
}

// ---- interpolation ---------------------------------------------------------------

AxisStencil axis_stencil(const LatticeSpec& lat, double y) {
    AxisStencil s;
    const double u = (y + lat.L) / lat.dx;
    const double last = static_cast<double>(lat.space_nodes() - 1);
    if (!(u >= 0.0) || !(u <= last)) return s;  // outside the box: zero field
    auto m = static_cast<std::size_t>(std::floor(u));
    if (m >= lat.space_nodes() - 1) m = lat.space_nodes() - 2;
    const double frac = u - static_cast<double>(m);
    s.index[0] = m;
    s.index[1] = m + 1;
    s.weight[0] = 1.0 - frac;
    s.weight[1] = frac;
    return s;
}

double FieldSample::evaluate(std::size_t k, const double* y) const {
    if (kind != FieldKind::smoothed) throw Error("invalid-argument", "evaluate needs a smoothed field");
    const std::size_t nx = lattice.space_nodes();
    const std::size_t nt = lattice.time_nodes();
    if (k >= nt) throw Error("grid-mismatch", "time index beyond the field horizon");
    if (lattice.dim == 1) {
        const AxisStencil s = axis_stencil(lattice, y[0]);
        const double* row = values.data() + k * nx;
        return s.weight[0] * row[s.index[0]] + s.weight[1] * row[s.index[1]];
    }
    const AxisStencil s0 = axis_stencil(lattice, y[0]);
    const AxisStencil s1 = axis_stencil(lattice, y[1]);
    const double* slab = values.data() + k * nx * nx;
    double v = 0.0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) v += s0.weight[a] * s1.weight[b] * slab[s0.index[a] * nx + s1.index[b]];
    return v;
}

// ---- SmoothingOperator -------------------------------------------------------------

SmoothingOperator::SmoothingOperator(const CovarianceSpec& spec, const SmoothingParams& sp, const LatticeSpec& lattice)
    : spec_(spec), sp_(sp), lattice_(lattice) {
    sp_.validate();
    lattice_.validate();
    if (lattice_.dim != spec_.dim()) throw Error("grid-mismatch", "lattice dimension differs from the covariance");
    const auto& fk = spec_.factorization();
    if (fk.spatial.kind == SpatialHalfKernel::Kind::radial && fk.spatial.dim > 1)
        throw Error("unsupported", "lattice smoothing of non-separable radial kernels in d > 1");

    const std::size_t nt = lattice_.time_nodes();
    const std::size_t ntb = lattice_.base_time_cells();
    const std::size_t nx = lattice_.space_nodes();
    const std::size_t nxb = lattice_.base_space_cells();
    const double root_amp = std::sqrt(spec_.amplitude());

    at_.resize(static_cast<Eigen::Index>(nt), static_cast<Eigen::Index>(ntb));
    for (std::size_t k = 0; k < nt; ++k)
        for (std::size_t j = 0; j < ntb; ++j)
            at_(k, j) = root_amp == 0.0 ? 0.0
                                        : root_amp * smoothed_eta(fk.temporal, sp_.delta, lattice_.time_node(k),
                                                                  lattice_.base_time(j));

    for (int axis = 0; axis < lattice_.dim; ++axis) {
        HalfKernel h;
        if (fk.spatial.kind == SpatialHalfKernel::Kind::radial) h = fk.spatial.radial;
        if (fk.spatial.kind == SpatialHalfKernel::Kind::product) h = fk.spatial.factors[axis];
        Eigen::MatrixXd m(static_cast<Eigen::Index>(nx), static_cast<Eigen::Index>(nxb));
        for (std::size_t a = 0; a < nx; ++a)
            for (std::size_t j = 0; j < nxb; ++j)
                m(a, j) = smoothed_eta(h, sp_.epsilon, lattice_.space_node(a), lattice_.base_space(j));
        ax_.push_back(std::move(m));
    }

    ct_ = at_ * at_.transpose() * lattice_.dt;
    for (const auto& m : ax_) cx_.push_back(m * m.transpose() * lattice_.dx);
}

std::vector<double> SmoothingOperator::apply(std::span<const double> base) const {
    if (base.size() != lattice_.base_size()) throw Error("grid-mismatch", "base field size does not match the lattice");
    std::vector<std::size_t> dims{lattice_.base_time_cells()};
    for (int a = 0; a < lattice_.dim; ++a) dims.push_back(lattice_.base_space_cells());
    std::vector<double> cur(base.begin(), base.end());
    for (int a = lattice_.dim - 1; a >= 0; --a) cur = mode_product(cur, dims, a + 1, ax_[a]);
    cur = mode_product(cur, dims, 0, at_);
    const double w = lattice_.cell_weight();
    for (double& v : cur) v *= w;
    return cur;
}

double SmoothingOperator::space_covariance(const double* y1, const double* y2) const {
    double v = 1.0;
    for (int axis = 0; axis < lattice_.dim; ++axis) {
        const AxisStencil s1 = axis_stencil(lattice_, y1[axis]);
        const AxisStencil s2 = axis_stencil(lattice_, y2[axis]);
        const Eigen::MatrixXd& c = cx_[axis];
        double f = 0.0;
        for (int a = 0; a < 2; ++a) {
            if (s1.weight[a] == 0.0) continue;
            for (int b = 0; b < 2; ++b)
                f += s1.weight[a] * s2.weight[b] * c(static_cast<Eigen::Index>(s1.index[a]),
                                                     static_cast<Eigen::Index>(s2.index[b]));
        }
        v *= f;
        if (v == 0.0) break;
    }
    return v;
}

double SmoothingOperator::covariance(std::size_t k1, const double* y1, std::size_t k2, const double* y2) const {
    return ct_(static_cast<Eigen::Index>(k1), static_cast<Eigen::Index>(k2)) * space_covariance(y1, y2);
}

// ---- sampling ------------------------------------------------------------------------

FieldSample sample_white_base(const LatticeSpec& lattice, std::uint64_t seed) {
    lattice.validate();
    FieldSample f;
    f.lattice = lattice;
    f.kind = FieldKind::white_base;
    f.seed = seed;
    f.values.resize(lattice.base_size());
    NormalSource normals(seed);
    const double sd = 1.0 / std::sqrt(lattice.cell_weight());
    for (double& v : f.values) v = sd * normals();
    return f;
}

FieldSample smooth_field(const FieldSample& base, const std::shared_ptr<const SmoothingOperator>& op) {
    if (base.kind != FieldKind::white_base) throw Error("invalid-argument", "smooth_field needs a white base field");
    if (!op) throw Error("invalid-argument", "missing smoothing operator");
    if (!base.lattice.same_grid(op->lattice())) throw Error("grid-mismatch", "base lattice differs from operator lattice");
    FieldSample out;
    out.lattice = base.lattice;
    out.kind = FieldKind::smoothed;
    out.smoothing = op->smoothing();
    out.seed = base.seed;
    out.values = op->apply(base.values);
    out.model = op;
    return out;
}

FieldSample smooth_field(const FieldSample& base, const CovarianceSpec& spec, const SmoothingParams& sp) {
    spec.factorization();  // throws when missing
    return smooth_field(base, std::make_shared<const SmoothingOperator>(spec, sp, base.lattice));
}

// ---- KL -------------------------------------------------------------------------------------

Eigen::MatrixXd smoothed_white_matrix(double scale, const std::vector<double>& nodes) {
    const auto n = static_cast<Eigen::Index>(nodes.size());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) m(i, j) = m(j, i) = smoothed_white_factor(scale, nodes[i], nodes[j]);
    return m;
}

namespace {

void symmetric_eigen(const Eigen::MatrixXd& a, std::vector<double>& values, Eigen::MatrixXd& vectors) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    if (es.info() != Eigen::Success) throw Error("eigen-failure", "symmetric eigendecomposition failed");
    const Eigen::Index n = a.rows();
    values.resize(static_cast<std::size_t>(n));
    vectors.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double v = es.eigenvalues()(n - 1 - i);  // descending
        if (v < 0.0) {
            if (v < -1e-10) {
                std::ostringstream os;
                os << "eigenvalue " << v << " below the clipping threshold -1e-10";
                throw Error("not-positive-semidefinite", os.str());
            }
            v = 0.0;
        }
        values[static_cast<std::size_t>(i)] = v;
        vectors.col(i) = es.eigenvectors().col(n - 1 - i);
    }
}

}  // namespace

KLBasis kl_decompose_matrix(const Eigen::MatrixXd& cov, double weight) {
    if (cov.rows() != cov.cols()) throw Error("invalid-argument", "covariance must be square");
    if (!(weight > 0.0)) throw Error("invalid-argument", "cell weight must be positive");
    if (static_cast<double>(cov.rows()) * static_cast<double>(cov.rows()) > static_cast<double>(std::size_t{1} << 26))
        throw Error("memory-budget", "dense covariance too large; use a coarser lattice");
    if (!cov.isApprox(cov.transpose(), 1e-12)) throw Error("invalid-argument", "covariance must be symmetric");
    KLBasis b;
    b.weight_ = weight;
    Eigen::MatrixXd vectors;
    symmetric_eigen(weight * cov, b.eigenvalues_, vectors);
    b.vectors_.push_back(std::move(vectors));
    b.sizes_ = {b.eigenvalues_.size()};
    b.order_.resize(b.eigenvalues_.size());
    for (std::size_t k = 0; k < b.order_.size(); ++k) b.order_[k] = {k};
    b.rank_ = b.eigenvalues_.size();
    return b;
}

KLBasis kl_decompose(const CovarianceSpec& spec, const SmoothingParams& sp, const LatticeSpec& lattice) {
    sp.validate();
    lattice.validate();
    if (lattice.dim != spec.dim()) throw Error("grid-mismatch", "lattice dimension differs from the covariance");
    KLBasis b;
    b.weight_ = lattice.cell_weight();

    std::vector<std::vector<double>> values;
    {
        std::vector<double> v;
        Eigen::MatrixXd m;
        symmetric_eigen(lattice.dt * smoothed_white_matrix(sp.delta, time_nodes(lattice)), v, m);
        values.push_back(v);
        b.vectors_.push_back(m);
    }
    const Eigen::MatrixXd space = lattice.dx * smoothed_white_matrix(sp.epsilon, axis_nodes(lattice));
    for (int a = 0; a < lattice.dim; ++a) {
        std::vector<double> v;
        Eigen::MatrixXd m;
        symmetric_eigen(space, v, m);
        values.push_back(v);
        b.vectors_.push_back(m);
    }
    for (const auto& v : values) b.sizes_.push_back(v.size());

    const std::size_t total = lattice.core_size();
    std::vector<double> lambda(total);
    std::vector<std::vector<std::size_t>> idx(total);
    std::vector<std::size_t> cur(values.size(), 0);
    for (std::size_t n = 0; n < total; ++n) {
        double l = 1.0;
        for (std::size_t f = 0; f < values.size(); ++f) l *= values[f][cur[f]];
        lambda[n] = l;
        idx[n] = cur;
        for (std::size_t f = values.size(); f-- > 0;) {
            if (++cur[f] < values[f].size()) break;
            cur[f] = 0;
        }
    }
    std::vector<std::size_t> perm(total);
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t c) { return lambda[a] > lambda[c]; });
    b.eigenvalues_.resize(total);
    b.order_.resize(total);
    for (std::size_t n = 0; n < total; ++n) {
        b.eigenvalues_[n] = lambda[perm[n]];
        b.order_[n] = idx[perm[n]];
    }
    b.rank_ = total;
    return b;
}

void KLBasis::set_rank(std::size_t n) {
    if (n > size()) throw Error("invalid-argument", "rank exceeds the number of modes");
    rank_ = n;
}

std::vector<double> KLBasis::eigenvector(std::size_t k) const {
    if (k >= size()) throw Error("invalid-argument", "mode index out of range");
    std::vector<double> out{1.0};
    for (std::size_t f = 0; f < vectors_.size(); ++f) {
        const auto col = vectors_[f].col(static_cast<Eigen::Index>(order_[k][f]));
        std::vector<double> next(out.size() * static_cast<std::size_t>(col.size()));
        for (std::size_t i = 0; i < out.size(); ++i)
            for (Eigen::Index j = 0; j < col.size(); ++j)
                next[i * static_cast<std::size_t>(col.size()) + static_cast<std::size_t>(j)] = out[i] * col(j);
        out.swap(next);
    }
    const double s = 1.0 / std::sqrt(weight_);
    for (double& v : out) v *= s;
    return out;
}

std::vector<double> KLBasis::synthesize(std::span<const double> g) const {
    if (g.size() < rank_) throw Error("invalid-argument", "not enough coefficients for the truncation rank");
    // Coefficient tensor in the factor eigenbasis, then one mode product per factor.
    std::size_t total = 1;
    for (std::size_t s : sizes_) total *= s;
    std::vector<double> coeff(total, 0.0);
    for (std::size_t k = 0; k < rank_; ++k) {
        std::size_t flat = 0;
        for (std::size_t f = 0; f < sizes_.size(); ++f) flat = flat * sizes_[f] + order_[k][f];
        coeff[flat] = std::sqrt(eigenvalues_[k]) * g[k];
    }
    std::vector<std::size_t> dims = sizes_;
    for (std::size_t f = 0; f < vectors_.size(); ++f) coeff = mode_product(coeff, dims, static_cast<int>(f), vectors_[f]);
    const double s = 1.0 / std::sqrt(weight_);
    for (double& v : coeff) v *= s;
    return coeff;
}

// ---- distance and export ---------------------------------------------------------------------

double path_distance(const FieldSample& f, const FieldSample& g) {
    if (!f.lattice.same_grid(g.lattice) || f.kind != g.kind || f.values.size() != g.values.size())
        throw Error("grid-mismatch", "fields live on different lattices");
    double s = 0.0;
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        const double d = f.values[i] - g.values[i];
        s += d * d;
    }
    return std::sqrt(s * f.lattice.cell_weight());
}

namespace {
constexpr char kMagic[8] = {'S', 'H', 'L', 'F', 'I', 'E', 'L', 'D'};

template <class T>
void put(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw Error("io-error", "truncated field file");
    return v;
}
}  // namespace

void write_field_binary(const std::string& path, const FieldSample& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("io-error", "cannot open " + path);
    os.write(kMagic, 8);
    put<std::uint32_t>(os, 1);
    put<std::uint32_t>(os, f.kind == FieldKind::white_base ? 0u : 1u);
    put<std::int32_t>(os, f.lattice.dim);
    put<std::uint32_t>(os, 0);
    for (double v : {f.lattice.dt, f.lattice.T, f.lattice.dx, f.lattice.L, f.lattice.pad_t, f.lattice.pad_x,
                     f.smoothing.epsilon, f.smoothing.delta})
        put<double>(os, v);
    put<std::uint64_t>(os, f.seed);
    put<std::uint64_t>(os, f.values.size());
    os.write(reinterpret_cast<const char*>(f.values.data()),
             static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    if (!os) throw Error("io-error", "write failed for " + path);
}

FieldSample read_field_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("io-error", "cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0) throw Error("io-error", "not a field file: " + path);
    if (get<std::uint32_t>(is) != 1) throw Error("io-error", "unsupported field file version");
    FieldSample f;
    f.kind = get<std::uint32_t>(is) == 0 ? FieldKind::white_base : FieldKind::smoothed;
    f.lattice.dim = get<std::int32_t>(is);
    get<std::uint32_t>(is);
    f.lattice.dt = get<double>(is);
    f.lattice.T = get<double>(is);
    f.lattice.dx = get<double>(is);
    f.lattice.L = get<double>(is);
    f.lattice.pad_t = get<double>(is);
    f.lattice.pad_x = get<double>(is);
    f.smoothing.epsilon = get<double>(is);
    f.smoothing.delta = get<double>(is);
    f.seed = get<std::uint64_t>(is);
    const auto n = get<std::uint64_t>(is);
    f.values.resize(n);
    is.read(reinterpret_cast<char*>(f.values.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw Error("io-error", "truncated field payload");
    return f;
}

}  // namespace shelab
