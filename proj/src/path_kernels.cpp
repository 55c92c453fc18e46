#include "shelab/path_kernels.hpp"

#include <cmath>

#include "shelab/error.hpp"

namespace shelab {

PathKernel::PathKernel(double t, std::size_t steps, int dim)
    : t_(t), steps_(steps), dim_(dim), weights_(trapezoid_weights(t, steps)) {
    if (!(t > 0.0)) throw Error("invalid-argument", "path kernel horizon must be positive");
    if (steps < 2) throw Error("invalid-argument", "path kernel needs at least 2 steps");
    if (dim < 1 || dim > 8) throw Error("invalid-argument", "path kernel dimension must lie in [1, 8]");
}

LatticeRegularization default_regularization(double t) {
    if (!(t > 0.0)) throw Error("invalid-argument", "horizon must be positive");
    LatticeRegularization reg;
    reg.steps = std::max<std::size_t>(64, static_cast<std::size_t>(std::ceil(256.0 * t - 1e-9)));
    reg.dx = 12.0 * std::sqrt(t) / 128.0;
    return reg;
}

UnsmoothedPathKernel::UnsmoothedPathKernel(const CovarianceSpec& spec, double t, LatticeRegularization reg)
    : PathKernel(t, reg.steps, spec.dim()), spec_(spec), dx_(reg.dx), dirac_time_(spec.temporal_dirac()) {
    if (!(dx_ > 0.0)) throw Error("invalid-argument", "spatial regularization must be positive");
    if (!dirac_time_) {
        const double dt = t / static_cast<double>(steps_);
        lag_table_.resize(steps_ + 1);
        lag_table_[0] = spec_.amplitude() * gamma0(spec_, 0.5 * dt);
        for (std::size_t k = 1; k <= steps_; ++k)
            lag_table_[k] = spec_.amplitude() * gamma0(spec_, static_cast<double>(k) * dt);
    }
}

double UnsmoothedPathKernel::temporal(std::size_t i, std::size_t l) const {
    if (dirac_time_) return i == l ? spec_.amplitude() / weights_[i] : 0.0;
    return lag_table_[i > l ? i - l : l - i];
}

double UnsmoothedPathKernel::spatial(const double* y1, const double* y2) const {
    double lag[8];
    for (int k = 0; k < dim_; ++k) lag[k] = y1[k] - y2[k];
    return gamma_lattice(spec_, std::span<const double>(lag, dim_), dx_);
}

double pair_integral(const PathKernel& kernel, const double* a, const double* b) {
    if (kernel.vanishes()) return 0.0;
    const std::size_t n = kernel.steps() + 1;
    const int d = kernel.dim();
    const auto& w = kernel.weights();
    double total = 0.0;
    if (kernel.temporal_diagonal()) {
        for (std::size_t i = 0; i < n; ++i)
            total += w[i] * w[i] * kernel.temporal(i, i) * kernel.spatial(a + i * d, b + i * d);
        return total;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t l = 0; l < n; ++l) row += w[l] * kernel.temporal(i, l) * kernel.spatial(a + i * d, b + l * d);
        total += w[i] * row;
    }
    return total;
}

double q_pairwise_functional(const PathKernel& kernel, const std::vector<const double*>& paths) {
    double total = 0.0;
    for (std::size_t j = 0; j < paths.size(); ++j)
        for (std::size_t k = j + 1; k < paths.size(); ++k) total += pair_integral(kernel, paths[j], paths[k]);
    return total;
}

double q_pairwise_functional(const PathKernel& kernel, const PathBundle& bundle) {
    if (bundle.steps() != kernel.steps() || std::abs(bundle.horizon() - kernel.horizon()) > 1e-12 * kernel.horizon() ||
        bundle.dim() != kernel.dim())
        throw Error("grid-mismatch", "path bundle grid does not match the kernel grid");
    std::vector<const double*> ptrs;
    for (std::size_t p = 0; p < bundle.size(); ++p) ptrs.push_back(bundle.path(p).data);
    return q_pairwise_functional(kernel, ptrs);
}

double q_pairwise_functional(const CovarianceSpec& spec, const PathBundle& bundle, double dx) {
    UnsmoothedPathKernel kernel(spec, bundle.horizon(), LatticeRegularization{bundle.steps(), dx});
    return q_pairwise_functional(kernel, bundle);
}

}  // namespace shelab
