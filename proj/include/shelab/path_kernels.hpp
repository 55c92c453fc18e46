#pragma once

#include <memory>
#include <vector>

#include "shelab/covariance.hpp"
#include "shelab/paths.hpp"

namespace shelab {

// Separable covariance between two points of paths that share a uniform time
// grid with `steps` intervals over [0, t]. temporal() already carries the
// amplitude and the path time reversal, so that
//   int int Q(t - s, t - r, a_s, b_r) ds dr ~= sum_i sum_l w_i w_l temporal(i, l) spatial(a_i, b_l).
class PathKernel {
public:
    virtual ~PathKernel() = default;

    double horizon() const { return t_; }
    std::size_t steps() const { return steps_; }
    int dim() const { return dim_; }
    const std::vector<double>& weights() const { return weights_; }

    // True when temporal(i, l) == 0 for i != l.
    virtual bool temporal_diagonal() const = 0;
    virtual double temporal(std::size_t i, std::size_t l) const = 0;
    virtual double spatial(const double* y1, const double* y2) const = 0;

    // True when the kernel is identically zero (zero-noise test kernel).
    virtual bool vanishes() const { return false; }

protected:
    PathKernel(double t, std::size_t steps, int dim);

    double t_;
    std::size_t steps_;
    int dim_;
    std::vector<double> weights_;
};

struct LatticeRegularization {
    std::size_t steps = 0;  // path time steps over [0, t]
    double dx = 0.0;        // spatial regularization scale
};

// Default regularization for a horizon t: 256 steps per unit time (at least 64)
// and the spatial spacing of the default field lattice, 12 sqrt(t) / 128.
LatticeRegularization default_regularization(double t);

// gamma0 * gamma with the lattice conventions: a dirac temporal factor is the
// discrete delta with respect to the trapezoid weights; dirac spatial factors
// and singular lags use the central-cell rules of gamma0_lattice / gamma_lattice.
class UnsmoothedPathKernel final : public PathKernel {
public:
    UnsmoothedPathKernel(const CovarianceSpec& spec, double t, LatticeRegularization reg);

    bool temporal_diagonal() const override { return dirac_time_; }
    double temporal(std::size_t i, std::size_t l) const override;
    double spatial(const double* y1, const double* y2) const override;
    bool vanishes() const override { return spec_.amplitude() == 0.0; }

    const CovarianceSpec& spec() const { return spec_; }
    double dx() const { return dx_; }

private:
    CovarianceSpec spec_;
    double dx_;
    bool dirac_time_;
    std::vector<double> lag_table_;  // temporal value by |i - l| (non-dirac)
};

// sum_i sum_l w_i w_l temporal(i, l) spatial(a_i, b_l)
double pair_integral(const PathKernel& kernel, const double* a, const double* b);

// Q^(n) = sum over unordered pairs {j, k} of pair_integral(paths j, k).
double q_pairwise_functional(const PathKernel& kernel, const std::vector<const double*>& paths);
double q_pairwise_functional(const PathKernel& kernel, const PathBundle& bundle);

// Convenience: unsmoothed kernel on the bundle's own grid.
double q_pairwise_functional(const CovarianceSpec& spec, const PathBundle& bundle, double dx);

}  // namespace shelab
