#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shelab/covariance.hpp"
#include "shelab/path_kernels.hpp"
#include "shelab/paths.hpp"
#include "shelab/stats.hpp"

namespace shelab {

enum class ChaosMethod { bridge_rep, simplex_quadrature, exact };

struct ChaosTerm {
    std::size_t order = 0;
    double variance = 0.0;  // n! ||f_n||^2
    double se = 0.0;
    ChaosMethod method = ChaosMethod::bridge_rep;
};

// f_n(s_1, x_1, ..., s_n, x_n; t, x). points holds n * d coordinates.
double fn_kernel(const InitialDatum& u0, double t, std::span<const double> x, std::span<const double> times,
                 std::span<const double> points);

// n! ||f_n||^2 = E[u0(B1_t) u0(B2_t) (Q2)^n] / n!, with each Brownian path built
// from a Gaussian endpoint and an independent Brownian bridge, and Q2 the
// pair integral of the lattice-regularized kernel (same discretization as
// moment_k). n = 0 returns (p_t * u0(x))^2 exactly.
ChaosTerm chaos_variance_bridge(std::size_t n, const CovarianceSpec& spec, double t, std::span<const double> x,
                                const InitialDatum& u0, std::size_t n_mc, std::uint64_t seed,
                                LatticeRegularization reg = {});

// Deterministic evaluation of the same discretized quantity for n in {1, 2},
// space-time white noise and constant u0, via Gaussian window probabilities.
ChaosTerm chaos_variance_simplex(std::size_t n, const CovarianceSpec& spec, double t, const InitialDatum& u0,
                                 LatticeRegularization reg = {});

// E int_0^1 gamma(sqrt(2) B_{0,1}(s)) ds over Brownian bridges (trapezoid in s,
// lattice regularization dx for the spatial kernel).
Estimate bridge_functional_constant(const CovarianceSpec& spec, std::size_t n_mc, std::uint64_t seed,
                                    std::size_t steps, double dx);

// K_n = c^n / n! for a bridge constant c.
double k_n_bound(std::size_t n, double bridge_constant);

// C (p_t * |u0|(x))^2 t^((2 - a0 - a/2) n) (n!)^(a/2 - 1)
double chaos_variance_bound(std::size_t n, const CovarianceSpec& spec, double t, std::span<const double> x,
                            const InitialDatum& u0, double C);

// C fitted so that the bound equals the n = 1 estimate.
double fit_chaos_constant(const ChaosTerm& first, const CovarianceSpec& spec, double t, std::span<const double> x,
                          const InitialDatum& u0);

struct ChaosSecondMoment {
    Estimate estimate;
    std::vector<ChaosTerm> terms;  // orders 0..N
    double fitted_constant = 0.0;
    double tail_bound = 0.0;
    std::vector<std::string> warnings;
};

ChaosSecondMoment chaos_second_moment(const CovarianceSpec& spec, double t, std::span<const double> x,
                                      const InitialDatum& u0, std::size_t n_trunc, std::size_t n_mc,
                                      std::uint64_t seed, LatticeRegularization reg = {},
                                      double tail_tolerance = 1e-3);

struct MomentBoundExponents {
    double p_power = 0.0;          // (4 - a) / (2 - a)
    double t_power = 0.0;          // beta
    double intensity_power = 0.0;  // 4 / (2 - a)
};
MomentBoundExponents moment_bound_exponents(const CovarianceSpec& spec);

// (C1 p_t * |u0|(x))^p exp(C2 lambda^(4/(2-a)) t^beta p^((4-a)/(2-a))), p >= 1.
double moment_bound_upper(double p, double intensity, const CovarianceSpec& spec, double t,
                          std::span<const double> x, const InitialDatum& u0, double C1, double C2);
// Same form with the lower constants, p > 1.
double moment_bound_lower(double p, double intensity, const CovarianceSpec& spec, double t,
                          std::span<const double> x, const InitialDatum& u0, double C1, double C2);

}  // namespace shelab
