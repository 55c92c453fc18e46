#pragma once

#include <functional>
#include <vector>

namespace shelab {

using Integrand = std::function<double(double)>;

// Adaptive Gauss-Kronrod (31 points) on [a, b]. Throws "quadrature-failure"
// with the achieved error when the relative target is not met.
double integrate_smooth(const Integrand& f, double a, double b, double rel_tol = 1e-8);

// Sum of adaptive Gauss-Kronrod integrals over consecutive cuts; the relative
// target applies to the total, so a negligible piece may be less accurate.
double integrate_smooth_pieces(const Integrand& f, const std::vector<double>& cuts, double rel_tol = 1e-8);

// Tanh-sinh on [a, b]; tolerates integrable singularities at the endpoints.
double integrate_endpoint_singular(const Integrand& f, double a, double b, double rel_tol = 1e-8);
// Tanh-sinh over consecutive cuts, with the relative target applied to the total.
double integrate_endpoint_singular_pieces(const Integrand& f, const std::vector<double>& cuts, double rel_tol = 1e-8);

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Gauss-Hermite rule for weight exp(-z^2) on the real line (Golub-Welsch).
QuadratureRule gauss_hermite(int m);

// Gauss-Legendre rule on [-1, 1] (Golub-Welsch).
QuadratureRule gauss_legendre(int m);

}  // namespace shelab
