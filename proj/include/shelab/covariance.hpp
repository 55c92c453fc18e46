#pragma once

#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace shelab {

// ---- temporal kernels -------------------------------------------------------

struct DiracTime {};

// c0 |t|^-a0 <= gamma0(t) <= C0 |t|^-a0; the evaluator returns the upper form.
struct PowerLawTime {
    double alpha0 = 0.5;
    double c0 = 1.0;
    double C0 = 1.0;
};

// H0 (2 H0 - 1) |t|^(2 H0 - 2)
struct FractionalTime {
    double hurst = 0.75;
};

using TemporalKernel = std::variant<DiracTime, PowerLawTime, FractionalTime>;

// ---- spatial kernels --------------------------------------------------------

struct DiracSpace {};

struct RieszSpace {
    double alpha = 0.5;
    double coefficient = 1.0;
    int dim = 1;
};

struct FractionalProductSpace {
    std::vector<double> hurst;  // one entry per coordinate
};

using SpatialKernel = std::variant<DiracSpace, RieszSpace, FractionalProductSpace>;

// ---- factorization ----------------------------------------------------------

// One-dimensional (or radial) half kernel: a Dirac mass, or c |u|^-a.
struct HalfKernel {
    bool dirac = true;
    double exponent = 0.0;
    double coefficient = 0.0;

    double operator()(double u) const;
};

struct SpatialHalfKernel {
    enum class Kind { dirac, radial, product };
    Kind kind = Kind::dirac;
    int dim = 1;
    HalfKernel radial;                 // kind == radial, evaluated at |x|
    std::vector<HalfKernel> factors;   // kind == product, one per coordinate
};

struct FactorizedKernel {
    HalfKernel temporal;
    SpatialHalfKernel spatial;
};

struct SmoothingParams {
    double epsilon = 0.01;  // spatial mollification scale
    double delta = 0.01;    // temporal mollification scale
    void validate() const;
};

// ---- the covariance specification --------------------------------------------

class CovarianceSpec {
public:
    // amplitude multiplies gamma0 * gamma; 0 gives the zero-noise test kernel.
    CovarianceSpec(TemporalKernel temporal, SpatialKernel spatial, double amplitude = 1.0);

    static CovarianceSpec white();  // space-time white noise, d = 1

    const TemporalKernel& temporal() const { return temporal_; }
    const SpatialKernel& spatial() const { return spatial_; }
    double amplitude() const { return amplitude_; }
    int dim() const { return dim_; }
    double alpha0() const;  // effective temporal exponent (1 for dirac)
    double alpha() const;   // effective spatial exponent (1 for dirac)
    double beta() const;    // (4 - 2 alpha0 - alpha) / (2 - alpha)
    bool temporal_dirac() const;
    bool spatial_dirac() const;

    bool has_factorization() const { return factorization_.has_value(); }
    const FactorizedKernel& factorization() const;  // throws "missing-factorization"

    CovarianceSpec with_amplitude(double a) const;

private:
    TemporalKernel temporal_;
    SpatialKernel spatial_;
    double amplitude_ = 1.0;
    int dim_ = 1;
    std::optional<FactorizedKernel> factorization_;
};

double beta_exponent(const CovarianceSpec& spec);

// Pointwise kernels (no amplitude). Dirac kernels throw
// "dirac-requires-lattice-weight"; lag 0 of singular kernels throws "singular-at-zero".
double gamma0(const CovarianceSpec& spec, double t);
double gamma(const CovarianceSpec& spec, std::span<const double> x);

// Lattice-regularized kernels: dirac -> 1/spacing inside the central cell,
// singular power laws evaluated at spacing/2 inside the central cell.
double gamma0_lattice(const CovarianceSpec& spec, double t, double dt);
double gamma_lattice(const CovarianceSpec& spec, std::span<const double> x, double dx);

// Constant K_d(a) with (|.|^-(d+a)/2 * |.|^-(d+a)/2)(x) = K_d(a) |x|^-a.
double riesz_convolution_constant(int d, double a);

// Mollified half kernels.
double smoothed_eta(const HalfKernel& eta, double scale, double t, double r);
// Spatial analogue; product kernels multiply coordinates; radial needs d = 1.
double smoothed_eta_space(const SpatialHalfKernel& eta, double scale,
                          std::span<const double> x, std::span<const double> z);

// int eta_s(u1, r) eta_s(u2, r) dr for a one-dimensional half kernel.
double smoothed_factor_1d(const HalfKernel& eta, double scale, double u1, double u2);

double smoothed_time_factor(const CovarianceSpec& spec, double delta, double t1, double t2);
double smoothed_space_factor(const CovarianceSpec& spec, double epsilon,
                             std::span<const double> x1, std::span<const double> x2);

// Q_{eps,delta}(t1, t2, x1, x2), including the amplitude.
double q_smoothed(const CovarianceSpec& spec, const SmoothingParams& sp, double t1, double t2,
                  std::span<const double> x1, std::span<const double> x2);

// Smoothed base white covariance (Gaussian mollifier with taper), one coordinate:
// exp(-s (u1^2 + u2^2) / 2) p_{2s}(u1 - u2).
double smoothed_white_factor(double scale, double u1, double u2);

}  // namespace shelab
