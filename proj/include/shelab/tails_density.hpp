#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shelab/covariance.hpp"
#include "shelab/feynman_kac.hpp"
#include "shelab/paths.hpp"
#include "shelab/stats.hpp"

namespace shelab {

// Moment envelope  kt1^p e^{kt2 p^rho} <= E X^p <= k1^p e^{k2 p^rho}.
struct MomentEnvelope {
    double kappa1 = 1.0;
    double kappa1_tilde = 1.0;
    double kappa2 = 1.0;
    double kappa2_tilde = 1.0;
    double rho = 3.0;

    void validate() const;  // throws "invalid-envelope"
    double upper_threshold() const;  // k1 e^{rho k2}
    double lower_threshold() const;  // kt1 e^{kt2} / 2
};

// (4 - a) / (2 - a)
double default_rho(const CovarianceSpec& spec);

// Fits from raw moments m_p, p = 1..P: log k1 = log m_1, k2 = max_p (log m_p - p log k1) / p^rho,
// kt1 = k1, kt2 = min_{p >= 2} of the same ratio. Ratios are floored at 1e-12.
MomentEnvelope fit_moment_envelope(std::span<const double> raw_moments, double rho);

// exp{-rho^(rho/(1-rho)) (rho-1) k2^(1/(1-rho)) log(a/k1)^(rho/(rho-1))}; a >= upper_threshold().
double tail_upper(double a, const MomentEnvelope& env);
// exp{-(2 log(k1/kt1) + 2^rho k2 - 2 kt2) ((1/kt2) log(2a/kt1))^(rho/(rho-1))} / 4; a >= lower_threshold().
double tail_lower(double a, const MomentEnvelope& env);

struct RightTailConstants {
    double c1 = 1.0, c2 = 1.0, c3 = 1.0;        // upper
    double c1t = 1.0, c2t = 1.0, c3t = 1.0;     // lower
    double a0 = 1.0, b0 = 0.0;                  // validity a >= a0 e^{b0 t^beta}
};

struct EnvelopeExponents {
    double log_power = 0.0;        // (4 - a) / 2
    double t_power = 0.0;          // -(4 - 2 a0 - a) / 2
    double prefactor_upper = 0.0;  // -(4 - 2 a0 - a) / 4
    double prefactor_lower = 0.0;  // -(4 - 2 a0 - a) / 2
};

EnvelopeExponents envelope_exponents(const CovarianceSpec& spec);

struct BoundPair {
    double lower = 0.0;
    double upper = 0.0;
};

BoundPair right_tail_envelopes(double a, double t, const CovarianceSpec& spec, const RightTailConstants& c);

struct SmallBallParams {
    double lambda = 1.0;
    double b = 1.0;

    void validate() const;
    double threshold() const;  // r* = e^{-2 sqrt(lambda log(2/b))} / 2
};

// Plug-in values at one point: E u^2, E u^2 at intensity sqrt 2, and p_t * u0.
struct SmallBallInputs {
    double second_moment = 1.0;
    double second_moment_sqrt2 = 1.0;
    double heat = 1.0;
};

// lambda = sup 32 m2 m2' / h^4, b = 1 / (8 sup m2 / h^2).
SmallBallParams small_ball_params(std::span<const SmallBallInputs> points);

// Monte Carlo plug-in over an x grid (moment_k with k = 2 at intensities lambda and sqrt(2) lambda).
// Throws "insufficient-precision" when a second moment is within 3 SE of zero.
SmallBallParams lambda_b_global(double t, const std::vector<std::vector<double>>& x_grid,
                                const CovarianceSpec& spec, const InitialDatum& u0, std::size_t n_mc,
                                std::uint64_t seed, const MomentOptions& opt = {}, double intensity = 1.0);

// 2 exp{-(log(2r)/sqrt(lambda) + 2 sqrt(log(2/b)))^2 / 4} for 0 < r < r*.
double small_ball_bound(double r, const SmallBallParams& sb);

// 2^p e^{2p sqrt(lambda log(2/b))} (1 + 4 sqrt(pi p^2 lambda) e^{p^2 lambda}) heat^-p
double u_negative_moment_bound(double p, const SmallBallParams& sb, double heat);

struct PzMargin {
    double margin = 0.0;
    double se_band = 0.0;  // delta-method standard error of the margin
};

// P(X >= theta mean) - (1 - theta)^2 mean^2 / E X^2 on the empirical measure.
PzMargin paley_zygmund_margin(std::span<const double> samples, double theta);

struct Frequency {
    double value = 0.0;
    Interval ci;
};

Frequency empirical_survival(std::span<const double> samples, double a);                    // P(X >= a)
Frequency empirical_small_ball(std::span<const double> samples, double r, double normalizer);  // P(X < r h)

double kde(std::span<const double> samples, double bandwidth, double y);
double silverman_bandwidth(std::span<const double> samples);
// KDE of log X mapped back to X (samples must be positive): f(y) = g(log y) / y.
double kde_log(std::span<const double> samples, double log_bandwidth, double y);

struct DensityEnvelope {
    double c1 = 1.0, c2 = 1.0, c3 = 1.0;       // upper
    double c1t = 1.0, c2t = 1.0, c3t = 1.0;    // lower
    double a0 = 1.0, b0 = 0.0;                 // right-tail validity y >= a0 e^{b0 t^beta}
    double heat = 1.0;                         // lower bound also needs y > heat + 1

    void validate() const;
};

struct DensityBounds {
    double lower = 0.0;
    double upper = 0.0;
    bool lower_valid = false;
};

// Throws "below-validity-threshold" when y is outside the upper envelope's domain.
DensityBounds density_envelopes(double y, double t, const CovarianceSpec& spec, const DensityEnvelope& de);

struct LeftTailConstants {
    double C = 1.0, c1 = 1.0, c2 = 0.0;
    double a0 = 1.0, b0 = 0.0;  // validity 0 < y < a0 e^{-b0 t^beta}
};

// C t^{-(4 - 2 a0 - a)/4} exp{-(-c1 log y - c2)^2}
double left_tail_density_bound(double y, double t, const CovarianceSpec& spec, const LeftTailConstants& c);

// One-sided envelope fit from a right-tail regression slope of log f against (log y)^{log_power}.
// Upper: decay rate |slope| / 2, equal to f at y_low. Lower: decay rate 2 |slope|, equal to f at y_high.
DensityEnvelope fit_density_envelope(double slope, double y_low, double f_low, double y_high, double f_high,
                                     double t, const CovarianceSpec& spec, double heat);

// Rows of a bound-versus-empirical table.
struct TableRow {
    double abscissa = 0.0;
    double empirical = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double bound = 0.0;
    bool in_domain = true;
    bool dominated = true;
};

// Survival at the order statistics above quantile q (at most max_points, evenly spaced in rank).
// A row is dominated when the Wilson lower limit does not exceed tail_upper.
std::vector<TableRow> right_tail_table(std::span<const double> samples, const MomentEnvelope& env, double q = 0.99,
                                       std::size_t max_points = 20);

// r_j = r* 10^{-j/2}, j = 1..points. Dominated when the Wilson lower limit does not exceed the bound.
std::vector<TableRow> small_ball_table(std::span<const double> samples, const SmallBallParams& sb, double normalizer,
                                       std::size_t points = 10);

// theta = 0.1..0.9. empirical = P(X >= theta mean), bound = (1-theta)^2 mean^2 / E X^2,
// dominated when margin >= -3 se_band.
std::vector<TableRow> paley_zygmund_table(std::span<const double> samples);

bool all_dominated(std::span<const TableRow> rows);

}  // namespace shelab
