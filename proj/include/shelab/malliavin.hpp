#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shelab/feynman_kac.hpp"

namespace shelab {

struct ZEstimate {
    Estimate estimate;
    std::vector<std::string> warnings;
};

// E Z = E[u0(B1_t) u0(B2_t) Q2 e^{Q2}]
ZEstimate z_first_moment(double t, std::span<const double> x, const CovarianceSpec& spec, const InitialDatum& u0,
                         std::size_t n_mc, std::uint64_t seed, const MomentOptions& opt = {});

// E Z^2 = E[prod u0(Bj_t) Q2(1,2) Q2(3,4) e^{Q4}]
ZEstimate z_second_moment(double t, std::span<const double> x, const CovarianceSpec& spec, const InitialDatum& u0,
                          std::size_t n_mc, std::uint64_t seed, const MomentOptions& opt = {});

// I~ = 4 E[prod u0(Bj_t) Q2(1,2) Q2(3,4) Q2(1,3) e^{Q4}]. With swap_pairs the
// roles of (B1, B2) and (B3, B4) are exchanged on the same draws.
ZEstimate tilde_i(double t, std::span<const double> x, const CovarianceSpec& spec, const InitialDatum& u0,
                  std::size_t n_mc, std::uint64_t seed, const MomentOptions& opt = {}, bool swap_pairs = false);

// Noise-conditioned Z_{eps,delta}: E^B[u0 u0 Q2_{eps,delta}(B1, B2) e^{V(B1) + V(B2)}].
ConditionedEstimate z_conditioned(double t, std::span<const double> x, const FieldSample& field,
                                  const CovarianceSpec& spec, const SmoothingParams& sp, const InitialDatum& u0,
                                  std::size_t n_pairs, std::uint64_t seed, const FkOptions& opt = {});

// Ensemble of z_conditioned over independent fields (same seed rule as generate_ensemble).
Ensemble generate_z_ensemble(double t, std::span<const double> x, const CovarianceSpec& spec,
                             const SmoothingParams& sp, const InitialDatum& u0, std::size_t n_fields,
                             std::size_t n_pairs, std::uint64_t seed, const FkOptions& opt = {},
                             const LatticeSpec* lattice = nullptr, int threads = default_threads());

struct MalliavinStats {
    double t = 0.0;
    std::vector<double> x;
    Estimate ez;
    Estimate ez2;
    Estimate itilde;
    double lambda = 0.0;
    double b = 0.0;
};

struct LambdaB {
    double lambda = 0.0;
    double b = 0.0;
};

// lambda = 32 I~ E Z^2 / (E Z)^4, b = (E Z)^2 / (8 E Z^2).
// Throws "insufficient-precision" when E Z <= 3 SE.
LambdaB lambda_b_point(const Estimate& ez, const Estimate& ez2, const Estimate& itilde);

MalliavinStats malliavin_stats(double t, std::span<const double> x, const CovarianceSpec& spec,
                               const InitialDatum& u0, std::size_t n_mc, std::uint64_t seed,
                               const MomentOptions& opt = {});

// 2^p e^{2p sqrt(lambda log(2/b))} (1 + 4 sqrt(pi p^2 lambda) e^{p^2 lambda}) (E Z)^-p
double du_negative_moment_bound(double p, double lambda, double b, double ez);

struct DuConstants {
    double C_kp = 1.0;  // prefactor C_{k,p}
    double c = 1.0;     // exponential rate
};

// C_{k,p} (p_t * |u0|)^p t^(((4 - 2 a0 - a) / 4) p k) exp(c p^((4-a)/(2-a)) t^beta)
double du_kth_moment_bound(std::size_t k, double p, double t, std::span<const double> x,
                           const CovarianceSpec& spec, const InitialDatum& u0, const DuConstants& c);

struct LambdaBEnvelopeConstants {
    double C1 = 1.0, c1 = 1.0;  // lambda(t) <= C1 t^(2 - a0 - a/2) e^{c1 t^beta}
    double C2 = 1.0, c2 = 1.0;  // b(t) >= C2 e^{-c2 t^beta}
};

LambdaB du_lambda_b_envelope(double t, const CovarianceSpec& spec, const LambdaBEnvelopeConstants& c);

}  // namespace shelab
