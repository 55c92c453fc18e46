#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "shelab/covariance.hpp"
#include "shelab/gaussian_field.hpp"
#include "shelab/path_kernels.hpp"
#include "shelab/paths.hpp"
#include "shelab/stats.hpp"

namespace shelab {

// Covariance of the interpolated smoothed lattice field along time-reversed
// paths: temporal(i, l) = C_t(N - i, N - l) with N = t / dt.
class FieldPathKernel final : public PathKernel {
public:
    FieldPathKernel(std::shared_ptr<const SmoothingOperator> model, double t);

    bool temporal_diagonal() const override { return false; }
    double temporal(std::size_t i, std::size_t l) const override;
    double spatial(const double* y1, const double* y2) const override;
    bool vanishes() const override { return model_->spec().amplitude() == 0.0; }

private:
    std::shared_ptr<const SmoothingOperator> model_;
};

struct FkOptions {
    double intensity = 1.0;      // noise intensity lambda
    double overflow_v = 700.0;   // abort when V exceeds this
};

struct ConditionedEstimate {
    double value = 0.0;
    double se = 0.0;
    std::size_t n_paths = 0;
    std::uint64_t field_seed = 0;
    std::uint64_t path_seed = 0;
    double max_v = 0.0;
};

struct Ensemble {
    double t = 0.0;
    std::vector<double> x;
    SmoothingParams smoothing;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    std::string estimator;
    std::vector<ConditionedEstimate> samples;

    std::vector<double> values() const;
    Estimate mean() const;
    Estimate raw_moment(double p) const;  // E X^p (p may be negative)
};

// Number of field time steps covered by a path horizon t (t must be a lattice time).
std::size_t field_steps_for(const LatticeSpec& lattice, double t);

// V_t along one path (steps must equal t / dt of the field lattice):
// intensity * sum_i w_i W(t - s_i, B_i) - intensity^2 / 2 * sum_i sum_l w_i w_l C(i, l; B_i, B_l).
double v_functional(const PathView& path, const FieldSample& field, double intensity = 1.0);

// First term (intensity 1) and the full double-sum correction (without 1/2).
double field_path_integral(const PathView& path, const FieldSample& field);
double field_path_variance(const PathView& path, const SmoothingOperator& model);
// sum_i sum_l w_i w_l C_t(N - i, N - l) C_x(a_i, b_l): covariance of the two path integrals.
double field_pair_covariance(const PathView& a, const PathView& b, const SmoothingOperator& model);

ConditionedEstimate u_conditioned(double t, std::span<const double> x, const FieldSample& field,
                                  const CovarianceSpec& spec, const SmoothingParams& sp, const InitialDatum& u0,
                                  std::size_t n_paths, std::uint64_t seed, const FkOptions& opt = {});

// E^B[F Theta] / E^B[Theta] on one path set.
double weighted_expectation(const std::function<double(const PathView&)>& F, const FieldSample& field,
                            const CovarianceSpec& spec, const SmoothingParams& sp, double t,
                            std::span<const double> x, const InitialDatum& u0, std::size_t n_paths,
                            std::uint64_t seed, const FkOptions& opt = {});

// Independent smoothed fields, each mapped through u_conditioned. Field i uses
// derive_seed(seed, "field", i) and paths derive_seed(seed, "paths", i).
Ensemble generate_ensemble(double t, std::span<const double> x, const CovarianceSpec& spec,
                           const SmoothingParams& sp, const InitialDatum& u0, std::size_t n_fields,
                           std::size_t n_paths, std::uint64_t seed, const FkOptions& opt = {},
                           const LatticeSpec* lattice = nullptr, int threads = default_threads());

struct MomentResult {
    Estimate estimate;
    std::vector<std::string> warnings;
};

enum class MomentMode { unsmoothed_lattice, smoothed_lattice };

struct MomentOptions {
    MomentMode mode = MomentMode::unsmoothed_lattice;
    LatticeRegularization regularization{};                 // zero fields -> default_regularization(t)
    std::shared_ptr<const SmoothingOperator> model;         // smoothed_lattice mode
    std::size_t max_k = 4;
};

// E[u(t,x)^k] = E[prod_j u0(x + B^j_t) exp(lambda^2 Q^(k))].
MomentResult moment_k(std::size_t k, double t, std::span<const double> x, const CovarianceSpec& spec,
                      const InitialDatum& u0, std::size_t n_mc, std::uint64_t seed, double intensity = 1.0,
                      const MomentOptions& opt = {});

// Builds the path kernel used by moment_k and the Malliavin estimators.
std::unique_ptr<PathKernel> make_path_kernel(const CovarianceSpec& spec, double t, const MomentOptions& opt);

}  // namespace shelab
