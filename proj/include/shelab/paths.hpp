#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "shelab/rng.hpp"

namespace shelab {

// Read-only view of one d-dimensional path sampled on steps + 1 uniform nodes over [0, t].
struct PathView {
    const double* data = nullptr;
    std::size_t steps = 0;
    int dim = 1;
    double t = 0.0;

    const double* node(std::size_t i) const { return data + i * static_cast<std::size_t>(dim); }
    double step() const { return t / static_cast<double>(steps); }
    // Piecewise-linear position at time s in [0, t], written to out[0..dim).
    void at(double s, double* out) const;
};

class PathBundle {
public:
    enum class Kind { brownian, bridge };

    PathBundle(Kind kind, std::size_t n, int dim, double t, std::size_t steps, std::vector<double> start,
               std::uint64_t seed);

    Kind kind() const { return kind_; }
    std::size_t size() const { return n_; }
    int dim() const { return dim_; }
    double horizon() const { return t_; }
    std::size_t steps() const { return steps_; }
    const std::vector<double>& start() const { return start_; }
    std::uint64_t seed() const { return seed_; }
    PathView path(std::size_t p) const;

private:
    friend PathBundle sample_bm(std::size_t, int, double, std::size_t, std::span<const double>, std::uint64_t);
    friend PathBundle sample_bridge(std::size_t, int, std::size_t, std::uint64_t);
    void check_increment_variance() const;

    Kind kind_;
    std::size_t n_;
    int dim_;
    double t_;
    std::size_t steps_;
    std::vector<double> start_;
    std::uint64_t seed_;
    std::vector<double> data_;  // [path][node][dim]
};

// Brownian motions from x over [0, t]; steps >= 2.
PathBundle sample_bm(std::size_t n, int d, double t, std::size_t steps, std::span<const double> x,
                     std::uint64_t seed);
// Brownian bridges from 0 to 0 over [0, 1], built as W_s - s W_1.
PathBundle sample_bridge(std::size_t n, int d, std::size_t steps, std::uint64_t seed);

// Low-level fillers used by estimators that generate paths on the fly.
// out holds (steps + 1) * d values.
void fill_brownian(NormalSource& normals, double t, std::size_t steps, int d, const double* start, double* out);
void fill_bridge(NormalSource& normals, std::size_t steps, int d, double* out);

// Trapezoid weights of a uniform grid with `steps` intervals over [0, t].
std::vector<double> trapezoid_weights(double t, std::size_t steps);

double heat_kernel(double t, std::span<const double> x);

class InitialDatum {
public:
    using Function = std::function<double(std::span<const double>)>;

    static InitialDatum constant(double c);
    // Evaluable bounded function on R^dim with declared bounds, verified on a probe grid.
    static InitialDatum function(Function f, double lower, double upper, int dim, std::string name);
    // amplitude * exp(-|y|^2 / (2 variance))
    static InitialDatum gaussian_bump(double amplitude, double variance, int dim);

    double operator()(std::span<const double> y) const;
    double operator()(const double* y, int dim) const { return (*this)(std::span<const double>(y, dim)); }
    bool is_constant() const { return constant_; }
    double lower() const { return lower_; }
    double upper() const { return upper_; }
    int dim() const { return dim_; }  // 0 for constants (any dimension)
    const std::string& name() const { return name_; }
    double amplitude() const { return amplitude_; }
    double variance() const { return variance_; }

private:
    InitialDatum() = default;
    bool constant_ = true;
    double value_ = 1.0;
    Function f_;
    double lower_ = 1.0;
    double upper_ = 1.0;
    int dim_ = 0;
    std::string name_ = "constant";
    double amplitude_ = 0.0;  // gaussian_bump parameters, for serialization
    double variance_ = 0.0;
};

// p_t * u0 (x); exact for constants, Gauss-Hermite with an order-doubling check otherwise.
double heat_convolve(const InitialDatum& u0, double t, std::span<const double> x);
// p_t * |u0| (x)
double heat_convolve_abs(const InitialDatum& u0, double t, std::span<const double> x);

}  // namespace shelab
