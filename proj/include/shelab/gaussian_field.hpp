#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "shelab/covariance.hpp"

namespace shelab {

// Space-time lattice. The smoothed field lives on the core nodes
// t_k = k dt (k = 0..T/dt) and x_m = -L + m dx (m = 0..2L/dx) per axis.
// The base white field lives on cells of the same spacing covering the core
// box enlarged by pad_t (time) and pad_x (each space axis); cell values sit at
// cell midpoints.
struct LatticeSpec {
    double dt = 0.0;
    double T = 0.0;
    double dx = 0.0;
    double L = 0.0;
    int dim = 1;
    double pad_t = 0.0;
    double pad_x = 0.0;
    std::size_t max_cells = std::size_t{1} << 25;

    void validate() const;

    std::size_t time_nodes() const;
    std::size_t space_nodes() const;  // per axis
    std::size_t core_size() const;
    std::size_t base_time_cells() const;
    std::size_t base_space_cells() const;  // per axis
    std::size_t base_size() const;
    double cell_weight() const;  // dt * dx^dim

    double time_node(std::size_t k) const { return static_cast<double>(k) * dt; }
    double space_node(std::size_t m) const { return -L + static_cast<double>(m) * dx; }
    double base_time(std::size_t j) const { return -pad_t + (static_cast<double>(j) + 0.5) * dt; }
    double base_space(std::size_t j) const { return -L - pad_x + (static_cast<double>(j) + 0.5) * dx; }

    // dt = T/64, L = x_range + 6 sqrt(T), dx = 2L/128.
    static LatticeSpec desk_default(double T, double x_range = 0.0, int dim = 1);

    // Same lattice with padding large enough for the smoothing kernels of spec.
    LatticeSpec padded_for(const CovarianceSpec& spec, const SmoothingParams& sp) const;

    bool same_grid(const LatticeSpec& other) const;
};

class SmoothingOperator;

enum class FieldKind { white_base, smoothed };

struct FieldSample {
    LatticeSpec lattice;
    FieldKind kind = FieldKind::white_base;
    SmoothingParams smoothing;       // meaningful for smoothed fields
    std::uint64_t seed = 0;
    std::vector<double> values;      // white_base: [time cell][space cells]; smoothed: [time node][space nodes]
    std::shared_ptr<const SmoothingOperator> model;  // smoothed fields only

    // Smoothed field at time node k and spatial point y (multilinear
    // interpolation; zero outside the box).
    double evaluate(std::size_t k, const double* y) const;
};

// Interpolation stencil along one axis: up to two nodes with weights.
struct AxisStencil {
    std::size_t index[2] = {0, 0};
    double weight[2] = {0.0, 0.0};
};
AxisStencil axis_stencil(const LatticeSpec& lattice, double y);

// Linear map from the base white field to the smoothed core field, together
// with the exact lattice covariance of its output.
class SmoothingOperator {
public:
    SmoothingOperator(const CovarianceSpec& spec, const SmoothingParams& sp, const LatticeSpec& lattice);

    const LatticeSpec& lattice() const { return lattice_; }
    const SmoothingParams& smoothing() const { return sp_; }
    const CovarianceSpec& spec() const { return spec_; }

    std::vector<double> apply(std::span<const double> base) const;

    // Covariance of the output between time nodes k1, k2 (includes the amplitude).
    double time_covariance(std::size_t k1, std::size_t k2) const { return ct_(k1, k2); }
    // Covariance of the output along one axis between nodes m1, m2.
    double space_covariance(int axis, std::size_t m1, std::size_t m2) const { return cx_[axis](m1, m2); }
    // Spatial covariance between two off-lattice points (interpolated field).
    double space_covariance(const double* y1, const double* y2) const;
    double covariance(std::size_t k1, const double* y1, std::size_t k2, const double* y2) const;

    const Eigen::MatrixXd& time_matrix() const { return at_; }
    const Eigen::MatrixXd& space_matrix(int axis) const { return ax_[axis]; }

private:
    CovarianceSpec spec_;
    SmoothingParams sp_;
    LatticeSpec lattice_;
    Eigen::MatrixXd at_;               // time nodes x base time cells
    std::vector<Eigen::MatrixXd> ax_;  // per axis: space nodes x base space cells
    Eigen::MatrixXd ct_;
    std::vector<Eigen::MatrixXd> cx_;
};

FieldSample sample_white_base(const LatticeSpec& lattice, std::uint64_t seed);
FieldSample smooth_field(const FieldSample& base, const std::shared_ptr<const SmoothingOperator>& op);
FieldSample smooth_field(const FieldSample& base, const CovarianceSpec& spec, const SmoothingParams& sp);

// Mercer / Karhunen-Loeve basis of the smoothed base white covariance on the
// core nodes, with respect to the lattice inner product <f, g> = w sum f g.
class KLBasis {
public:
    std::size_t size() const { return eigenvalues_.size(); }
    const std::vector<double>& eigenvalues() const { return eigenvalues_; }  // descending
    double cell_weight() const { return weight_; }
    std::size_t rank() const { return rank_; }
    void set_rank(std::size_t n);

    // Lattice-orthonormal eigenvector e_k (length = number of nodes).
    std::vector<double> eigenvector(std::size_t k) const;
    // sum_{k < rank} sqrt(lambda_k) g_k e_k
    std::vector<double> synthesize(std::span<const double> g) const;

    friend KLBasis kl_decompose(const CovarianceSpec&, const SmoothingParams&, const LatticeSpec&);
    friend KLBasis kl_decompose_matrix(const Eigen::MatrixXd&, double);

private:
    std::vector<double> eigenvalues_;
    double weight_ = 1.0;
    std::size_t rank_ = 0;
    // Kronecker factors: Euclidean-orthonormal eigenvectors and eigenvalues of
    // each weighted factor; mode k uses factor columns order_[k].
    std::vector<Eigen::MatrixXd> vectors_;
    std::vector<std::vector<std::size_t>> order_;
    std::vector<std::size_t> sizes_;
};

KLBasis kl_decompose(const CovarianceSpec& spec, const SmoothingParams& sp, const LatticeSpec& lattice);
// Dense decomposition of an arbitrary symmetric lattice covariance with cell weight w.
KLBasis kl_decompose_matrix(const Eigen::MatrixXd& cov, double weight);

// Smoothed base white covariance matrix on one axis: exp(-s(u_i^2+u_j^2)/2) p_{2s}(u_i - u_j).
Eigen::MatrixXd smoothed_white_matrix(double scale, const std::vector<double>& nodes);

double path_distance(const FieldSample& f, const FieldSample& g);

// Binary export: 8-byte magic "SHLFIELD", uint32 version, uint32 kind, int32 dim,
// uint32 reserved, then doubles dt, T, dx, L, pad_t, pad_x, epsilon, delta,
// uint64 seed, uint64 count, then count little-endian doubles.
void write_field_binary(const std::string& path, const FieldSample& f);
FieldSample read_field_binary(const std::string& path);

}  // namespace shelab
