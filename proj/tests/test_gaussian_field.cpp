#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <vector>

#include "doctest.h"
#include "shelab/error.hpp"
#include "shelab/gaussian_field.hpp"
#include "shelab/rng.hpp"
#include "shelab/stats.hpp"

using namespace shelab;

namespace {

LatticeSpec small_lattice() {
    LatticeSpec lat;
    lat.T = 0.1;
    lat.dt = 0.01;
    lat.L = 0.5;
    lat.dx = 0.05;
    return lat;
}

}  // namespace

TEST_CASE("white base variance is one over the cell weight") {
    const auto lat = LatticeSpec::desk_default(0.25);
    const auto f = sample_white_base(lat, 3);
    REQUIRE(f.values.size() == lat.base_size());
    std::vector<double> scaled(f.values.size());
    for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = f.values[i] * f.values[i] * lat.cell_weight();
    const Estimate v = mean_estimate(scaled);
    CHECK(std::abs(v.value - 1.0) <= 3.0 * v.se);

    const auto g = sample_white_base(lat, 3);
    CHECK(f.values == g.values);
    CHECK(sample_white_base(lat, 4).values != f.values);
}

TEST_CASE("memory budget is enforced") {
    auto lat = LatticeSpec::desk_default(0.25, 0.0, 2);
    lat.max_cells = 1000;
    CHECK_THROWS_AS(sample_white_base(lat, 1), Error);
}

TEST_CASE("zero base smooths to zero") {
    const auto spec = CovarianceSpec::white();
    const SmoothingParams sp{0.05, 0.05};
    const auto lat = small_lattice().padded_for(spec, sp);
    auto base = sample_white_base(lat, 1);
    std::fill(base.values.begin(), base.values.end(), 0.0);
    const auto f = smooth_field(base, spec, sp);
    REQUIRE(f.values.size() == lat.core_size());
    for (double v : f.values) CHECK(v == 0.0);
}

TEST_CASE("lattice covariance matches the continuum smoothed covariance") {
    const auto spec = CovarianceSpec::white();
    const SmoothingParams sp{0.1, 0.1};
    LatticeSpec lat = small_lattice();
    lat.dt = 0.005;
    lat.dx = 0.025;
    lat = lat.padded_for(spec, sp);
    const SmoothingOperator op(spec, sp, lat);
    const double y1[] = {0.0};
    const double y2[] = {0.25};
    CHECK(op.covariance(20, y1, 20, y1) == doctest::Approx(q_smoothed(spec, sp, 0.1, 0.1, y1, y1)).epsilon(5e-3));
    CHECK(op.covariance(0, y1, 20, y2) == doctest::Approx(q_smoothed(spec, sp, 0.0, 0.1, y1, y2)).epsilon(5e-3));
}

TEST_CASE("sample covariance of smoothed fields matches the lattice covariance") {
    const auto spec = CovarianceSpec::white();
    const SmoothingParams sp{0.05, 0.05};
    const auto lat = small_lattice().padded_for(spec, sp);
    const auto op = std::make_shared<const SmoothingOperator>(spec, sp, lat);
    const std::size_t n = 3000;
    const std::size_t nx = lat.space_nodes();
    const std::size_t i1 = 5 * nx + nx / 2, i2 = 8 * nx + nx / 2 + 3;
    std::vector<double> prod(n), sq(n);
    for (std::size_t r = 0; r < n; ++r) {
        const auto f = smooth_field(sample_white_base(lat, derive_seed(9, "cov", r)), op);
        prod[r] = f.values[i1] * f.values[i2];
        sq[r] = f.values[i1] * f.values[i1];
    }
    const double ya[] = {lat.space_node(nx / 2)};
    const double yb[] = {lat.space_node(nx / 2 + 3)};
    const Estimate c12 = mean_estimate(prod);
    const Estimate c11 = mean_estimate(sq);
    CHECK(std::abs(c12.value - op->covariance(5, ya, 8, yb)) <= 3.0 * c12.se);
    CHECK(std::abs(c11.value - op->covariance(5, ya, 5, ya)) <= 3.0 * c11.se);
}

TEST_CASE("karhunen-loeve basis of the smoothed white covariance") {
    const auto spec = CovarianceSpec::white();
    const SmoothingParams sp{0.01, 0.01};
    const auto lat = small_lattice();
    const auto kl = kl_decompose(spec, sp, lat);
    REQUIRE(kl.size() == lat.core_size());
    CHECK(kl.eigenvalues().front() <= 1.0 + 1e-8);
    for (std::size_t k = 1; k < kl.size(); ++k) CHECK(kl.eigenvalues()[k] <= kl.eigenvalues()[k - 1] + 1e-14);

    double trace = 0.0;
    for (std::size_t k = 0; k < lat.time_nodes(); ++k)
        for (std::size_t m = 0; m < lat.space_nodes(); ++m)
            trace += smoothed_white_factor(sp.delta, lat.time_node(k), lat.time_node(k)) *
                     smoothed_white_factor(sp.epsilon, lat.space_node(m), lat.space_node(m));
    trace *= lat.cell_weight();
    double sum = 0.0;
    for (double l : kl.eigenvalues()) sum += l;
    CHECK(sum == doctest::Approx(trace).epsilon(1e-9));

    for (std::size_t a : {0u, 3u, 17u})
        for (std::size_t b : {0u, 3u, 17u}) {
            const auto ea = kl.eigenvector(a);
            const auto eb = kl.eigenvector(b);
            double ip = 0.0;
            for (std::size_t i = 0; i < ea.size(); ++i) ip += ea[i] * eb[i];
            ip *= kl.cell_weight();
            CHECK(ip == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-9).scale(1.0));
        }
}

TEST_CASE("dense decomposition of an identity covariance") {
    const auto kl = kl_decompose_matrix(Eigen::MatrixXd::Identity(5, 5), 0.2);
    for (double l : kl.eigenvalues()) CHECK(l == doctest::Approx(0.2));
}

TEST_CASE("path distance is a metric") {
    const auto spec = CovarianceSpec::white();
    const SmoothingParams sp{0.05, 0.05};
    const auto lat = small_lattice().padded_for(spec, sp);
    const auto op = std::make_shared<const SmoothingOperator>(spec, sp, lat);
    const auto f = smooth_field(sample_white_base(lat, 1), op);
    const auto g = smooth_field(sample_white_base(lat, 2), op);
    const auto h = smooth_field(sample_white_base(lat, 3), op);
    CHECK(path_distance(f, f) == 0.0);
    CHECK(path_distance(f, g) > 0.0);
    CHECK(path_distance(f, g) == path_distance(g, f));
    CHECK(path_distance(f, h) <= path_distance(f, g) + path_distance(g, h));
    CHECK_THROWS_AS(path_distance(f, sample_white_base(lat, 1)), Error);
}

TEST_CASE("binary export round trip") {
    const auto spec = CovarianceSpec::white();
    const SmoothingParams sp{0.05, 0.05};
    const auto lat = small_lattice().padded_for(spec, sp);
    const auto f = smooth_field(sample_white_base(lat, 42), spec, sp);
    const auto path = (std::filesystem::temp_directory_path() / "shelab_field_roundtrip.bin").string();
    write_field_binary(path, f);
    const auto g = read_field_binary(path);
    std::filesystem::remove(path);
    CHECK(g.kind == FieldKind::smoothed);
    CHECK(g.seed == 42);
    CHECK(g.lattice.same_grid(f.lattice));
    CHECK(g.smoothing.epsilon == sp.epsilon);
    CHECK(g.smoothing.delta == sp.delta);
    CHECK(g.values == f.values);
}
