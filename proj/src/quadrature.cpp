#include "shelab/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

#include "shelab/error.hpp"

namespace shelab {

namespace {

constexpr double kAbsoluteFloor = 1e-15;

void check_tolerance(double value, double err, double rel_tol, double a, double b) {
    // pieces below the absolute floor are negligible next to O(1) covariances
    if (!std::isfinite(value) || err > rel_tol * std::abs(value) + kAbsoluteFloor) {
        std::ostringstream os;
        os << "achieved error " << err << " on [" << a << ", " << b << "] for value " << value;
        throw Error("quadrature-failure", os.str());
    }
}

QuadratureRule golub_welsch(int m, const std::function<double(int)>& offdiag, double mu0) {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i + 1 < m; ++i) {
        jac(i, i + 1) = offdiag(i + 1);
        jac(i + 1, i) = jac(i, i + 1);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
    QuadratureRule rule;
    rule.nodes.resize(m);
    rule.weights.resize(m);
    for (int i = 0; i < m; ++i) {
        rule.nodes[i] = es.eigenvalues()(i);
        const double v = es.eigenvectors()(0, i);
        rule.weights[i] = mu0 * v * v;
    }
    return rule;
}

}  // namespace

double integrate_smooth(const Integrand& f, double a, double b, double rel_tol) {
    if (a == b) return 0.0;
    double err = 0.0;
    const double value =
        boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 15, rel_tol, &err);
    check_tolerance(value, err, rel_tol * 10.0, a, b);
    return value;
}

double integrate_smooth_pieces(const Integrand& f, const std::vector<double>& cuts, double rel_tol) {
    double total = 0.0;
    double total_err = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        if (!(cuts[i + 1] > cuts[i])) continue;
        double err = 0.0;
        total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, cuts[i], cuts[i + 1], 15, rel_tol, &err);
        total_err += err;
    }
    if (cuts.size() >= 2) check_tolerance(total, total_err, rel_tol * 10.0, cuts.front(), cuts.back());
    return total;
}

namespace {

double tanh_sinh_piece(const Integrand& f, double a, double b, double rel_tol, double* err) {
    thread_local boost::math::quadrature::tanh_sinh<double> integrator(15);
    double l1 = 0.0;
    return integrator.integrate([&f](double x) { return f(x); }, a, b, rel_tol, err, &l1);
}

}  // namespace

double integrate_endpoint_singular(const Integrand& f, double a, double b, double rel_tol) {
    return integrate_endpoint_singular_pieces(f, {a, b}, rel_tol);
}

double integrate_endpoint_singular_pieces(const Integrand& f, const std::vector<double>& cuts, double rel_tol) {
    double total = 0.0;
    double total_err = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        if (!(cuts[i + 1] > cuts[i])) continue;
        double err = 0.0;
        total += tanh_sinh_piece(f, cuts[i], cuts[i + 1], rel_tol, &err);
        total_err += err;
    }
    // tanh-sinh error estimates are pessimistic next to an endpoint singularity
    if (cuts.size() >= 2) check_tolerance(total, total_err, rel_tol * 1000.0, cuts.front(), cuts.back());
    return total;
}

QuadratureRule gauss_hermite(int m) {
    static std::mutex mutex;
    static std::map<int, QuadratureRule> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(m);
    if (it != cache.end()) return it->second;
    auto rule = golub_welsch(m, [](int k) { return std::sqrt(k / 2.0); }, std::sqrt(M_PI));
    cache.emplace(m, rule);
    return rule;
}

QuadratureRule gauss_legendre(int m) {
    static std::mutex mutex;
    static std::map<int, QuadratureRule> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(m);
    if (it != cache.end()) return it->second;
    auto rule = golub_welsch(
        m, [](int k) { return k / std::sqrt(4.0 * k * k - 1.0); }, 2.0);
    cache.emplace(m, rule);
    return rule;
}

}  // namespace shelab
