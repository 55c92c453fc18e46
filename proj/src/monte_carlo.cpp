#include "shelab/monte_carlo.hpp"

#include <cmath>

#include "shelab/error.hpp"

namespace shelab {

namespace {

struct Moments {
    double n = 0.0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        n += 1.0;
        const double d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    void merge(const Moments& o) {
        if (o.n == 0.0) return;
        const double total = n + o.n;
        const double d = o.mean - mean;
        mean += d * o.n / total;
        m2 += o.m2 + d * d * n * o.n / total;
        n = total;
    }
};

}  // namespace

std::vector<Estimate> monte_carlo(std::size_t n, std::size_t m, std::uint64_t seed, const VectorDraw& draw,
                                  int threads) {
    if (n == 0) throw Error("invalid-argument", "Monte Carlo needs at least one sample");
    const std::size_t blocks = (n + kMonteCarloBlock - 1) / kMonteCarloBlock;
    std::vector<std::vector<Moments>> per_block(blocks, std::vector<Moments>(m));
    parallel_for(blocks, threads, [&](std::size_t b) {
        NormalSource normals(derive_seed(seed, "mc-block", b));
        std::vector<double> out(m);
        const std::size_t lo = b * kMonteCarloBlock;
        const std::size_t hi = std::min(n, lo + kMonteCarloBlock);
        for (std::size_t i = lo; i < hi; ++i) {
            draw(normals, out);
            for (std::size_t c = 0; c < m; ++c) per_block[b][c].add(out[c]);
        }
    });
    std::vector<Moments> total(m);
    for (const auto& blk : per_block)
        for (std::size_t c = 0; c < m; ++c) total[c].merge(blk[c]);
    std::vector<Estimate> est(m);
    for (std::size_t c = 0; c < m; ++c) {
        est[c].value = total[c].mean;
        est[c].se = total[c].n > 1.0 ? std::sqrt(total[c].m2 / (total[c].n - 1.0) / total[c].n) : 0.0;
    }
    return est;
}

Estimate monte_carlo(std::size_t n, std::uint64_t seed, const std::function<double(NormalSource&)>& draw,
                     int threads) {
    return monte_carlo(
        n, 1, seed, [&](NormalSource& g, std::span<double> out) { out[0] = draw(g); }, threads)[0];
}

}  // namespace shelab
