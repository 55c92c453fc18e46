#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "shelab/rng.hpp"
#include "shelab/stats.hpp"

namespace shelab {

// Draws n samples of an m-vector and returns the per-component mean and SE.
// Samples are drawn in blocks of kBlock; block b uses the stream
// derive_seed(seed, "mc-block", b), and block statistics are merged in block
// order, so results do not depend on the number of threads.
inline constexpr std::size_t kMonteCarloBlock = 1024;

using VectorDraw = std::function<void(NormalSource&, std::span<double>)>;

std::vector<Estimate> monte_carlo(std::size_t n, std::size_t m, std::uint64_t seed, const VectorDraw& draw,
                                  int threads = default_threads());

Estimate monte_carlo(std::size_t n, std::uint64_t seed, const std::function<double(NormalSource&)>& draw,
                     int threads = default_threads());

}  // namespace shelab
