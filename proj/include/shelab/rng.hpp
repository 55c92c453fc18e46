#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string_view>

namespace shelab {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive child seeds.
std::uint64_t mix64(std::uint64_t z);

// 64-bit FNV-1a of a string, stable across platforms.
std::uint64_t fnv1a(std::string_view s);

// Child seed for (tag, index) under a parent seed. The rule is
//   child = mix64(mix64(parent ^ fnv1a(tag)) + index * 0x9E3779B97F4A7C15)
// and is the only way seeds are derived anywhere in the library.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag, std::uint64_t index = 0);

class NormalSource {
public:
    explicit NormalSource(std::uint64_t seed) : rng_(seed) {}
    double operator()() { return dist_(rng_); }
    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

private:
    Rng rng_;
    std::normal_distribution<double> dist_;
};

// Runs body(i) for i in [0, n) on up to `threads` workers. Work is split into
// contiguous blocks; callers write results by index so the outcome does not
// depend on the thread count.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

// Process-wide default worker count used by estimators (set by the CLI).
int default_threads();
void set_default_threads(int n);

}  // namespace shelab
