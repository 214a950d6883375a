#include "thor/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace thor {

namespace {

// splitmix64, used to mix (seed, stream_id) pairs into child seeds.
std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

Rng::Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() {
    // Top 53 bits give a uniform double in [0, 1).
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    if (lo > hi) throw std::invalid_argument("uniform: lo > hi");
    return lo + (hi - lo) * uniform();
}

int Rng::uniform_int(int n) {
    if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
    // Rejection-free modulo is biased for huge n; n here is always tiny
    // (action counts, state counts), so scaled uniform is exact enough and
    // keeps the draw count per call fixed.
    int i = static_cast<int>(uniform() * n);
    return i < n ? i : n - 1;
}

double Rng::normal() {
    // Box-Muller without the cached second value, so each call consumes a
    // fixed number of engine draws and streams stay alignment-free.
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

int Rng::categorical(std::span<const double> weights) {
    if (weights.empty()) throw std::invalid_argument("categorical: empty weights");
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw std::invalid_argument("categorical: negative or NaN weight");
        total += w;
    }
    if (total <= 0.0) throw std::invalid_argument("categorical: all weights zero");
    double u = uniform() * total;
    for (size_t i = 0; i < weights.size(); ++i) {
        u -= weights[i];
        if (u < 0.0) return static_cast<int>(i);
    }
    // Rounding can leave u at exactly 0 after the last subtraction; return
    // the last index with nonzero weight.
    for (size_t i = weights.size(); i-- > 0;) {
        if (weights[i] > 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
}

Rng Rng::spawn(std::uint64_t stream_id) const {
    return Rng(splitmix64(seed_ ^ splitmix64(stream_id + 0x51ed2701)));
}

} // namespace thor
