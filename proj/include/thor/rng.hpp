#ifndef THOR_RNG_HPP
#define THOR_RNG_HPP

#include <cstdint>
#include <random>
#include <span>

namespace thor {

/// Seeded random stream used everywhere randomness is needed.
///
/// The engine is std::mt19937_64, whose raw output is fully specified by the
/// standard. The transforms (uniform, normal, categorical) are implemented
/// here instead of with the <random> distribution classes, whose output is
/// implementation-defined; this keeps runs bit-reproducible for a given seed
/// regardless of the standard library in use.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    /// Raw 64-bit draw.
    std::uint64_t next_u64();

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform();

    /// Uniform double in [lo, hi). Throws std::invalid_argument if lo > hi.
    double uniform(double lo, double hi);

    /// Uniform integer in [0, n). Throws std::invalid_argument if n <= 0.
    int uniform_int(int n);

    /// Standard normal via Box-Muller (stateless per call, no cached spare).
    double normal();

    /// Index draw from an unnormalized non-negative weight vector.
    /// Throws std::invalid_argument on empty, negative, or all-zero weights.
    int categorical(std::span<const double> weights);

    /// Derived stream decorrelated from this one and from other stream ids.
    /// Deterministic: same (root seed, stream_id) gives the same stream, no
    /// matter how much the parent has been consumed.
    Rng spawn(std::uint64_t stream_id) const;

    std::uint64_t seed() const { return seed_; }

  private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
};

} // namespace thor

#endif
