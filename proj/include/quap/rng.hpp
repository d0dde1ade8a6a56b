#pragma once

#include <cstdint>
#include <limits>
#include <string_view>
#include <vector>

namespace quap {

/// Counter-based 64-bit generator.
///
/// A stream is identified by (seed, purpose label, index); the n-th output of
/// a stream is a pure function of the stream key and n, so streams never
/// shift when other streams are added or consumed in a different order.
/// Satisfies UniformRandomBitGenerator.
class Rng {
public:
    using result_type = std::uint64_t;

    Rng(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()();

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Standard normal via Box-Muller; platform independent.
    double normal();

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t x);

/// Fisher-Yates with Rng draws (std::shuffle's sequence is library-specific).
void shuffle(std::vector<std::size_t>& items, Rng& rng);

/// 0, 1, ..., n-1 in shuffled order.
std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

}  // namespace quap
