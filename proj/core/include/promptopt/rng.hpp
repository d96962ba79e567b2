#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace promptopt {

/// FNV-1a, used to derive substream keys from stable string ids.
std::uint64_t fnv1a(std::string_view s);

/// A named, independently seeded random stream derived from one master seed.
///
/// Every stochastic choice in a run draws from a substream identified by
/// (seed, name, a, b), so reruns with the same seed reproduce the exact same
/// decisions regardless of which other substreams were consumed in between.
/// Bounded draws avoid std::uniform_int_distribution on purpose: its output
/// is not pinned by the standard, and traces must be reproducible.
class SubstreamRng {
public:
    SubstreamRng(std::uint64_t seed, std::string_view name,
                 std::uint64_t a = 0, std::uint64_t b = 0);

    std::uint64_t next_u64();

    /// Uniform draw from [0, n). n must be positive.
    std::size_t uniform_index(std::size_t n);

    /// Uniform draw from [0, 1).
    double uniform_real();

    /// k distinct indices drawn uniformly from [0, n), in draw order.
    /// Returns all of [0, n) (shuffled) when k >= n.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

private:
    std::mt19937_64 engine_;
};

}  // namespace promptopt
