#pragma once

// Deterministic random streams.
//
// The generator and the way streams are keyed are part of the external
// contract: variant corpora written by one implementation must be
// reproducible by another. See docs/perturbation.md.
//
//   key    = FNV-1a-64 over UTF-8 bytes of  decimal(seed) 0x1F pid 0x1F id
//   state  = four successive SplitMix64 outputs seeded with key
//   next() = xoshiro256**
//   uniform_below(n): threshold = (2^64 - n) mod n; draw r until r >= threshold;
//                     return r mod n
//   uniform01():      (next() >> 11) * 2^-53

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace discern {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// One SplitMix64 step: advances `state` and returns the mixed output.
std::uint64_t splitmix64(std::uint64_t& state);

/// Stream key for (global seed, pid, datapoint id).
std::uint64_t stream_key(std::int64_t seed, std::string_view pid, std::string_view id);

class RngStream {
public:
    explicit RngStream(std::uint64_t key);

    static RngStream for_item(std::int64_t seed, std::string_view pid, std::string_view id) {
        return RngStream(stream_key(seed, pid, id));
    }

    std::uint64_t next();

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_below(std::uint64_t n);

    /// Uniform real in [0, 1) with 53 bits of resolution.
    double uniform01();

    /// k distinct indices from [0, n) by partial Fisher-Yates; draw order.
    std::vector<std::size_t> sample_distinct(std::size_t n, std::size_t k);

    /// Uniform permutation of [0, n) by Fisher-Yates from the top index down.
    std::vector<std::size_t> permutation(std::size_t n);

private:
    std::array<std::uint64_t, 4> s_;
};

}  // namespace discern
