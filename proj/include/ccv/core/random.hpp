#ifndef CCV_CORE_RANDOM_HPP
#define CCV_CORE_RANDOM_HPP

#include <array>
#include <cstddef>
#include <cstdint>

namespace ccv::stats {

/// Philox4x32-10 block function. Exposed for known-answer testing.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// SplitMix64 finalizer; used to derive child stream ids.
std::uint64_t mix64(std::uint64_t x) noexcept;

/*
 * Counter-based random stream.
 *
 * The 64-bit seed is the Philox key and the 64-bit stream id fills the upper
 * half of the 128-bit counter, so every (seed, stream-id) pair addresses its
 * own 2^64-block sequence. Streams are plain values: copying one duplicates
 * its position, so each worker should own its stream (usually via split()).
 */
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0) noexcept
        : seed_(seed), stream_(stream_id) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_; }

    /// Independent child stream; depends only on (seed, stream id, child), never on position.
    RandomStream split(std::uint64_t child) const noexcept;

    std::uint64_t next_u64() noexcept;

    /// Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    double exponential() noexcept;
    double normal() noexcept;

    /// Uniform integer in [0, bound). bound must be positive.
    std::uint64_t below(std::uint64_t bound) noexcept;

private:
    void refill() noexcept;

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    unsigned pos_ = 4;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

} // namespace ccv::stats

#endif // CCV_CORE_RANDOM_HPP
