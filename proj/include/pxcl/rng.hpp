#pragma once

#include <cstdint>
#include <vector>

namespace pxcl {

// xoshiro256** seeded through splitmix64. Chosen over std::mt19937_64 because
// the standard distributions are implementation-defined; every draw here is
// spelled out, so a seed produces the same stream on any platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform in [0,1), 53-bit resolution.
    double uniform();
    double uniform(double lo, double hi);

    // Standard normal via Box-Muller; the spare value is cached.
    double normal();

    // Unbiased integer in [0, bound) by rejection. bound must be > 0.
    std::uint64_t below(std::uint64_t bound);

    // Integer in [lo, hi] inclusive.
    std::int64_t range(std::int64_t lo, std::int64_t hi);

    // Fisher-Yates shuffle of an index permutation 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        if (items.size() < 2) return;
        for (std::size_t i = items.size() - 1; i > 0; --i) {
            std::size_t j = static_cast<std::size_t>(below(i + 1));
            std::swap(items[i], items[j]);
        }
    }

    // Stable hash-combine used to derive substream seeds from a root seed.
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b);

private:
    std::uint64_t state_[4];
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

// Substream tags: one independent stream per consumer of randomness.
namespace stream {
inline constexpr std::uint64_t kInit = 0x696e6974;       // parameter init
inline constexpr std::uint64_t kShuffle = 0x7368756666;  // epoch shuffling
inline constexpr std::uint64_t kBuffer = 0x62756666;     // replay buffers
inline constexpr std::uint64_t kTransform = 0x7866726d;  // domain transforms
inline constexpr std::uint64_t kRun = 0x72756e;          // per-run seeds
}  // namespace stream

inline Rng substream(std::uint64_t root_seed, std::uint64_t tag) {
    return Rng(Rng::mix(root_seed, tag));
}

}  // namespace pxcl
