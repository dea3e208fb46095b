#pragma once

#include <cstdint>
#include <initializer_list>

namespace swgs {

/// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives a stream key from a base seed and a tuple of counters, e.g.
/// (seed, replicate, period). Distinct tuples give unrelated streams.
inline std::uint64_t stream_key(std::uint64_t seed, std::initializer_list<std::uint64_t> counters)
{
    std::uint64_t key = mix64(seed + 0x9e3779b97f4a7c15ULL);
    for (std::uint64_t c : counters)
        key = mix64(key ^ mix64(c + 0x632be59bd9b4e019ULL));
    return key;
}

/// Counter-based generator: the k-th draw of a stream is a pure function of
/// (key, k), so results do not depend on execution order.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    std::uint64_t next_u64() { return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

    /// Uniform on the open interval (0, 1).
    double uniform()
    {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal by inversion.
    double normal();

    std::uint64_t key() const { return key_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace swgs
