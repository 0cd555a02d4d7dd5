#pragma once

#include <cstdint>
#include <vector>

namespace pickwhy {

// splitmix64 step. Also used to derive independent child seeds so that
// work split across threads sees the same streams as a serial run.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic PRNG. The behaviour is fixed by this header rather than by
// std::uniform_*_distribution, so a seed produces identical bytes on every
// platform and standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    // Unbiased integer in [0, n). n must be > 0.
    std::uint64_t next_index(std::uint64_t n) {
        const std::uint64_t threshold = -n % n; // 2^64 mod n
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Inclusive integer range.
    std::int64_t next_int(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(
                        next_index(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    // [0, 1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double next_double(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    bool next_bool(double p_true) { return next_double() < p_true; }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_index(i));
            using std::swap;
            swap(v[i - 1], v[j]);
        }
    }

    // Independent child seed for stream `stream` of `seed`.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL + stream * 0xbf58476d1ce4e5b9ULL);
        return splitmix64(s);
    }

private:
    std::uint64_t state_;
};

} // namespace pickwhy
