#ifndef CODELNET_RNG_HPP
#define CODELNET_RNG_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace codelnet {

// Deterministic 64-bit generator (splitmix64). The whole pipeline derives
// every random decision from a master seed through named substreams, so runs
// are reproducible bit-for-bit regardless of platform or thread count.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform integer in [0, n), n > 0
    std::uint64_t below(std::uint64_t n) {
        return next_u64() % n;
    }

    // uniform integer in [lo, hi] inclusive
    long range_int(long lo, long hi) {
        return lo + static_cast<long>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    double range(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    bool coin() { return (next_u64() & 1u) != 0; }

    // standard normal via Box-Muller
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = next_double();
        } while (u1 <= 0.0);
        double u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

inline std::uint64_t mix_seed(std::uint64_t state, std::uint64_t tag) {
    std::uint64_t z = state ^ (tag + 0x9e3779b97f4a7c15ULL + (state << 6) + (state >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives an independent substream from a master seed and a list of tags,
// e.g. (master, {epoch, sample, copy}).
inline Rng rng_stream(std::uint64_t master, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t s = mix_seed(master, 0x5eedc0de5eedc0deULL);
    for (std::uint64_t t : tags) s = mix_seed(s, t);
    return Rng(s);
}

} // namespace codelnet

#endif
