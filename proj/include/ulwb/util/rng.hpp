#pragma once
// Deterministic, compiler-independent PRNG. All stochastic code in the
// workbench draws from this instead of <random> distributions so that a
// given seed produces the same byte stream on every toolchain.

#include <cmath>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace ulwb {

inline uint64_t splitmix64(uint64_t& state) noexcept {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(uint64_t seed) noexcept : state_(seed) {
        // burn two outputs so nearby seeds decorrelate
        splitmix64(state_);
        splitmix64(state_);
    }

    uint64_t next_u64() noexcept { return splitmix64(state_); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) noexcept {
        return lo + (hi - lo) * uniform01();
    }

    /// Uniform integer in [0, n). n must be > 0.
    uint64_t below(uint64_t n) noexcept {
        // Lemire's multiply-shift with rejection of the biased zone.
        uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        uint64_t lo = static_cast<uint64_t>(m);
        if (lo < n) {
            uint64_t threshold = (0 - n) % n;
            while (lo < threshold) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * n;
                lo = static_cast<uint64_t>(m);
            }
        }
        return static_cast<uint64_t>(m >> 64);
    }

    /// Standard normal via Box-Muller with a cached spare.
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u = 1.0 - uniform01(); // avoid log(0)
        double r = std::sqrt(-2.0 * std::log(u));
        double theta = 6.283185307179586 * uniform01();
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    template <class T>
    void shuffle(std::vector<T>& v) noexcept {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    template <class T>
    const T& choice(const std::vector<T>& v) noexcept {
        return v[static_cast<size_t>(below(v.size()))];
    }

private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Named sub-stream derivation: pure function of (seed, name), so adding a
/// consumer never shifts the draws of another.
uint64_t derive_seed(uint64_t base_seed, std::string_view stream);

} // namespace ulwb
