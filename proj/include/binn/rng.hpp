#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace binn {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Counter-based stream: draw k of stream (seed, index) depends on nothing else.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t index)
        : key_(splitmix64(splitmix64(seed) ^ (index * 0xD1B54A32D192ED03ULL + 0x632BE59BD9B4E019ULL))) {}

    std::uint64_t next_u64() { return splitmix64(key_ + 0x9E3779B97F4A7C15ULL * (++ctr_)); }

    // Uniform on (0,1).
    double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double t = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

private:
    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace binn
