#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace ebmine {

// All randomness in a run flows from one base seed. Consumers open named
// sub-streams (e.g. "gen", "qml-start", "rw-boot") plus an index, so results
// do not depend on thread count or evaluation order. Normal deviates use an
// explicit Box-Muller transform rather than std::normal_distribution, whose
// algorithm is implementation-defined.
class RngStream {
  public:
    RngStream(std::uint64_t base_seed, std::string_view stream, std::uint64_t index = 0)
        : engine_(mix(mix(base_seed ^ 0x9e3779b97f4a7c15ull, fnv1a(stream)), index)) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on (0, 1]: never returns 0, safe under log().
    double next_uniform() {
        return (static_cast<double>(engine_() >> 11) + 1.0) * (1.0 / 9007199254740992.0);
    }

    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_uniform();
        double u2 = next_uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925287 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        // Rejection sampling keeps the draw exactly uniform.
        std::uint64_t limit = ~0ull - (~0ull % n + 1) % n;
        std::uint64_t v;
        do {
            v = engine_();
        } while (v > limit);
        return v % n;
    }

    static std::uint64_t fnv1a(std::string_view s) {
        std::uint64_t h = 1469598103934665603ull;
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        return h;
    }

  private:
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        // splitmix64 finalizer over the combined words
        std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace ebmine
