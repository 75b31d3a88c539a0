#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace vch {

// Deterministic, platform-independent random stream. Streams are derived
// from (seed, tag, index) so concurrent consumers never share state and
// results do not depend on evaluation order or thread count.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : state_(seed) {}

    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    static std::uint64_t hash_tag(std::string_view tag) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const char c : tag) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    static RngStream derive(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) {
        return RngStream(mix(mix(seed ^ hash_tag(tag)) ^ index));
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return next_uniform() < p; }

    // Standard normal via Box-Muller; consumes two uniforms per pair.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u = 0.0;
        do {
            u = next_uniform();
        } while (u <= 0.0);
        const double v = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u));
        constexpr double two_pi = 6.283185307179586476925286766559;
        spare_ = r * std::sin(two_pi * v);
        have_spare_ = true;
        return r * std::cos(two_pi * v);
    }

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace vch
