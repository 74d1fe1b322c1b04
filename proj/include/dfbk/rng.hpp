#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace dfbk {

// FNV-1a, the stable 64-bit hash used for prompt and id derived seeds.
inline uint64_t hash64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t mix64(uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t combine_seed(uint64_t seed, uint64_t salt) { return mix64(seed ^ mix64(salt)); }

inline uint64_t combine_seed(uint64_t seed, std::string_view tag) {
    return combine_seed(seed, hash64(tag));
}

// xoshiro256** with an explicitly serializable state. The sampling contract
// requires per-call streams that reproduce bit-exactly, so the generator and
// the gaussian algorithm are spelled out here instead of relying on
// implementation-defined <random> distributions.
class RandomStream {
  public:
    RandomStream() : RandomStream(0) {}
    explicit RandomStream(uint64_t seed) {
        uint64_t s = seed;
        for (auto& word : state_) {
            s += 0x9e3779b97f4a7c15ULL;
            word = mix64(s);
        }
        has_spare_ = false;
        spare_ = 0.0;
    }

    uint64_t next_u64() {
        auto rotl = [](uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [-1, 1]; exact arithmetic on the 53-bit mantissa.
    double uniform_signed() { return uniform() * 2.0 - 1.0; }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) { return next_u64() % n; }

    // Standard normal via Box-Muller; the spare value is part of the state.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    std::string serialize() const;
    static RandomStream deserialize(const std::string& text);

  private:
    std::array<uint64_t, 4> state_{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace dfbk
