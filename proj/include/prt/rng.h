#pragma once

#include <cstdint>

#include "prt/vec.h"

namespace prt {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// PCG32 (XSH-RR). Counter-based seeding: independent streams are selected by a
// 64-bit stream id, so callers can derive one decorrelated generator per
// pixel, probe ray, or bake sample from a single run seed.
class Rng {
public:
    Rng() : Rng(0, 0) {}
    Rng(uint64_t seed, uint64_t stream) {
        state_ = 0;
        inc_ = (splitmix64(stream) << 1u) | 1u;
        next_u32();
        state_ += splitmix64(seed ^ (stream * 0x632be59bd9b4e019ULL));
        next_u32();
    }

    uint32_t next_u32() {
        const uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        const uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
        const uint32_t rot = static_cast<uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((~rot + 1u) & 31u));
    }

    // Uniform in [0, 1).
    float next_float() { return static_cast<float>(next_u32() >> 8) * 0x1p-24f; }
    double next_double() { return static_cast<double>(next_u32()) * 0x1p-32; }

    // Uniform in [0, n).
    uint32_t next_below(uint32_t n) {
        return static_cast<uint32_t>((static_cast<uint64_t>(next_u32()) * n) >> 32);
    }

    Vec2f next_vec2() {
        const float a = next_float();
        const float b = next_float();
        return {a, b};
    }

private:
    uint64_t state_;
    uint64_t inc_;
};

// Common sampling warps. All take uniform [0,1)^2 samples.
inline Vec3f sample_uniform_sphere(const Vec2f& u) {
    const float z = 1.0f - 2.0f * u.x;
    const float r = std::sqrt(std::max(0.0f, 1.0f - z * z));
    const float phi = kTwoPi * u.y;
    return {r * std::cos(phi), r * std::sin(phi), z};
}

inline float uniform_sphere_pdf() { return 1.0f / kFourPi; }

// Uniform over the hemisphere around +z.
inline Vec3f sample_uniform_hemisphere(const Vec2f& u) {
    const float z = u.x;
    const float r = std::sqrt(std::max(0.0f, 1.0f - z * z));
    const float phi = kTwoPi * u.y;
    return {r * std::cos(phi), r * std::sin(phi), z};
}

inline float uniform_hemisphere_pdf() { return 1.0f / kTwoPi; }

// Cosine-weighted hemisphere around +z.
inline Vec3f sample_cosine_hemisphere(const Vec2f& u) {
    const float r = std::sqrt(u.x);
    const float phi = kTwoPi * u.y;
    const float z = std::sqrt(std::max(0.0f, 1.0f - u.x));
    return {r * std::cos(phi), r * std::sin(phi), z};
}

inline float cosine_hemisphere_pdf(float cos_theta) { return cos_theta * kInvPi; }

// Phong lobe around +z with pdf (s+1)/(2 pi) cos^s.
inline Vec3f sample_phong_lobe(const Vec2f& u, float exponent) {
    const float cos_theta = std::pow(u.x, 1.0f / (exponent + 1.0f));
    const float sin_theta = std::sqrt(std::max(0.0f, 1.0f - cos_theta * cos_theta));
    const float phi = kTwoPi * u.y;
    return {sin_theta * std::cos(phi), sin_theta * std::sin(phi), cos_theta};
}

inline float phong_lobe_pdf(float cos_theta, float exponent) {
    if (cos_theta <= 0.0f) return 0.0f;
    return (exponent + 1.0f) / kTwoPi * std::pow(cos_theta, exponent);
}

}  // namespace prt
