#pragma once

#include <cmath>
#include <optional>

#include "prt/mesh.h"
#include "prt/rng.h"
#include "prt/vec.h"

namespace prt {

// Directions follow the light-transport convention: wo points from the
// surface toward the viewer, wi toward the light; both unit, n is the
// shading normal. Mirror materials are delta lobes and evaluate to zero
// here; the integrators handle them as explicit reflection bounces.

// BRDF value with the albedo factored out; both supported glossy models are
// a color times this scalar shape.
inline float bsdf_shape(const Material& m, const Vec3f& n, const Vec3f& wo,
                        const Vec3f& wi) {
    if (dot(n, wi) <= 0.0f || dot(n, wo) <= 0.0f) return 0.0f;
    switch (m.kind) {
        case MaterialKind::lambertian:
            return kInvPi;
        case MaterialKind::glossy: {
            // Normalized Phong lobe about the reflection vector.
            const Vec3f r = reflect(-wo, n);
            const float c = dot(r, wi);
            if (c <= 0.0f) return 0.0f;
            const float s = m.glossy_exponent;
            return (s + 2.0f) / kTwoPi * std::pow(c, s);
        }
        case MaterialKind::mirror:
            return 0.0f;
    }
    return 0.0f;
}

inline Vec3f eval_bsdf(const Material& m, const Vec3f& n, const Vec3f& wo,
                       const Vec3f& wi) {
    return m.albedo * bsdf_shape(m, n, wo, wi);
}

inline float pdf_bsdf(const Material& m, const Vec3f& n, const Vec3f& wo,
                      const Vec3f& wi) {
    if (dot(n, wi) <= 0.0f || dot(n, wo) <= 0.0f) return 0.0f;
    switch (m.kind) {
        case MaterialKind::lambertian:
            return std::max(dot(n, wi), 0.0f) * kInvPi;
        case MaterialKind::glossy: {
            const Vec3f r = reflect(-wo, n);
            const float c = dot(r, wi);
            if (c <= 0.0f) return 0.0f;
            return phong_lobe_pdf(c, m.glossy_exponent);
        }
        case MaterialKind::mirror:
            return 0.0f;
    }
    return 0.0f;
}

struct BsdfSample {
    Vec3f wi;
    Vec3f f;
    float pdf = 0.0f;
};

inline std::optional<BsdfSample> sample_bsdf(const Material& m, const Vec3f& n,
                                             const Vec3f& wo, Rng& rng) {
    if (dot(n, wo) <= 0.0f) return std::nullopt;
    BsdfSample s;
    switch (m.kind) {
        case MaterialKind::lambertian: {
            const Vec3f local = sample_cosine_hemisphere(rng.next_vec2());
            s.wi = Frame::from_z(n).to_world(local);
            s.pdf = cosine_hemisphere_pdf(local.z);
            break;
        }
        case MaterialKind::glossy: {
            const Vec3f r = reflect(-wo, n);
            const Vec3f local = sample_phong_lobe(rng.next_vec2(), m.glossy_exponent);
            s.wi = Frame::from_z(r).to_world(local);
            s.pdf = phong_lobe_pdf(local.z, m.glossy_exponent);
            break;
        }
        case MaterialKind::mirror:
            return std::nullopt;
    }
    if (s.pdf <= 0.0f) return std::nullopt;
    s.f = eval_bsdf(m, n, wo, s.wi);
    return s;
}

}  // namespace prt
