#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "prt/image.h"
#include "prt/rng.h"
#include "prt/scene.h"

namespace prt {

// Which light-path contributions an estimate keeps. A path's order is the
// number of non-delta scattering vertices between the light and the sensor;
// mirror bounces relay without incrementing it. direct_only keeps order <= 1
// (visible emitters plus one-scatter lighting), gi_only keeps order >= 2,
// full keeps everything. direct_only + gi_only equals full in expectation.
enum class TraceMode { direct_only, gi_only, full };

struct PathConfig {
    int max_bounces = 8;
    int spp = 64;
    TraceMode mode = TraceMode::full;
    int rr_start = 3;  // first bounce index eligible for Russian roulette
    uint64_t seed = 0;
};

// Unidirectional path tracer with next-event estimation and balance-heuristic
// MIS against area lights and the environment. Point lights are sampled
// directly (no MIS partner since a BSDF ray cannot hit them).
class PathTracer {
public:
    explicit PathTracer(const Scene& scene);

    // Mean radiance arriving at `origin` from direction `dir` over
    // config.spp independent paths.
    Vec3f trace_radiance(const Vec3f& origin, const Vec3f& dir,
                         const PathConfig& config, Rng& rng) const;

    // Single-path estimate; the building block of trace_radiance.
    Vec3f trace_one(const Vec3f& origin, const Vec3f& dir,
                    const PathConfig& config, Rng& rng) const;

    // Full-resolution render, one RNG stream per pixel so the result is
    // independent of thread count. Linear radiance out.
    Image render_reference(const Camera& camera, const PathConfig& config) const;

    struct ProbeSample {
        Vec3f radiance;  // outgoing radiance at the hit toward the ray origin,
                         // emission excluded
        Vec3f position;
    };

    // Radiance probe ray: rays that escape the scene or hit an emitter first
    // are dropped so probes only ever store indirect-capable surfaces.
    std::optional<ProbeSample> shade_probe_ray(const Vec3f& position,
                                               const Vec3f& dir, int bounces,
                                               Rng& rng) const;

private:
    struct EmitterInfo {
        int mesh_id = -1;
        Vec3f radiance;
        SurfaceSampler sampler;
        float area = 0.0f;
    };

    Vec3f path_contribution(const Vec3f& origin, const Vec3f& dir,
                            const SurfaceHit* first_hit, bool first_emission,
                            const PathConfig& config, Rng& rng) const;
    Vec3f direct_light(const SurfaceHit& hit, const Vec3f& wo,
                       const Material& material, Rng& rng) const;
    float emitter_pdf(const SurfaceHit& hit, const Vec3f& origin) const;

    const Scene& scene_;
    std::vector<EmitterInfo> emitters_;
    std::vector<int> mesh_to_emitter_;
    bool has_point_or_env_ = false;
};

}  // namespace prt
