#pragma once

#include <cstdint>
#include <vector>

#include "prt/path_tracer.h"
#include "prt/scene.h"
#include "prt/sh.h"

namespace prt {

// One surviving probe-ray hit: outgoing radiance at a surface point, tagged
// with the probe that traced it so neighbors can gather it.
struct ShadedPoint {
    Vec3f position;
    Vec3f radiance;
    uint32_t source_probe = 0;
};

struct SHLightProbe {
    int i = 0, j = 0, k = 0;
    Vec3f position;
    EquirectMap map;  // radiance accumulated across frames
    SHVector light_coeffs;
    bool valid = true;   // false: probe sits inside geometry, never used
    bool stale = false;  // last update skipped because the map was too sparse
};

struct ProbeGridConfig {
    int n = 8;  // probes per axis
    int rays_per_probe = 100;
    int map_width = 100;
    int map_height = 50;
    int degree = 4;
    int bounces = 3;  // path depth behind each probe ray
    float max_empty_fraction = 0.95f;
    // Gather points per target probe in a fixed order instead of splatting
    // points concurrently with atomics; same counts, rounding independent of
    // the worker count.
    bool deterministic = false;
};

// Regular lattice of SH light probes spanning `bounds`, boundary included.
struct ProbeGrid {
    ProbeGridConfig config;
    Aabb bounds;
    std::vector<SHLightProbe> probes;  // x fastest: index = (k*n + j)*n + i
    uint64_t fingerprint = 0;  // scene light fingerprint of the last frame
    uint64_t frame = 0;        // accumulation frames since the last reset

    ProbeGrid() = default;
    ProbeGrid(const Aabb& bounds, const ProbeGridConfig& config);

    int probe_index(int i, int j, int k) const {
        return (k * config.n + j) * config.n + i;
    }
    SHLightProbe& probe(int i, int j, int k) {
        return probes[size_t(probe_index(i, j, k))];
    }
    const SHLightProbe& probe(int i, int j, int k) const {
        return probes[size_t(probe_index(i, j, k))];
    }
    Vec3f lattice_position(int i, int j, int k) const;

    // Probes looking at mostly backfaces sit inside geometry: mark them
    // invalid so they neither scatter nor gather.
    void init_validity(const Scene& scene);
    // Clears every map and the frame counter; coefficients reset to zero.
    void reset_accumulation();
};

// M uniform-sphere rays per valid probe. Rays that escape or hit an emitter
// first are dropped; the returned order is a pure function of the seed.
std::vector<ShadedPoint> scatter_probe_rays(const Scene& scene,
                                            const ProbeGrid& grid,
                                            uint64_t frame_seed);

// Splats every point whose source probe lies within one lattice step
// (Chebyshev) of the target into the target's map: direction from the target
// position to the point, +1 count and +radiance on that texel. Parallel mode
// uses atomic adds; serial mode is the ordering oracle.
void rasterize_shared(ProbeGrid& grid, const std::vector<ShadedPoint>& points,
                      int target_probe, bool parallel = true);

// Projects the map's texel means onto the SH basis. Returns false (and flags
// the probe stale, keeping its previous coefficients) when more than
// max_empty_fraction of the texels are still unsampled.
bool update_probe_sh(SHLightProbe& probe, int degree, float max_empty_fraction);

// Trilinear weights over the 8 cell corners, pruned by validity, the
// half-space of n, and a probe-to-point shadow ray, then renormalized.
// Fully pruned cells fall back to inverse-distance * clamped-cosine over the
// valid corners, then to pure inverse distance.
SHVector interpolate_light(const ProbeGrid& grid, const Vec3f& x,
                           const Vec3f& n, const Scene& scene);

// One accumulation frame: reset if the lights changed, scatter, rasterize
// into every gathering probe, re-project coefficients.
void step_frame(const Scene& scene, ProbeGrid& grid, uint64_t frame_seed);

}  // namespace prt
