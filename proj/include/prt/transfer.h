#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "prt/rng.h"
#include "prt/scene.h"
#include "prt/sh.h"

namespace prt {

struct BakeConfig {
    int64_t n_samples = 2'048'000;
    int n_incident = 2000;
    float t_threshold = -1.0f;  // <= 0: auto, 2x the object's bounding-sphere radius
    int degree = 4;
    uint64_t seed = 0;
};

// Self-occlusion test restricted to the owning object: 1 when the ray from
// x_o along wi misses that object's triangles within (epsilon, t_threshold).
// Other objects never block; their shadowing lives in the light probes.
int visibility(const Scene& scene, int object_id, const Vec3f& x_o,
               const Vec3f& geo_normal, const Vec3f& wi, float t_threshold);

// Everything compute_transfer needs to know about one surface sample.
struct BakePoint {
    Vec3f position;
    Vec3f omega_o;     // unit, points away from the surface
    Vec3f normal;      // unit shading normal, omega_o side
    Vec3f geo_normal;  // unit, for ray offsets
    int object_id = 0;
};

// Monte Carlo estimate of the transfer coefficients at one point: incident
// directions drawn uniformly over the upper hemisphere of `normal`, each
// weighted by BRDF shape * cos * visibility and projected onto the basis.
// Per channel the result is albedo_c times a shared scalar vector.
SHVector compute_transfer(const Scene& scene, const BakePoint& point,
                          const Material& material, const BakeConfig& config,
                          Rng& rng);

struct DatasetHeader {
    uint32_t version = 1;
    uint32_t record_bytes = 0;
    uint64_t n_records = 0;
    uint32_t n_incident = 0;
    uint32_t degree = 4;
    uint32_t latent_dim = 0;  // reserved for the model stage
    float t_threshold = 0.0f;
    uint64_t seed = 0;
    uint64_t total_vertices = 0;
};

// Struct-of-arrays view of a loaded dataset; per record the target block is
// coeff_count() floats per channel, channel-major (r..., g..., b...).
struct TransferDataset {
    DatasetHeader header;
    std::vector<uint32_t> indices;  // 3 per record, scene-global
    std::vector<float> lambdas;     // 3 per record
    std::vector<Vec3f> position;
    std::vector<Vec3f> omega_o;
    std::vector<Vec3f> normal;
    std::vector<Vec3f> albedo;
    std::vector<float> targets;  // n_records * 3 * coeff_count()

    int coeff_count() const { return sh_count(int(header.degree)); }
    int target_stride() const { return 3 * coeff_count(); }
    size_t size() const { return size_t(header.n_records); }
    const float* target(size_t record) const {
        return targets.data() + record * size_t(target_stride());
    }
};

using BakeProgress = std::function<void(int64_t done, int64_t total)>;

// Streams `n_samples` records to `out_path`: surface points area-weighted
// over non-emissive, non-mirror meshes, outgoing directions uniform over the
// upper hemisphere. One RNG stream per record, so the file bytes depend only
// on the seed and config.
void bake_dataset(const Scene& scene, const BakeConfig& config,
                  const std::string& out_path, const BakeProgress& progress = {});

DatasetHeader read_dataset_header(const std::string& path);
TransferDataset load_dataset(const std::string& path);

}  // namespace prt
