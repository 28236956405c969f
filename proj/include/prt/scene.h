#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "prt/bvh.h"
#include "prt/image.h"
#include "prt/mesh.h"
#include "prt/rng.h"
#include "prt/vec.h"

namespace prt {

struct SurfaceHit {
    float t = kInfinity;
    uint32_t mesh_id = 0;
    uint32_t tri_id = 0;
    float b0 = 0.0f, b1 = 0.0f, b2 = 0.0f;
    Vec3f position;
    Vec3f geo_normal;      // unit, from the winding
    Vec3f shading_normal;  // unit, barycentric vertex-normal blend
    int material_id = 0;
    int object_id = 0;
    uint32_t vi[3] = {0, 0, 0};  // scene-global vertex indices
    Vec3f emission{0.0f};        // non-zero on area-light surfaces
};

struct Scene {
    std::vector<TriangleMesh> meshes;
    std::vector<Material> materials;
    std::vector<LightSource> lights;
    Camera camera;
    Aabb probe_bounds;

    Bvh bvh;                       // every triangle
    std::vector<Bvh> object_bvhs;  // per object_id, for self-visibility
    std::vector<Vec3f> mesh_emission;
    std::vector<uint32_t> vertex_offset;  // per mesh, scene-global numbering
    uint64_t total_vertices = 0;
    int object_count = 0;
    std::vector<float> object_radius;  // bounding-sphere radius per object

    Vec3f env_constant{0.0f};
    bool has_environment = false;
    Image env_map;  // optional equirect radiance; empty when unused
    std::string source_path;

    // Builds the BVHs, vertex numbering, emission/object tables; validates
    // invariants. Must run after meshes/materials/lights change.
    void finalize();

    std::optional<SurfaceHit> intersect(const Vec3f& origin, const Vec3f& dir,
                                        float t_min = kSurfaceEpsilon,
                                        float t_max = kInfinity) const;
    // Anything between the two points (both endpoints pulled in by epsilon)?
    bool occluded(const Vec3f& a, const Vec3f& b) const;

    Vec3f env_radiance(const Vec3f& dir) const;
    const Material& material_of(const SurfaceHit& hit) const {
        return materials[hit.material_id];
    }
    bool mesh_is_emitter(uint32_t mesh_id) const {
        return max_component(mesh_emission[mesh_id]) > 0.0f;
    }

    // Fills a SurfaceHit from a raw BVH hit.
    SurfaceHit decorate(const BvhHit& h, const Vec3f& origin,
                        const Vec3f& dir) const;

    Aabb bounds() const;
    // Fingerprint over geometry and lights; probe accumulation resets when it
    // changes.
    uint64_t light_fingerprint() const;
};

// Ray origin pushed off the surface on the side of `dir`.
inline Vec3f offset_origin(const Vec3f& position, const Vec3f& geo_normal,
                           const Vec3f& dir) {
    const float s = dot(dir, geo_normal) >= 0.0f ? 1.0f : -1.0f;
    return position + s * kSurfaceEpsilon * geo_normal;
}

// Area-weighted point sampling over a filtered triangle subset.
class SurfaceSampler {
public:
    struct Sample {
        uint32_t mesh_id = 0;
        uint32_t tri_id = 0;
        float b0 = 0.0f, b1 = 0.0f, b2 = 0.0f;
        Vec3f position;
        Vec3f normal;  // unit shading normal
        Vec3f geo_normal;
        Vec3f albedo;
        uint32_t vi[3] = {0, 0, 0};  // scene-global
    };

    using MeshFilter = std::function<bool(const Scene&, uint32_t mesh_id)>;

    // Throws ConfigError when the filtered set has zero total area.
    explicit SurfaceSampler(const Scene& scene, const MeshFilter& filter = {});

    Sample sample(Rng& rng) const;
    double total_area() const { return total_area_; }
    size_t triangle_count() const { return entries_.size(); }
    // Probability density per unit area (uniform over the set).
    float area_pdf() const { return float(1.0 / total_area_); }

private:
    const Scene& scene_;
    std::vector<Bvh::Prim> entries_;
    std::vector<double> cdf_;
    double total_area_ = 0.0;
};

// Tessellated generators for reproducible test scenes.
TriangleMesh make_quad(const Vec3f& corner, const Vec3f& edge_u,
                       const Vec3f& edge_v, int subdivisions);
TriangleMesh make_sphere(const Vec3f& center, float radius, int subdivisions);
TriangleMesh make_box(const Vec3f& center, const Vec3f& half_extents,
                      int subdivisions, bool inward_normals = false);

// Parses the scene description (see docs/scene-format.md), builds and
// validates the Scene. Throws ConfigError with file/field context.
Scene load_scene(const std::string& path);

}  // namespace prt
