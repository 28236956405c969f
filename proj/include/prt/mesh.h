#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prt/vec.h"

namespace prt {

struct TriangleMesh {
    std::string name;
    std::vector<Vec3f> positions;
    std::vector<Vec3f> normals;    // per vertex, unit length
    std::vector<uint32_t> indices;  // 3 per triangle
    int material_id = 0;
    int object_id = 0;

    size_t vertex_count() const { return positions.size(); }
    size_t triangle_count() const { return indices.size() / 3; }

    void triangle_vertices(uint32_t tri, uint32_t& i0, uint32_t& i1,
                           uint32_t& i2) const {
        i0 = indices[3 * tri];
        i1 = indices[3 * tri + 1];
        i2 = indices[3 * tri + 2];
    }

    float triangle_area(uint32_t tri) const {
        uint32_t i0, i1, i2;
        triangle_vertices(tri, i0, i1, i2);
        return 0.5f * length(cross(positions[i1] - positions[i0],
                                   positions[i2] - positions[i0]));
    }

    Aabb bounds() const {
        Aabb b;
        for (const Vec3f& p : positions) b.expand(p);
        return b;
    }

    // Recomputes unit vertex normals as area-weighted face-normal averages.
    void compute_smooth_normals();
    // Renormalizes existing normals in place.
    void renormalize_normals();
};

enum class MaterialKind { lambertian, glossy, mirror };

struct Material {
    std::string name;
    MaterialKind kind = MaterialKind::lambertian;
    Vec3f albedo{0.5f, 0.5f, 0.5f};
    float glossy_exponent = 32.0f;
};

enum class LightKind { area, point, environment };

struct LightSource {
    LightKind kind = LightKind::point;
    int mesh_id = -1;       // area: emitting mesh
    Vec3f position{0.0f};   // point
    Vec3f radiance{0.0f};   // area: W sr^-1 m^-2; environment: constant term
    Vec3f intensity{0.0f};  // point: W sr^-1
    std::string env_map_path;  // environment: optional equirect PFM
};

struct Ray {
    Vec3f origin;
    Vec3f dir;  // unit
};

struct Camera {
    Vec3f position{0.0f, 0.0f, 3.0f};
    Vec3f look_at{0.0f};
    Vec3f up{0.0f, 1.0f, 0.0f};
    float vfov_deg = 45.0f;
    int width = 256;
    int height = 256;

    // Pinhole ray through pixel (x, y) at sub-pixel offset jitter in [0,1)^2.
    Ray generate_ray(int x, int y, const Vec2f& jitter) const {
        const Vec3f fwd = normalize(look_at - position);
        const Vec3f right = normalize(cross(fwd, up));
        const Vec3f cam_up = cross(right, fwd);
        const float tan_half = std::tan(vfov_deg * kPi / 360.0f);
        const float aspect = float(width) / float(height);
        const float sx = (2.0f * (x + jitter.x) / width - 1.0f) * tan_half * aspect;
        const float sy = (1.0f - 2.0f * (y + jitter.y) / height) * tan_half;
        return {position, normalize(fwd + sx * right + sy * cam_up)};
    }
};

}  // namespace prt
