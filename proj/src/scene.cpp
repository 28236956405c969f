#include "prt/scene.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "prt/errors.h"

namespace prt {

void Scene::finalize() {
    vertex_offset.resize(meshes.size());
    total_vertices = 0;
    object_count = 0;
    for (size_t i = 0; i < meshes.size(); ++i) {
        TriangleMesh& m = meshes[i];
        if (m.material_id < 0 || m.material_id >= int(materials.size()))
            throw ConfigError("mesh '" + m.name + "': material_id out of range");
        if (m.object_id < 0)
            throw ConfigError("mesh '" + m.name + "': negative object_id");
        if (m.indices.size() % 3 != 0)
            throw ConfigError("mesh '" + m.name + "': index count not a multiple of 3");
        for (uint32_t idx : m.indices)
            if (idx >= m.positions.size())
                throw ConfigError("mesh '" + m.name + "': triangle index out of range");
        if (m.normals.size() != m.positions.size())
            m.compute_smooth_normals();
        else
            m.renormalize_normals();
        vertex_offset[i] = uint32_t(total_vertices);
        total_vertices += m.vertex_count();
        object_count = std::max(object_count, m.object_id + 1);
    }

    for (const Material& mat : materials) {
        if (mat.albedo.x < 0.0f || mat.albedo.x > 1.0f || mat.albedo.y < 0.0f ||
            mat.albedo.y > 1.0f || mat.albedo.z < 0.0f || mat.albedo.z > 1.0f)
            throw ConfigError("material '" + mat.name + "': albedo outside [0,1]");
        if (mat.kind == MaterialKind::glossy && mat.glossy_exponent <= 0.0f)
            throw ConfigError("material '" + mat.name + "': glossy_exponent must be > 0");
    }

    mesh_emission.assign(meshes.size(), Vec3f(0.0f));
    has_environment = false;
    env_constant = Vec3f(0.0f);
    for (const LightSource& light : lights) {
        if (min_component(light.radiance) < 0.0f || min_component(light.intensity) < 0.0f)
            throw ConfigError("light with negative radiance/intensity");
        switch (light.kind) {
            case LightKind::area:
                if (light.mesh_id < 0 || light.mesh_id >= int(meshes.size()))
                    throw ConfigError("area light references missing mesh");
                mesh_emission[light.mesh_id] += light.radiance;
                break;
            case LightKind::point:
                break;
            case LightKind::environment:
                if (has_environment)
                    throw ConfigError("multiple environment lights");
                has_environment = true;
                env_constant = light.radiance;
                break;
        }
    }

    std::vector<Bvh::Prim> all;
    std::vector<std::vector<Bvh::Prim>> per_object(object_count);
    std::vector<Aabb> object_box(object_count);
    for (uint32_t mi = 0; mi < meshes.size(); ++mi) {
        const TriangleMesh& m = meshes[mi];
        for (uint32_t t = 0; t < m.triangle_count(); ++t) {
            all.push_back({mi, t});
            per_object[m.object_id].push_back({mi, t});
        }
        const Aabb b = m.bounds();
        if (b.valid()) {
            object_box[m.object_id].expand(b.lo);
            object_box[m.object_id].expand(b.hi);
        }
    }
    bvh.build(meshes, std::move(all));
    object_bvhs.resize(object_count);
    object_radius.resize(object_count);
    for (int o = 0; o < object_count; ++o) {
        object_bvhs[o].build(meshes, std::move(per_object[o]));
        object_radius[o] =
            object_box[o].valid() ? 0.5f * length(object_box[o].extent()) : 0.0f;
    }

    if (!probe_bounds.valid()) probe_bounds = bounds();
    const Aabb scene_box = bounds();
    if (scene_box.valid()) {
        const Vec3f slack(1e-4f);
        const Aabb grown{probe_bounds.lo - slack, probe_bounds.hi + slack};
        if (!grown.contains(scene_box.lo) || !grown.contains(scene_box.hi))
            throw ConfigError("probe_bounds does not contain all mesh vertices");
    }
}

std::optional<SurfaceHit> Scene::intersect(const Vec3f& origin, const Vec3f& dir,
                                           float t_min, float t_max) const {
    BvhHit raw;
    if (!bvh.intersect({origin, dir}, t_min, t_max, raw)) return std::nullopt;
    return decorate(raw, origin, dir);
}

SurfaceHit Scene::decorate(const BvhHit& raw, const Vec3f& /*origin*/,
                           const Vec3f& /*dir*/) const {
    SurfaceHit h;
    h.t = raw.t;
    h.mesh_id = raw.mesh_id;
    h.tri_id = raw.tri_id;
    h.b1 = raw.b1;
    h.b2 = raw.b2;
    h.b0 = 1.0f - raw.b1 - raw.b2;
    const TriangleMesh& m = meshes[raw.mesh_id];
    uint32_t i0, i1, i2;
    m.triangle_vertices(raw.tri_id, i0, i1, i2);
    const Vec3f p0 = m.positions[i0], p1 = m.positions[i1], p2 = m.positions[i2];
    h.position = h.b0 * p0 + h.b1 * p1 + h.b2 * p2;
    const Vec3f gn = cross(p1 - p0, p2 - p0);
    const float gl = length(gn);
    h.geo_normal = gl > 1e-12f ? gn / gl : Vec3f(0, 0, 1);
    const Vec3f sn =
        h.b0 * m.normals[i0] + h.b1 * m.normals[i1] + h.b2 * m.normals[i2];
    const float sl = length(sn);
    h.shading_normal = sl > 1e-6f ? sn / sl : h.geo_normal;
    h.material_id = m.material_id;
    h.object_id = m.object_id;
    h.vi[0] = vertex_offset[raw.mesh_id] + i0;
    h.vi[1] = vertex_offset[raw.mesh_id] + i1;
    h.vi[2] = vertex_offset[raw.mesh_id] + i2;
    h.emission = mesh_emission[raw.mesh_id];
    return h;
}

bool Scene::occluded(const Vec3f& a, const Vec3f& b) const {
    const Vec3f d = b - a;
    const float dist = length(d);
    if (dist < 2.0f * kSurfaceEpsilon) return false;
    return bvh.intersect_any({a, d / dist}, kSurfaceEpsilon,
                             dist - kSurfaceEpsilon);
}

Vec3f Scene::env_radiance(const Vec3f& dir) const {
    if (!has_environment) return Vec3f(0.0f);
    Vec3f v = env_constant;
    if (env_map.width > 0) {
        const double theta = std::acos(std::clamp(double(dir.z), -1.0, 1.0));
        double phi = std::atan2(double(dir.y), double(dir.x));
        if (phi < 0.0) phi += kTwoPi;
        const int x = std::clamp(int(phi / kTwoPi * env_map.width), 0,
                                 env_map.width - 1);
        const int y = std::clamp(int(theta / kPi * env_map.height), 0,
                                 env_map.height - 1);
        v += env_map.at(x, y);
    }
    return v;
}

Aabb Scene::bounds() const {
    Aabb b;
    for (const TriangleMesh& m : meshes) {
        const Aabb mb = m.bounds();
        if (mb.valid()) {
            b.expand(mb.lo);
            b.expand(mb.hi);
        }
    }
    return b;
}

namespace {

inline void fnv_bytes(uint64_t& h, const void* data, size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
}

}  // namespace

uint64_t Scene::light_fingerprint() const {
    uint64_t h = 1469598103934665603ull;
    const size_t nl = lights.size();
    fnv_bytes(h, &nl, sizeof(nl));
    for (const LightSource& l : lights) {
        const int kind = int(l.kind);
        fnv_bytes(h, &kind, sizeof(kind));
        fnv_bytes(h, &l.mesh_id, sizeof(l.mesh_id));
        fnv_bytes(h, &l.position, sizeof(l.position));
        fnv_bytes(h, &l.radiance, sizeof(l.radiance));
        fnv_bytes(h, &l.intensity, sizeof(l.intensity));
    }
    fnv_bytes(h, &env_constant, sizeof(env_constant));
    for (const TriangleMesh& m : meshes) {
        const size_t nv = m.positions.size();
        fnv_bytes(h, &nv, sizeof(nv));
        if (!m.positions.empty())
            fnv_bytes(h, m.positions.data(), m.positions.size() * sizeof(Vec3f));
    }
    return h;
}

SurfaceSampler::SurfaceSampler(const Scene& scene, const MeshFilter& filter)
    : scene_(scene) {
    for (uint32_t mi = 0; mi < scene.meshes.size(); ++mi) {
        if (filter && !filter(scene, mi)) continue;
        const TriangleMesh& m = scene.meshes[mi];
        for (uint32_t t = 0; t < m.triangle_count(); ++t) {
            const double a = m.triangle_area(t);
            if (!(a > 0.0) || !std::isfinite(a)) continue;
            entries_.push_back({mi, t});
            total_area_ += a;
            cdf_.push_back(total_area_);
        }
    }
    if (entries_.empty() || total_area_ <= 0.0)
        throw ConfigError("surface sampler: no positive-area triangles selected");
}

SurfaceSampler::Sample SurfaceSampler::sample(Rng& rng) const {
    const double u = rng.next_double() * total_area_;
    const size_t pick = std::min(
        size_t(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin()),
        entries_.size() - 1);
    const Bvh::Prim e = entries_[pick];
    const TriangleMesh& m = scene_.meshes[e.mesh];
    uint32_t i0, i1, i2;
    m.triangle_vertices(e.tri, i0, i1, i2);

    // sqrt warp: uniform density over the triangle.
    const float su = std::sqrt(rng.next_float());
    const float b1 = su * (1.0f - rng.next_float());
    // b1 + b2 = su <= 1 by construction.
    const float b2 = su - b1;
    const float b0 = 1.0f - su;

    Sample s;
    s.mesh_id = e.mesh;
    s.tri_id = e.tri;
    s.b0 = b0;
    s.b1 = b1;
    s.b2 = b2;
    s.position = b0 * m.positions[i0] + b1 * m.positions[i1] + b2 * m.positions[i2];
    const Vec3f sn = b0 * m.normals[i0] + b1 * m.normals[i1] + b2 * m.normals[i2];
    const Vec3f gn =
        cross(m.positions[i1] - m.positions[i0], m.positions[i2] - m.positions[i0]);
    const float gl = length(gn);
    s.geo_normal = gl > 1e-12f ? gn / gl : Vec3f(0, 0, 1);
    const float sl = length(sn);
    s.normal = sl > 1e-6f ? sn / sl : s.geo_normal;
    s.albedo = scene_.materials[m.material_id].albedo;
    s.vi[0] = scene_.vertex_offset[e.mesh] + i0;
    s.vi[1] = scene_.vertex_offset[e.mesh] + i1;
    s.vi[2] = scene_.vertex_offset[e.mesh] + i2;
    return s;
}

TriangleMesh make_quad(const Vec3f& corner, const Vec3f& edge_u,
                       const Vec3f& edge_v, int subdivisions) {
    const int n = std::max(1, subdivisions);
    TriangleMesh m;
    const Vec3f normal = normalize(cross(edge_u, edge_v));
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) {
            m.positions.push_back(corner + (float(i) / n) * edge_u +
                                  (float(j) / n) * edge_v);
            m.normals.push_back(normal);
        }
    auto vid = [n](int i, int j) { return uint32_t(j * (n + 1) + i); };
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            m.indices.insert(m.indices.end(),
                             {vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
            m.indices.insert(m.indices.end(),
                             {vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
        }
    return m;
}

TriangleMesh make_sphere(const Vec3f& center, float radius, int subdivisions) {
    // Icosphere: subdivide the icosahedron, push vertices to the sphere.
    const float t = (1.0f + std::sqrt(5.0f)) / 2.0f;
    std::vector<Vec3f> pos = {
        {-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
        {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
        {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1},
    };
    for (Vec3f& p : pos) p = normalize(p);
    std::vector<uint32_t> idx = {
        0, 11, 5,  0, 5,  1,  0,  1,  7,  0,  7,  10, 0,  10, 11,
        1, 5,  9,  5, 11, 4,  11, 10, 2,  10, 7,  6,  7,  1,  8,
        3, 9,  4,  3, 4,  2,  3,  2,  6,  3,  6,  8,  3,  8,  9,
        4, 9,  5,  2, 4,  11, 6,  2,  10, 8,  6,  7,  9,  8,  1,
    };

    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<uint32_t, uint32_t>, uint32_t> midpoint;
        auto mid = [&](uint32_t a, uint32_t b) {
            const auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            pos.push_back(normalize(0.5f * (pos[a] + pos[b])));
            const uint32_t id = uint32_t(pos.size() - 1);
            midpoint.emplace(key, id);
            return id;
        };
        std::vector<uint32_t> next;
        next.reserve(idx.size() * 4);
        for (size_t f = 0; f < idx.size(); f += 3) {
            const uint32_t a = idx[f], b = idx[f + 1], c = idx[f + 2];
            const uint32_t ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
            next.insert(next.end(), {a, ab, ca, b, bc, ab, c, ca, bc, ab, bc, ca});
        }
        idx = std::move(next);
    }

    TriangleMesh m;
    m.positions.reserve(pos.size());
    m.normals.reserve(pos.size());
    for (const Vec3f& p : pos) {
        m.positions.push_back(center + radius * p);
        m.normals.push_back(p);
    }
    m.indices = std::move(idx);
    return m;
}

TriangleMesh make_box(const Vec3f& c, const Vec3f& h, int subdivisions,
                      bool inward_normals) {
    struct Face {
        Vec3f corner, u, v;
    };
    const Face faces[6] = {
        {{c.x + h.x, c.y - h.y, c.z - h.z}, {0, 2 * h.y, 0}, {0, 0, 2 * h.z}},
        {{c.x - h.x, c.y - h.y, c.z - h.z}, {0, 0, 2 * h.z}, {0, 2 * h.y, 0}},
        {{c.x - h.x, c.y + h.y, c.z - h.z}, {0, 0, 2 * h.z}, {2 * h.x, 0, 0}},
        {{c.x - h.x, c.y - h.y, c.z - h.z}, {2 * h.x, 0, 0}, {0, 0, 2 * h.z}},
        {{c.x - h.x, c.y - h.y, c.z + h.z}, {2 * h.x, 0, 0}, {0, 2 * h.y, 0}},
        {{c.x - h.x, c.y - h.y, c.z - h.z}, {0, 2 * h.y, 0}, {2 * h.x, 0, 0}},
    };
    TriangleMesh m;
    for (const Face& f : faces) {
        const TriangleMesh q = inward_normals
                                   ? make_quad(f.corner, f.v, f.u, subdivisions)
                                   : make_quad(f.corner, f.u, f.v, subdivisions);
        const uint32_t base = uint32_t(m.positions.size());
        m.positions.insert(m.positions.end(), q.positions.begin(), q.positions.end());
        m.normals.insert(m.normals.end(), q.normals.begin(), q.normals.end());
        for (uint32_t i : q.indices) m.indices.push_back(base + i);
    }
    return m;
}

}  // namespace prt
