#pragma once

#include <cstdint>
#include <vector>

#include "prt/mesh.h"
#include "prt/vec.h"

namespace prt {

// Minimal hit record produced by intersection; the scene layer decorates it
// with shading attributes.
struct BvhHit {
    float t = kInfinity;
    uint32_t mesh_id = 0;
    uint32_t tri_id = 0;  // local to the mesh
    float b1 = 0.0f;      // barycentric weights of vertices 1 and 2
    float b2 = 0.0f;
};

// Binned-SAH BVH over a triangle subset of a mesh list. Triangles are
// flattened to (p0, e1, e2) at build time so the brute-force reference path
// runs the exact same per-triangle arithmetic as the accelerated one.
class Bvh {
public:
    struct Prim {
        uint32_t mesh;
        uint32_t tri;
    };

    void build(const std::vector<TriangleMesh>& meshes, std::vector<Prim> prims);

    bool intersect(const Ray& ray, float t_min, float t_max, BvhHit& hit) const;
    bool intersect_any(const Ray& ray, float t_min, float t_max) const;
    // Exhaustive reference used by tests to validate traversal.
    bool intersect_brute(const Ray& ray, float t_min, float t_max,
                         BvhHit& hit) const;

    size_t primitive_count() const { return prims_.size(); }
    bool empty() const { return prims_.empty(); }
    Aabb bounds() const { return nodes_.empty() ? Aabb{} : nodes_[0].box; }

private:
    struct Node {
        Aabb box;
        uint32_t first = 0;  // leaf: index into prims_; inner: left child index
        uint16_t count = 0;  // leaf primitive count; 0 marks an inner node
        uint16_t axis = 0;
    };

    void build_range(uint32_t node, uint32_t lo, uint32_t hi,
                     std::vector<Vec3f>& centroids, std::vector<Aabb>& boxes);
    bool hit_triangle(uint32_t i, const Ray& ray, float t_min, float t_max,
                      float& t, float& b1, float& b2) const;

    std::vector<Node> nodes_;
    std::vector<Prim> prims_;
    std::vector<Vec3f> p0_, e1_, e2_;
};

}  // namespace prt
