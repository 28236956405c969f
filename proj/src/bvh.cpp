#include "prt/bvh.h"

#include <algorithm>

namespace prt {

namespace {

constexpr int kMaxLeaf = 4;
constexpr int kBins = 12;

inline float surface_area(const Aabb& b) {
    if (!b.valid()) return 0.0f;
    const Vec3f e = b.extent();
    return 2.0f * (e.x * e.y + e.y * e.z + e.z * e.x);
}

inline bool hit_aabb(const Aabb& b, const Vec3f& origin, const Vec3f& inv_dir,
                     float t_min, float t_max) {
    float t0 = t_min, t1 = t_max;
    for (int a = 0; a < 3; ++a) {
        const float inv = (&inv_dir.x)[a];
        float near = ((&b.lo.x)[a] - (&origin.x)[a]) * inv;
        float far = ((&b.hi.x)[a] - (&origin.x)[a]) * inv;
        if (inv < 0.0f) std::swap(near, far);
        t0 = std::max(t0, near);
        t1 = std::min(t1, far);
        if (t0 > t1) return false;
    }
    return true;
}

}  // namespace

void Bvh::build(const std::vector<TriangleMesh>& meshes,
                std::vector<Prim> prims) {
    prims_ = std::move(prims);
    nodes_.clear();
    p0_.clear();
    e1_.clear();
    e2_.clear();
    if (prims_.empty()) return;

    std::vector<Aabb> boxes(prims_.size());
    std::vector<Vec3f> centroids(prims_.size());
    for (size_t i = 0; i < prims_.size(); ++i) {
        const TriangleMesh& m = meshes[prims_[i].mesh];
        uint32_t i0, i1, i2;
        m.triangle_vertices(prims_[i].tri, i0, i1, i2);
        Aabb b;
        b.expand(m.positions[i0]);
        b.expand(m.positions[i1]);
        b.expand(m.positions[i2]);
        boxes[i] = b;
        centroids[i] = b.center();
    }

    nodes_.reserve(2 * prims_.size());
    nodes_.emplace_back();
    build_range(0, 0, uint32_t(prims_.size()), centroids, boxes);

    p0_.resize(prims_.size());
    e1_.resize(prims_.size());
    e2_.resize(prims_.size());
    for (size_t i = 0; i < prims_.size(); ++i) {
        const TriangleMesh& m = meshes[prims_[i].mesh];
        uint32_t i0, i1, i2;
        m.triangle_vertices(prims_[i].tri, i0, i1, i2);
        p0_[i] = m.positions[i0];
        e1_[i] = m.positions[i1] - m.positions[i0];
        e2_[i] = m.positions[i2] - m.positions[i0];
    }
}

void Bvh::build_range(uint32_t node, uint32_t lo, uint32_t hi,
                      std::vector<Vec3f>& centroids, std::vector<Aabb>& boxes) {
    Aabb box, cbox;
    for (uint32_t i = lo; i < hi; ++i) {
        box.expand(boxes[i].lo);
        box.expand(boxes[i].hi);
        cbox.expand(centroids[i]);
    }
    nodes_[node].box = box;
    const uint32_t n = hi - lo;
    if (n <= kMaxLeaf) {
        nodes_[node].first = lo;
        nodes_[node].count = uint16_t(n);
        return;
    }

    const int axis = cbox.longest_axis();
    const float cmin = (&cbox.lo.x)[axis];
    const float cext = (&cbox.hi.x)[axis] - cmin;
    uint32_t mid = lo + n / 2;
    if (cext > 1e-12f) {
        // Binned SAH along the widest centroid axis.
        struct Bin {
            Aabb box;
            uint32_t count = 0;
        };
        Bin bins[kBins];
        auto bin_of = [&](uint32_t i) {
            const float c = ((&centroids[i].x)[axis] - cmin) / cext;
            return std::min(kBins - 1, int(c * kBins));
        };
        for (uint32_t i = lo; i < hi; ++i) {
            Bin& b = bins[bin_of(i)];
            b.box.expand(boxes[i].lo);
            b.box.expand(boxes[i].hi);
            b.count++;
        }
        float right_area[kBins];
        Aabb acc;
        uint32_t acc_n = 0;
        for (int b = kBins - 1; b > 0; --b) {
            if (bins[b].count) {
                acc.expand(bins[b].box.lo);
                acc.expand(bins[b].box.hi);
            }
            acc_n += bins[b].count;
            right_area[b] = surface_area(acc) * float(acc_n);
        }
        float best_cost = kInfinity;
        int best_split = -1;
        acc = Aabb{};
        acc_n = 0;
        for (int b = 0; b < kBins - 1; ++b) {
            if (bins[b].count) {
                acc.expand(bins[b].box.lo);
                acc.expand(bins[b].box.hi);
            }
            acc_n += bins[b].count;
            if (acc_n == 0 || acc_n == n) continue;
            const float cost = surface_area(acc) * float(acc_n) + right_area[b + 1];
            if (cost < best_cost) {
                best_cost = cost;
                best_split = b;
            }
        }
        if (best_split >= 0 && best_cost < surface_area(box) * float(n)) {
            uint32_t i = lo, j = hi;
            while (i < j) {
                if (bin_of(i) <= best_split) {
                    ++i;
                } else {
                    --j;
                    std::swap(prims_[i], prims_[j]);
                    std::swap(centroids[i], centroids[j]);
                    std::swap(boxes[i], boxes[j]);
                }
            }
            if (i > lo && i < hi) mid = i;
        }
    }

    const uint32_t left = uint32_t(nodes_.size());
    nodes_[node].first = left;
    nodes_[node].count = 0;
    nodes_[node].axis = uint16_t(axis);
    nodes_.emplace_back();
    nodes_.emplace_back();
    build_range(left, lo, mid, centroids, boxes);
    build_range(left + 1, mid, hi, centroids, boxes);
}

bool Bvh::hit_triangle(uint32_t i, const Ray& ray, float t_min, float t_max,
                       float& t, float& b1, float& b2) const {
    const Vec3f pvec = cross(ray.dir, e2_[i]);
    const float det = dot(e1_[i], pvec);
    if (std::abs(det) < 1e-12f) return false;
    const float inv_det = 1.0f / det;
    const Vec3f tvec = ray.origin - p0_[i];
    const float u = dot(tvec, pvec) * inv_det;
    if (u < 0.0f || u > 1.0f) return false;
    const Vec3f qvec = cross(tvec, e1_[i]);
    const float v = dot(ray.dir, qvec) * inv_det;
    if (v < 0.0f || u + v > 1.0f) return false;
    const float tt = dot(e2_[i], qvec) * inv_det;
    if (tt <= t_min || tt >= t_max) return false;
    t = tt;
    b1 = u;
    b2 = v;
    return true;
}

bool Bvh::intersect(const Ray& ray, float t_min, float t_max, BvhHit& hit) const {
    if (nodes_.empty()) return false;
    const Vec3f inv_dir(1.0f / ray.dir.x, 1.0f / ray.dir.y, 1.0f / ray.dir.z);
    uint32_t stack[64];
    int sp = 0;
    stack[sp++] = 0;
    bool found = false;
    float closest = t_max;
    while (sp > 0) {
        const Node& node = nodes_[stack[--sp]];
        if (!hit_aabb(node.box, ray.origin, inv_dir, t_min, closest)) continue;
        if (node.count > 0) {
            for (uint32_t i = node.first; i < node.first + node.count; ++i) {
                float t, b1, b2;
                if (hit_triangle(i, ray, t_min, closest, t, b1, b2)) {
                    closest = t;
                    hit.t = t;
                    hit.mesh_id = prims_[i].mesh;
                    hit.tri_id = prims_[i].tri;
                    hit.b1 = b1;
                    hit.b2 = b2;
                    found = true;
                }
            }
        } else {
            // Near child first for earlier occlusion culling.
            const bool flip = (&ray.dir.x)[node.axis] < 0.0f;
            stack[sp++] = node.first + (flip ? 0u : 1u);
            stack[sp++] = node.first + (flip ? 1u : 0u);
        }
    }
    return found;
}

bool Bvh::intersect_any(const Ray& ray, float t_min, float t_max) const {
    if (nodes_.empty()) return false;
    const Vec3f inv_dir(1.0f / ray.dir.x, 1.0f / ray.dir.y, 1.0f / ray.dir.z);
    uint32_t stack[64];
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
        const Node& node = nodes_[stack[--sp]];
        if (!hit_aabb(node.box, ray.origin, inv_dir, t_min, t_max)) continue;
        if (node.count > 0) {
            for (uint32_t i = node.first; i < node.first + node.count; ++i) {
                float t, b1, b2;
                if (hit_triangle(i, ray, t_min, t_max, t, b1, b2)) return true;
            }
        } else {
            stack[sp++] = node.first;
            stack[sp++] = node.first + 1;
        }
    }
    return false;
}

bool Bvh::intersect_brute(const Ray& ray, float t_min, float t_max,
                          BvhHit& hit) const {
    bool found = false;
    float closest = t_max;
    for (uint32_t i = 0; i < prims_.size(); ++i) {
        float t, b1, b2;
        if (hit_triangle(i, ray, t_min, closest, t, b1, b2)) {
            closest = t;
            hit.t = t;
            hit.mesh_id = prims_[i].mesh;
            hit.tri_id = prims_[i].tri;
            hit.b1 = b1;
            hit.b2 = b2;
            found = true;
        }
    }
    return found;
}

}  // namespace prt
