#include "prt/mesh.h"

namespace prt {

void TriangleMesh::compute_smooth_normals() {
    normals.assign(positions.size(), Vec3f(0.0f));
    for (size_t t = 0; t < triangle_count(); ++t) {
        uint32_t i0, i1, i2;
        triangle_vertices(uint32_t(t), i0, i1, i2);
        // Cross product length is twice the area: area weighting for free.
        const Vec3f fn = cross(positions[i1] - positions[i0],
                               positions[i2] - positions[i0]);
        normals[i0] += fn;
        normals[i1] += fn;
        normals[i2] += fn;
    }
    for (Vec3f& n : normals) {
        const float len = length(n);
        n = len > 1e-12f ? n / len : Vec3f(0.0f, 0.0f, 1.0f);
    }
}

void TriangleMesh::renormalize_normals() {
    for (Vec3f& n : normals) {
        const float len = length(n);
        n = len > 1e-12f ? n / len : Vec3f(0.0f, 0.0f, 1.0f);
    }
}

}  // namespace prt
