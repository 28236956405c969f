#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>

namespace prt {

constexpr float kPi = 3.14159265358979323846f;
constexpr float kTwoPi = 6.28318530717958647692f;
constexpr float kFourPi = 12.56637061435917295385f;
constexpr float kInvPi = 0.31830988618379067154f;
constexpr float kInfinity = std::numeric_limits<float>::infinity();

// Offset applied along the geometric normal to avoid self-intersection.
constexpr float kSurfaceEpsilon = 1e-4f;

struct Vec2f {
    float x = 0.0f, y = 0.0f;
};

struct Vec3f {
    float x = 0.0f, y = 0.0f, z = 0.0f;

    constexpr Vec3f() = default;
    constexpr Vec3f(float x_, float y_, float z_) : x(x_), y(y_), z(z_) {}
    explicit constexpr Vec3f(float s) : x(s), y(s), z(s) {}

    float operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    float& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

    Vec3f operator-() const { return {-x, -y, -z}; }
    Vec3f& operator+=(const Vec3f& v) { x += v.x; y += v.y; z += v.z; return *this; }
    Vec3f& operator-=(const Vec3f& v) { x -= v.x; y -= v.y; z -= v.z; return *this; }
    Vec3f& operator*=(float s) { x *= s; y *= s; z *= s; return *this; }
    Vec3f& operator*=(const Vec3f& v) { x *= v.x; y *= v.y; z *= v.z; return *this; }
    Vec3f& operator/=(float s) { return *this *= (1.0f / s); }
};

inline Vec3f operator+(Vec3f a, const Vec3f& b) { return a += b; }
inline Vec3f operator-(Vec3f a, const Vec3f& b) { return a -= b; }
inline Vec3f operator*(Vec3f a, const Vec3f& b) { return a *= b; }
inline Vec3f operator*(Vec3f a, float s) { return a *= s; }
inline Vec3f operator*(float s, Vec3f a) { return a *= s; }
inline Vec3f operator/(Vec3f a, float s) { return a /= s; }
inline bool operator==(const Vec3f& a, const Vec3f& b) { return a.x == b.x && a.y == b.y && a.z == b.z; }
inline bool operator!=(const Vec3f& a, const Vec3f& b) { return !(a == b); }

inline float dot(const Vec3f& a, const Vec3f& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3f cross(const Vec3f& a, const Vec3f& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline float length_squared(const Vec3f& v) { return dot(v, v); }
inline float length(const Vec3f& v) { return std::sqrt(dot(v, v)); }
inline Vec3f normalize(const Vec3f& v) { return v / length(v); }
inline Vec3f min(const Vec3f& a, const Vec3f& b) {
    return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}
inline Vec3f max(const Vec3f& a, const Vec3f& b) {
    return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}
inline Vec3f clamp(const Vec3f& v, float lo, float hi) {
    return {std::clamp(v.x, lo, hi), std::clamp(v.y, lo, hi), std::clamp(v.z, lo, hi)};
}
inline Vec3f lerp(const Vec3f& a, const Vec3f& b, float t) { return a + (b - a) * t; }
inline float max_component(const Vec3f& v) { return std::max(v.x, std::max(v.y, v.z)); }
inline float min_component(const Vec3f& v) { return std::min(v.x, std::min(v.y, v.z)); }
inline bool is_finite(const Vec3f& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}
inline Vec3f reflect(const Vec3f& d, const Vec3f& n) { return d - 2.0f * dot(d, n) * n; }
inline float luminance(const Vec3f& c) { return 0.2126f * c.x + 0.7152f * c.y + 0.0722f * c.z; }

inline std::ostream& operator<<(std::ostream& os, const Vec3f& v) {
    return os << "(" << v.x << ", " << v.y << ", " << v.z << ")";
}

// Orthonormal frame around a unit z axis (Duff et al. branchless construction).
struct Frame {
    Vec3f tangent, bitangent, normal;

    static Frame from_z(const Vec3f& n) {
        const float sign = std::copysign(1.0f, n.z);
        const float a = -1.0f / (sign + n.z);
        const float b = n.x * n.y * a;
        Frame f;
        f.tangent = {1.0f + sign * n.x * n.x * a, sign * b, -sign * n.x};
        f.bitangent = {b, sign + n.y * n.y * a, -n.y};
        f.normal = n;
        return f;
    }

    Vec3f to_world(const Vec3f& v) const {
        return v.x * tangent + v.y * bitangent + v.z * normal;
    }
};

struct Aabb {
    Vec3f lo{kInfinity, kInfinity, kInfinity};
    Vec3f hi{-kInfinity, -kInfinity, -kInfinity};

    void expand(const Vec3f& p) { lo = min(lo, p); hi = max(hi, p); }
    void expand(const Aabb& b) { lo = min(lo, b.lo); hi = max(hi, b.hi); }
    Vec3f center() const { return (lo + hi) * 0.5f; }
    Vec3f extent() const { return hi - lo; }
    bool contains(const Vec3f& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
    }
    bool valid() const { return lo.x <= hi.x && lo.y <= hi.y && lo.z <= hi.z; }
    int longest_axis() const {
        const Vec3f e = extent();
        if (e.x >= e.y && e.x >= e.z) return 0;
        return e.y >= e.z ? 1 : 2;
    }
};

}  // namespace prt
