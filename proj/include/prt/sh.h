#pragma once

#include <cstdint>
#include <vector>

#include "prt/vec.h"

namespace prt {

// Real orthonormal spherical harmonics, graphics convention: no
// Condon-Shortley phase, z is the polar axis. Flat index k = l^2 + l + m.

constexpr int sh_count(int degree) { return (degree + 1) * (degree + 1); }
constexpr int sh_index(int l, int m) { return l * l + l + m; }

// Inverse of sh_index: k -> (l, m).
void sh_index_to_lm(int k, int& l, int& m);

// Y_l^m evaluated at a unit direction. Throws std::invalid_argument for
// l < 0 or |m| > l.
float sh_eval(int l, int m, const Vec3f& dir);

// All (L+1)^2 basis values at a unit direction, flat-index order.
// out must hold sh_count(L) floats.
void sh_basis(int degree, const Vec3f& dir, float* out);
std::vector<float> sh_basis(int degree, const Vec3f& dir);

// A degree-L coefficient block for 3 color channels, laid out
// [channel][l][m] — channel-major, flat SH index within a channel.
struct SHVector {
    int degree = 0;
    std::vector<float> coeffs;

    SHVector() = default;
    explicit SHVector(int degree_)
        : degree(degree_), coeffs(3 * sh_count(degree_), 0.0f) {}

    int per_channel() const { return sh_count(degree); }
    float& at(int channel, int k) { return coeffs[channel * per_channel() + k]; }
    float at(int channel, int k) const { return coeffs[channel * per_channel() + k]; }
    float& at(int channel, int l, int m) { return at(channel, sh_index(l, m)); }
    float at(int channel, int l, int m) const { return at(channel, sh_index(l, m)); }

    const float* channel(int c) const { return coeffs.data() + c * per_channel(); }
    float* channel(int c) { return coeffs.data() + c * per_channel(); }

    bool finite() const;

    SHVector& operator+=(const SHVector& o);
    SHVector& operator*=(float s);

    // Per-band windowing weights applied in place (Hanning over bands),
    // used as an optional deringing filter.
    void apply_hanning_window();

    // Reconstructed RGB value of the represented function at a direction.
    Vec3f eval(const Vec3f& dir) const;
};

// Per-channel inner product of two equal-degree coefficient blocks.
// Throws std::invalid_argument on degree mismatch.
Vec3f sh_dot(const SHVector& a, const SHVector& b);

// Per-band energy sum_m c_{l,m}^2 for one channel; size degree+1.
std::vector<float> sh_band_energy(const SHVector& v, int channel);

// Equirectangular radiance accumulation map (longitude x latitude).
// Texel (x, y) covers phi in [2pi x/W, 2pi (x+1)/W), theta in
// [pi y/H, pi (y+1)/H); theta is measured from +z.
struct EquirectMap {
    int width = 0;
    int height = 0;
    std::vector<Vec3f> sum;
    std::vector<uint32_t> count;

    EquirectMap() = default;
    EquirectMap(int w, int h)
        : width(w), height(h), sum(size_t(w) * h), count(size_t(w) * h, 0) {}

    size_t texel_index(int x, int y) const { return size_t(y) * width + x; }
    void clear();
    uint64_t total_count() const;
    // Fraction of texels with zero samples.
    float empty_fraction() const;

    // Mean radiance of a texel; zero when the texel has no samples.
    Vec3f texel_mean(int x, int y) const {
        const size_t i = texel_index(x, y);
        return count[i] > 0 ? sum[i] / float(count[i]) : Vec3f(0.0f);
    }

    // Unit direction through the texel center.
    Vec3f texel_direction(int x, int y) const;
    // Exact solid angle of a texel in row y; rows sum to 4 pi over the map.
    float texel_solid_angle(int y) const;
    // Maps a unit direction to its texel.
    void direction_to_texel(const Vec3f& dir, int& x, int& y) const;

    void add(const Vec3f& dir, const Vec3f& radiance);
};

// Projects per-texel mean radiance onto the SH basis:
// c[ch][k] = sum_texels mean_ch(texel) * Y_k(dir(texel)) * solid_angle(texel).
// Throws std::runtime_error when more than max_empty_fraction of the texels
// carry no samples (early accumulation frames are expected to be sparse;
// a map this empty has no usable estimate yet).
SHVector project_map(const EquirectMap& map, int degree,
                     float max_empty_fraction = 0.95f);

// Projection coefficients of max(cos theta, 0) onto zonal harmonics Y_l^0,
// indexed by l. Closed form; the Lambertian transfer kernel divided by
// albedo/pi.
std::vector<float> clamped_cosine_zonal(int degree);

// Expands zonal coefficients about +z into the full coefficient set about an
// arbitrary unit axis: c_{l,m} = sqrt(4 pi / (2l+1)) * zonal_l * Y_l^m(axis).
std::vector<float> rotate_zonal(const std::vector<float>& zonal, const Vec3f& axis);

}  // namespace prt
