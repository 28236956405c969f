#include "prt/sh.h"

#include <cmath>
#include <stdexcept>

namespace prt {

void sh_index_to_lm(int k, int& l, int& m) {
    l = int(std::sqrt(double(k)));
    while ((l + 1) * (l + 1) <= k) ++l;
    while (l * l > k) --l;
    m = k - l * l - l;
}

namespace {

// sqrt((2l+1)/(4pi) * (l-|m|)!/(l+|m|)!)
double sh_k(int l, int m) {
    const int am = std::abs(m);
    double ratio = 1.0;
    for (int i = l - am + 1; i <= l + am; ++i) ratio *= i;
    return std::sqrt((2.0 * l + 1.0) / (4.0 * kPi) / ratio);
}

// Associated Legendre P_l^m without the Condon-Shortley phase, m >= 0.
double legendre_p(int l, int m, double x) {
    double pmm = 1.0;
    if (m > 0) {
        const double somx2 = std::sqrt(std::max(0.0, 1.0 - x * x));
        double fact = 1.0;
        for (int i = 1; i <= m; ++i) {
            pmm *= fact * somx2;
            fact += 2.0;
        }
    }
    if (l == m) return pmm;
    double pmmp1 = x * (2.0 * m + 1.0) * pmm;
    if (l == m + 1) return pmmp1;
    double pll = 0.0;
    for (int ll = m + 2; ll <= l; ++ll) {
        pll = ((2.0 * ll - 1.0) * x * pmmp1 - (ll + m - 1.0) * pmm) / (ll - m);
        pmm = pmmp1;
        pmmp1 = pll;
    }
    return pll;
}

float sh_eval_general(int l, int m, const Vec3f& dir) {
    const double z = std::clamp(double(dir.z), -1.0, 1.0);
    const int am = std::abs(m);
    const double p = legendre_p(l, am, z);
    if (m == 0) return float(sh_k(l, 0) * p);
    const double phi = std::atan2(double(dir.y), double(dir.x));
    const double k = std::sqrt(2.0) * sh_k(l, am) * p;
    return float(m > 0 ? k * std::cos(am * phi) : k * std::sin(am * phi));
}

// Polynomial forms for bands 0..4; these carry the hot loops.
void sh_basis_4(const Vec3f& d, float* o) {
    const float x = d.x, y = d.y, z = d.z;
    const float x2 = x * x, y2 = y * y, z2 = z * z;
    const float xy = x * y, xz = x * z, yz = y * z;

    o[0] = 0.28209479177387814f;

    o[1] = 0.4886025119029199f * y;
    o[2] = 0.4886025119029199f * z;
    o[3] = 0.4886025119029199f * x;

    o[4] = 1.0925484305920792f * xy;
    o[5] = 1.0925484305920792f * yz;
    o[6] = 0.31539156525252005f * (3.0f * z2 - 1.0f);
    o[7] = 1.0925484305920792f * xz;
    o[8] = 0.5462742152960396f * (x2 - y2);

    o[9] = 0.5900435899266435f * y * (3.0f * x2 - y2);
    o[10] = 2.890611442640554f * xy * z;
    o[11] = 0.4570457994644658f * y * (5.0f * z2 - 1.0f);
    o[12] = 0.3731763325901154f * z * (5.0f * z2 - 3.0f);
    o[13] = 0.4570457994644658f * x * (5.0f * z2 - 1.0f);
    o[14] = 1.445305721320277f * z * (x2 - y2);
    o[15] = 0.5900435899266435f * x * (x2 - 3.0f * y2);

    o[16] = 2.5033429417967046f * xy * (x2 - y2);
    o[17] = 1.7701307697799304f * yz * (3.0f * x2 - y2);
    o[18] = 0.9461746957575601f * xy * (7.0f * z2 - 1.0f);
    o[19] = 0.6690465435572892f * yz * (7.0f * z2 - 3.0f);
    o[20] = 0.10578554691520431f * (z2 * (35.0f * z2 - 30.0f) + 3.0f);
    o[21] = 0.6690465435572892f * xz * (7.0f * z2 - 3.0f);
    o[22] = 0.47308734787878004f * (x2 - y2) * (7.0f * z2 - 1.0f);
    o[23] = 1.7701307697799304f * xz * (x2 - 3.0f * y2);
    o[24] = 0.6258357354491761f * (x2 * (x2 - 3.0f * y2) - y2 * (3.0f * x2 - y2));
}

}  // namespace

float sh_eval(int l, int m, const Vec3f& dir) {
    if (l < 0 || std::abs(m) > l)
        throw std::invalid_argument("sh_eval: need l >= 0 and |m| <= l");
    return sh_eval_general(l, m, dir);
}

void sh_basis(int degree, const Vec3f& dir, float* out) {
    if (degree < 0) throw std::invalid_argument("sh_basis: negative degree");
    if (degree <= 4) {
        float b[25];
        sh_basis_4(dir, b);
        for (int k = 0; k < sh_count(degree); ++k) out[k] = b[k];
        return;
    }
    sh_basis_4(dir, out);
    for (int l = 5; l <= degree; ++l)
        for (int m = -l; m <= l; ++m) out[sh_index(l, m)] = sh_eval_general(l, m, dir);
}

std::vector<float> sh_basis(int degree, const Vec3f& dir) {
    std::vector<float> out(sh_count(degree));
    sh_basis(degree, dir, out.data());
    return out;
}

bool SHVector::finite() const {
    for (float c : coeffs)
        if (!std::isfinite(c)) return false;
    return true;
}

SHVector& SHVector::operator+=(const SHVector& o) {
    if (o.degree != degree)
        throw std::invalid_argument("SHVector::operator+=: degree mismatch");
    for (size_t i = 0; i < coeffs.size(); ++i) coeffs[i] += o.coeffs[i];
    return *this;
}

SHVector& SHVector::operator*=(float s) {
    for (float& c : coeffs) c *= s;
    return *this;
}

void SHVector::apply_hanning_window() {
    const float w = float(degree) + 1.0f;
    for (int c = 0; c < 3; ++c)
        for (int l = 0; l <= degree; ++l) {
            const float win = 0.5f * (1.0f + std::cos(kPi * float(l) / w));
            for (int m = -l; m <= l; ++m) at(c, l, m) *= win;
        }
}

Vec3f SHVector::eval(const Vec3f& dir) const {
    std::vector<float> b = sh_basis(degree, dir);
    Vec3f v(0.0f);
    for (int k = 0; k < per_channel(); ++k) {
        v.x += at(0, k) * b[k];
        v.y += at(1, k) * b[k];
        v.z += at(2, k) * b[k];
    }
    return v;
}

Vec3f sh_dot(const SHVector& a, const SHVector& b) {
    if (a.degree != b.degree)
        throw std::invalid_argument("sh_dot: degree mismatch");
    Vec3f v(0.0f);
    for (int k = 0; k < a.per_channel(); ++k) {
        v.x += a.at(0, k) * b.at(0, k);
        v.y += a.at(1, k) * b.at(1, k);
        v.z += a.at(2, k) * b.at(2, k);
    }
    return v;
}

std::vector<float> sh_band_energy(const SHVector& v, int channel) {
    std::vector<float> e(v.degree + 1, 0.0f);
    for (int l = 0; l <= v.degree; ++l)
        for (int m = -l; m <= l; ++m) {
            const float c = v.at(channel, l, m);
            e[l] += c * c;
        }
    return e;
}

void EquirectMap::clear() {
    std::fill(sum.begin(), sum.end(), Vec3f(0.0f));
    std::fill(count.begin(), count.end(), 0u);
}

uint64_t EquirectMap::total_count() const {
    uint64_t n = 0;
    for (uint32_t c : count) n += c;
    return n;
}

float EquirectMap::empty_fraction() const {
    size_t empty = 0;
    for (uint32_t c : count) empty += (c == 0);
    return count.empty() ? 1.0f : float(double(empty) / double(count.size()));
}

Vec3f EquirectMap::texel_direction(int x, int y) const {
    const double theta = kPi * (y + 0.5) / height;
    const double phi = kTwoPi * (x + 0.5) / width;
    const double st = std::sin(theta);
    return Vec3f(float(st * std::cos(phi)), float(st * std::sin(phi)),
                 float(std::cos(theta)));
}

float EquirectMap::texel_solid_angle(int y) const {
    const double t0 = kPi * double(y) / height;
    const double t1 = kPi * double(y + 1) / height;
    return float(kTwoPi / width * (std::cos(t0) - std::cos(t1)));
}

void EquirectMap::direction_to_texel(const Vec3f& dir, int& x, int& y) const {
    const double theta = std::acos(std::clamp(double(dir.z), -1.0, 1.0));
    double phi = std::atan2(double(dir.y), double(dir.x));
    if (phi < 0.0) phi += kTwoPi;
    x = std::clamp(int(phi / kTwoPi * width), 0, width - 1);
    y = std::clamp(int(theta / kPi * height), 0, height - 1);
}

void EquirectMap::add(const Vec3f& dir, const Vec3f& radiance) {
    int x, y;
    direction_to_texel(dir, x, y);
    const size_t i = texel_index(x, y);
    sum[i] += radiance;
    count[i] += 1;
}

SHVector project_map(const EquirectMap& map, int degree, float max_empty_fraction) {
    if (map.width <= 0 || map.height <= 0)
        throw std::invalid_argument("project_map: empty map");
    const float empty = map.empty_fraction();
    if (empty > max_empty_fraction)
        throw std::runtime_error("project_map: map too sparse (" +
                                 std::to_string(empty * 100.0f) + "% texels empty)");
    SHVector out(degree);
    const int n = sh_count(degree);
    std::vector<float> basis(n);
    std::vector<double> acc(3 * size_t(n), 0.0);
    for (int y = 0; y < map.height; ++y) {
        const float dw = map.texel_solid_angle(y);
        for (int x = 0; x < map.width; ++x) {
            const size_t i = map.texel_index(x, y);
            if (map.count[i] == 0) continue;
            const Vec3f mean = map.sum[i] / float(map.count[i]);
            sh_basis(degree, map.texel_direction(x, y), basis.data());
            for (int k = 0; k < n; ++k) {
                const double bw = double(basis[k]) * dw;
                acc[0 * n + k] += mean.x * bw;
                acc[1 * n + k] += mean.y * bw;
                acc[2 * n + k] += mean.z * bw;
            }
        }
    }
    for (int c = 0; c < 3; ++c)
        for (int k = 0; k < n; ++k) out.at(c, k) = float(acc[c * size_t(n) + k]);
    return out;
}

std::vector<float> clamped_cosine_zonal(int degree) {
    // Closed form of integral_{upper hemisphere} cos(theta) Y_l^0 dw:
    // non-zero for l = 1 and even l.
    std::vector<float> c(degree + 1, 0.0f);
    for (int l = 0; l <= degree; ++l) {
        if (l == 0) {
            c[l] = float(std::sqrt(kPi) / 2.0);
        } else if (l == 1) {
            c[l] = float(std::sqrt(kPi / 3.0));
        } else if (l % 2 == 0) {
            const int h = l / 2;
            double fact_l = 1.0, fact_h = 1.0;
            for (int i = 2; i <= l; ++i) fact_l *= i;
            for (int i = 2; i <= h; ++i) fact_h *= i;
            const double sign = (h % 2 == 1) ? 1.0 : -1.0;
            c[l] = float(kTwoPi * sign / ((l + 2.0) * (l - 1.0)) *
                         fact_l / (std::pow(2.0, double(l)) * fact_h * fact_h) *
                         std::sqrt((2.0 * l + 1.0) / (4.0 * kPi)));
        }
    }
    return c;
}

std::vector<float> rotate_zonal(const std::vector<float>& zonal, const Vec3f& axis) {
    const int degree = int(zonal.size()) - 1;
    std::vector<float> basis = sh_basis(degree, axis);
    std::vector<float> out(sh_count(degree), 0.0f);
    for (int l = 0; l <= degree; ++l) {
        const float scale = zonal[l] * float(std::sqrt(4.0 * kPi / (2.0 * l + 1.0)));
        for (int m = -l; m <= l; ++m)
            out[sh_index(l, m)] = scale * basis[sh_index(l, m)];
    }
    return out;
}

}  // namespace prt
