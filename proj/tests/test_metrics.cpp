#include <cmath>
#include <vector>

#include "doctest.h"
#include "prt/errors.h"
#include "prt/metrics.h"
#include "prt/rng.h"

using namespace prt;

namespace {

Image constant_image(int w, int h, const Vec3f& c) {
    Image img(w, h);
    for (Vec3f& p : img.pixels) p = c;
    return img;
}

Image random_image(int w, int h, uint64_t seed, float lo = 0.0f,
                   float hi = 1.0f) {
    Image img(w, h);
    Rng rng(seed, 0);
    for (Vec3f& p : img.pixels) {
        p.x = lo + (hi - lo) * rng.next_float();
        p.y = lo + (hi - lo) * rng.next_float();
        p.z = lo + (hi - lo) * rng.next_float();
    }
    return img;
}

// Same math as the library SSIM, written independently: unnormalized
// Gaussian taps divided inside each window.
double ssim_reference(const Image& a, const Image& b) {
    const int win = 11;
    const double sigma = 1.5;
    double total = 0.0;
    int windows = 0;
    for (int wy = 0; wy + win <= a.height; ++wy)
        for (int wx = 0; wx + win <= a.width; ++wx) {
            double wsum = 0, mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
            for (int y = 0; y < win; ++y)
                for (int x = 0; x < win; ++x) {
                    const double dx = x - 5.0, dy = y - 5.0;
                    const double g =
                        std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
                    const double va = double(luminance(a.at(wx + x, wy + y)));
                    const double vb = double(luminance(b.at(wx + x, wy + y)));
                    wsum += g;
                    mu_a += g * va;
                    mu_b += g * vb;
                    aa += g * va * va;
                    bb += g * vb * vb;
                    ab += g * va * vb;
                }
            mu_a /= wsum;
            mu_b /= wsum;
            aa /= wsum;
            bb /= wsum;
            ab /= wsum;
            const double c1 = 1e-4, c2 = 9e-4;
            const double va = aa - mu_a * mu_a, vb = bb - mu_b * mu_b;
            const double cov = ab - mu_a * mu_b;
            total += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                     ((mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2));
            ++windows;
        }
    return total / windows;
}

}  // namespace

TEST_CASE("rmse/l1: identical and constant images") {
    const Image a = random_image(24, 16, 1);
    CHECK(rmse(a, a) == 0.0);
    CHECK(l1(a, a) == 0.0);

    const Image zero = constant_image(24, 16, Vec3f(0.0f));
    const Image half = constant_image(24, 16, Vec3f(0.5f));
    CHECK(rmse(zero, half) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(l1(zero, half) == doctest::Approx(0.5).epsilon(1e-12));

    CHECK_THROWS_AS(rmse(a, Image(23, 16)), ConfigError);
    CHECK_THROWS_AS(l1(a, Image(24, 15)), ConfigError);
    CHECK_THROWS_AS(rmse(Image(), Image()), ConfigError);
}

TEST_CASE("rmse/l1: direct-formula oracle and Jensen inequality") {
    for (uint64_t seed = 0; seed < 8; ++seed) {
        const Image a = random_image(17, 13, 2 * seed);
        const Image b = random_image(17, 13, 2 * seed + 1);

        double sq = 0.0, ad = 0.0;
        for (size_t i = 0; i < a.pixels.size(); ++i) {
            const float ds[3] = {a.pixels[i].x - b.pixels[i].x,
                                 a.pixels[i].y - b.pixels[i].y,
                                 a.pixels[i].z - b.pixels[i].z};
            for (float d : ds) {
                sq += double(d) * d;
                ad += std::abs(double(d));
            }
        }
        const double n = 3.0 * double(a.pixels.size());
        CHECK(rmse(a, b) == doctest::Approx(std::sqrt(sq / n)).epsilon(1e-7));
        CHECK(l1(a, b) == doctest::Approx(ad / n).epsilon(1e-7));
        CHECK(l1(a, b) <= rmse(a, b) + 1e-12);
        CHECK(rmse(a, b) == rmse(b, a));
        CHECK(l1(a, b) == l1(b, a));
    }
}

TEST_CASE("rmse/l1: exact translation identity") {
    // Values on the 1/64 lattice stay exact under a +0.5 shift.
    Image a(16, 16), b(16, 16);
    Rng rng(7, 0);
    for (size_t i = 0; i < a.pixels.size(); ++i) {
        a.pixels[i] = Vec3f(float(rng.next_below(65)) / 64.0f,
                            float(rng.next_below(65)) / 64.0f,
                            float(rng.next_below(65)) / 64.0f);
        b.pixels[i] = Vec3f(float(rng.next_below(65)) / 64.0f,
                            float(rng.next_below(65)) / 64.0f,
                            float(rng.next_below(65)) / 64.0f);
    }
    Image as = a, bs = b;
    for (Vec3f& p : as.pixels) p += Vec3f(0.5f);
    for (Vec3f& p : bs.pixels) p += Vec3f(0.5f);
    CHECK(rmse(as, bs) == rmse(a, b));
    CHECK(l1(as, bs) == l1(a, b));
}

TEST_CASE("ssim: self-comparison is exactly one") {
    const Image a = random_image(32, 24, 11);
    CHECK(ssim(a, a) == 1.0);
    const Image c = constant_image(16, 16, Vec3f(0.3f));
    CHECK(ssim(c, c) == 1.0);
}

TEST_CASE("ssim: matches an independent implementation") {
    const Image a = random_image(20, 15, 21);
    const Image b = random_image(20, 15, 22);
    CHECK(ssim(a, b) == doctest::Approx(ssim_reference(a, b)).epsilon(1e-6));
    CHECK(ssim(a, b) == ssim(b, a));
}

TEST_CASE("ssim: inverted high-contrast pattern scores low") {
    Image a(33, 33);
    for (int y = 0; y < 33; ++y)
        for (int x = 0; x < 33; ++x)
            a.at(x, y) = ((x / 4 + y / 4) % 2 == 0) ? Vec3f(0.9f) : Vec3f(0.1f);
    Image inv(33, 33);
    for (size_t i = 0; i < a.pixels.size(); ++i)
        inv.pixels[i] = Vec3f(1.0f) - a.pixels[i];
    CHECK(ssim(a, inv) < 0.5);

    // Mild noise barely moves it; strong noise drops it further.
    Image mild = a, strong = a;
    Rng rng(5, 0);
    for (size_t i = 0; i < a.pixels.size(); ++i) {
        const float u = rng.next_float() - 0.5f;
        mild.pixels[i] += Vec3f(0.02f * u);
        strong.pixels[i] += Vec3f(0.6f * u);
    }
    CHECK(ssim(a, mild) > 0.95);
    CHECK(ssim(a, strong) < ssim(a, mild));
}

TEST_CASE("ssim: stable under a shared luminance shift") {
    Image a = random_image(24, 24, 30, 0.2f, 0.6f);
    // Zero-mean structured difference keeps the means aligned.
    Image b = a;
    for (size_t i = 0; i < b.pixels.size(); ++i)
        b.pixels[i] += Vec3f((i % 2 == 0) ? 0.05f : -0.05f);
    const double before = ssim(a, b);
    Image as = a, bs = b;
    for (Vec3f& p : as.pixels) p += Vec3f(0.2f);
    for (Vec3f& p : bs.pixels) p += Vec3f(0.2f);
    CHECK(std::abs(ssim(as, bs) - before) < 1e-3);

    CHECK_THROWS_AS(ssim(Image(10, 32), Image(10, 32)), ConfigError);
    CHECK_THROWS_AS(ssim(Image(32, 10), Image(32, 10)), ConfigError);
}

TEST_CASE("compare: tone-mapped by default, linear on request") {
    const Image a = random_image(16, 16, 40, 0.0f, 4.0f);
    const Image b = random_image(16, 16, 41, 0.0f, 4.0f);

    const MetricReport lin = compare(a, b, true);
    CHECK(lin.rmse == rmse(a, b));
    CHECK(lin.l1 == l1(a, b));
    CHECK(lin.ssim == ssim(a, b));
    CHECK(lin.linear);
    CHECK(lin.width == 16);
    CHECK(lin.height == 16);

    const MetricReport tm = compare(a, b, false);
    const Image ta = tonemap(a), tb = tonemap(b);
    CHECK(tm.rmse == rmse(ta, tb));
    CHECK(tm.l1 == l1(ta, tb));
    CHECK(tm.ssim == ssim(ta, tb));
    CHECK(tm.rmse != lin.rmse);

    const MetricReport same = compare(a, a);
    CHECK(same.rmse == 0.0);
    CHECK(same.l1 == 0.0);
    CHECK(same.ssim == 1.0);

    CHECK(MetricReport::csv_header().find("rmse") != std::string::npos);
    CHECK(tm.csv_row().find("tonemapped") != std::string::npos);
}
