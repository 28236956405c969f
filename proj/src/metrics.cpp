#include "prt/metrics.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "prt/errors.h"
#include "prt/parallel.h"

namespace prt {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (k1 * dynamic range)^2
constexpr double kC2 = 0.03 * 0.03;

void check_sizes(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height)
        throw ConfigError("image resolutions do not match");
    if (a.width <= 0 || a.height <= 0)
        throw ConfigError("metrics need non-empty images");
}

const std::vector<double>& gaussian_window() {
    static const std::vector<double> w = [] {
        std::vector<double> v(kWindow * kWindow);
        double total = 0.0;
        for (int y = 0; y < kWindow; ++y)
            for (int x = 0; x < kWindow; ++x) {
                const double dx = x - (kWindow - 1) / 2.0;
                const double dy = y - (kWindow - 1) / 2.0;
                const double g =
                    std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
                v[size_t(y) * kWindow + x] = g;
                total += g;
            }
        for (double& g : v) g /= total;
        return v;
    }();
    return w;
}

}  // namespace

double rmse(const Image& a, const Image& b) {
    check_sizes(a, b);
    double sum = 0.0;
    for (size_t i = 0; i < a.pixels.size(); ++i) {
        const Vec3f d = a.pixels[i] - b.pixels[i];
        sum += double(d.x) * d.x + double(d.y) * d.y + double(d.z) * d.z;
    }
    return std::sqrt(sum / (3.0 * double(a.pixels.size())));
}

double l1(const Image& a, const Image& b) {
    check_sizes(a, b);
    double sum = 0.0;
    for (size_t i = 0; i < a.pixels.size(); ++i) {
        const Vec3f d = a.pixels[i] - b.pixels[i];
        sum += std::abs(double(d.x)) + std::abs(double(d.y)) +
               std::abs(double(d.z));
    }
    return sum / (3.0 * double(a.pixels.size()));
}

double ssim(const Image& a, const Image& b) {
    check_sizes(a, b);
    if (a.width < kWindow || a.height < kWindow)
        throw ConfigError("image smaller than the SSIM window");

    const size_t n = a.pixels.size();
    std::vector<double> la(n), lb(n);
    for (size_t i = 0; i < n; ++i) {
        la[i] = double(luminance(a.pixels[i]));
        lb[i] = double(luminance(b.pixels[i]));
    }

    const std::vector<double>& w = gaussian_window();
    const int out_w = a.width - kWindow + 1;
    const int out_h = a.height - kWindow + 1;
    std::vector<double> row_sums(size_t(out_h), 0.0);

    parallel_for(0, out_h, [&](int64_t wy) {
        double row = 0.0;
        for (int wx = 0; wx < out_w; ++wx) {
            double mu_a = 0.0, mu_b = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
            for (int y = 0; y < kWindow; ++y) {
                const size_t base = size_t(wy + y) * a.width + size_t(wx);
                const size_t wbase = size_t(y) * kWindow;
                for (int x = 0; x < kWindow; ++x) {
                    const double g = w[wbase + size_t(x)];
                    const double va = la[base + size_t(x)];
                    const double vb = lb[base + size_t(x)];
                    mu_a += g * va;
                    mu_b += g * vb;
                    aa += g * (va * va);
                    bb += g * (vb * vb);
                    ab += g * (va * vb);
                }
            }
            // Grouped so that swapping the inputs (or comparing an image
            // with itself) reuses identical roundings: symmetry and
            // self-SSIM == 1 hold exactly.
            const double var_a = aa - (mu_a * mu_a);
            const double var_b = bb - (mu_b * mu_b);
            const double cov = ab - (mu_a * mu_b);
            const double lum_n = 2.0 * (mu_a * mu_b) + kC1;
            const double lum_d = ((mu_a * mu_a) + (mu_b * mu_b)) + kC1;
            const double str_n = 2.0 * cov + kC2;
            const double str_d = (var_a + var_b) + kC2;
            row += (lum_n * str_n) / (lum_d * str_d);
        }
        row_sums[size_t(wy)] = row;
    });

    double total = 0.0;
    for (double r : row_sums) total += r;
    return total / (double(out_w) * double(out_h));
}

std::string MetricReport::csv_header() {
    return "path_a,path_b,width,height,domain,rmse,l1,ssim";
}

std::string MetricReport::csv_row() const {
    std::ostringstream os;
    os.precision(9);
    os << path_a << ',' << path_b << ',' << width << ',' << height << ','
       << (linear ? "linear" : "tonemapped") << ',' << rmse << ',' << l1 << ','
       << ssim;
    return os.str();
}

MetricReport compare(const Image& a, const Image& b, bool linear) {
    check_sizes(a, b);
    MetricReport report;
    report.width = a.width;
    report.height = a.height;
    report.linear = linear;
    if (linear) {
        report.rmse = rmse(a, b);
        report.l1 = l1(a, b);
        report.ssim = ssim(a, b);
    } else {
        const Image ta = tonemap(a);
        const Image tb = tonemap(b);
        report.rmse = rmse(ta, tb);
        report.l1 = l1(ta, tb);
        report.ssim = ssim(ta, tb);
    }
    return report;
}

}  // namespace prt
