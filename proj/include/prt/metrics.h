#pragma once

#include <string>

#include "prt/image.h"

namespace prt {

// All metrics require equal resolutions and throw ConfigError otherwise.
// They are pure functions of the pixel values: callers choose the domain
// (tone-mapped [0,1] or raw linear radiance) before calling.

// Root of the mean squared per-channel difference.
double rmse(const Image& a, const Image& b);

// Mean absolute per-channel difference.
double l1(const Image& a, const Image& b);

// Mean local SSIM of the Rec. 709 luminance over every fully interior 11x11
// window: Gaussian weights sigma = 1.5, k1 = 0.01, k2 = 0.03, dynamic range
// 1. Throws ConfigError when either dimension is smaller than the window.
double ssim(const Image& a, const Image& b);

struct MetricReport {
    double rmse = 0.0;
    double l1 = 0.0;
    double ssim = 1.0;
    std::string path_a, path_b;
    int width = 0, height = 0;
    bool linear = false;  // computed on raw values instead of tone-mapped

    std::string csv_row() const;
    static std::string csv_header();
};

// Tone-maps both images (unless `linear`), then computes all three metrics.
MetricReport compare(const Image& a, const Image& b, bool linear = false);

}  // namespace prt
