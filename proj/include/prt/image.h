#pragma once

#include <string>
#include <vector>

#include "prt/vec.h"

namespace prt {

// Linear RGB float image, row 0 at the top.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<Vec3f> pixels;

    Image() = default;
    Image(int w, int h) : width(w), height(h), pixels(size_t(w) * h) {}

    Vec3f& at(int x, int y) { return pixels[size_t(y) * width + x]; }
    const Vec3f& at(int x, int y) const { return pixels[size_t(y) * width + x]; }
    bool finite() const;
};

// PFM, color variant ("PF"), little-endian, bottom-up row order on disk.
void write_pfm(const std::string& path, const Image& img);
Image read_pfm(const std::string& path);

// 8-bit RGB PNG. Values are used as-is (caller tone-maps/encodes first).
void write_png(const std::string& path, const Image& img);

float srgb_encode(float linear);
Vec3f srgb_encode(const Vec3f& linear);

// Reinhard x/(1+x) on each channel, then sRGB; output in [0, 1].
Vec3f tonemap_pixel(const Vec3f& linear);
Image tonemap(const Image& img);

// Writes .pfm or .png depending on the file extension; PNG output is
// tone-mapped first, PFM stays linear.
void write_image_auto(const std::string& path, const Image& img);

}  // namespace prt
