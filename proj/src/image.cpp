#include "prt/image.h"

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace prt {

bool Image::finite() const {
    for (const Vec3f& p : pixels)
        if (!is_finite(p)) return false;
    return true;
}

void write_pfm(const std::string& path, const Image& img) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "PF\n" << img.width << " " << img.height << "\n-1.0\n";
    // Bottom row first.
    for (int y = img.height - 1; y >= 0; --y)
        f.write(reinterpret_cast<const char*>(&img.at(0, y)),
                std::streamsize(img.width) * 12);
    if (!f) throw std::runtime_error("write failed: " + path);
}

namespace {

std::string pfm_token(std::istream& in) {
    std::string t;
    in >> t;
    return t;
}

}  // namespace

Image read_pfm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    const std::string magic = pfm_token(f);
    if (magic != "PF" && magic != "Pf")
        throw std::runtime_error(path + ": not a PFM file");
    const bool gray = (magic == "Pf");
    int w = 0, h = 0;
    float scale = 0.0f;
    f >> w >> h >> scale;
    if (!f || w <= 0 || h <= 0 || scale == 0.0f)
        throw std::runtime_error(path + ": malformed PFM header");
    f.get();  // single whitespace byte after the scale
    const bool file_big_endian = scale > 0.0f;
    const int channels = gray ? 1 : 3;
    std::vector<float> row(size_t(w) * channels);
    Image img(w, h);
    for (int y = h - 1; y >= 0; --y) {
        f.read(reinterpret_cast<char*>(row.data()),
               std::streamsize(row.size()) * 4);
        if (!f) throw std::runtime_error(path + ": truncated PFM data");
        if (file_big_endian) {
            for (float& v : row) {
                uint32_t u;
                std::memcpy(&u, &v, 4);
                u = __builtin_bswap32(u);
                std::memcpy(&v, &u, 4);
            }
        }
        for (int x = 0; x < w; ++x) {
            img.at(x, y) = gray ? Vec3f(row[x])
                                : Vec3f(row[x * 3], row[x * 3 + 1], row[x * 3 + 2]);
        }
    }
    return img;
}

namespace {

void append_u32_be(std::string& s, uint32_t v) {
    s.push_back(char(v >> 24));
    s.push_back(char(v >> 16));
    s.push_back(char(v >> 8));
    s.push_back(char(v));
}

void append_chunk(std::string& out, const char type[4], const std::string& data) {
    append_u32_be(out, uint32_t(data.size()));
    const size_t type_at = out.size();
    out.append(type, 4);
    out += data;
    const uint32_t crc =
        uint32_t(crc32(0, reinterpret_cast<const Bytef*>(out.data() + type_at),
                       uInt(4 + data.size())));
    append_u32_be(out, crc);
}

}  // namespace

void write_png(const std::string& path, const Image& img) {
    const int w = img.width, h = img.height;
    // Raw scanlines: filter byte 0 + RGB8.
    std::vector<unsigned char> raw(size_t(h) * (1 + size_t(w) * 3));
    size_t p = 0;
    for (int y = 0; y < h; ++y) {
        raw[p++] = 0;
        for (int x = 0; x < w; ++x) {
            const Vec3f c = clamp(img.at(x, y), 0.0f, 1.0f);
            raw[p++] = (unsigned char)(c.x * 255.0f + 0.5f);
            raw[p++] = (unsigned char)(c.y * 255.0f + 0.5f);
            raw[p++] = (unsigned char)(c.z * 255.0f + 0.5f);
        }
    }
    uLongf bound = compressBound(uLong(raw.size()));
    std::string idat(bound, '\0');
    if (compress2(reinterpret_cast<Bytef*>(idat.data()), &bound, raw.data(),
                  uLong(raw.size()), 6) != Z_OK)
        throw std::runtime_error("png deflate failed");
    idat.resize(bound);

    std::string out("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    append_u32_be(ihdr, uint32_t(w));
    append_u32_be(ihdr, uint32_t(h));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // color type: truecolor
    ihdr.push_back(0);   // compression
    ihdr.push_back(0);   // filter
    ihdr.push_back(0);   // interlace
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", idat);
    append_chunk(out, "IEND", "");

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

float srgb_encode(float v) {
    v = std::clamp(v, 0.0f, 1.0f);
    return v <= 0.0031308f ? 12.92f * v
                           : 1.055f * std::pow(v, 1.0f / 2.4f) - 0.055f;
}

Vec3f srgb_encode(const Vec3f& v) {
    return Vec3f(srgb_encode(v.x), srgb_encode(v.y), srgb_encode(v.z));
}

Vec3f tonemap_pixel(const Vec3f& v) {
    const Vec3f c = max(v, Vec3f(0.0f));
    return srgb_encode(Vec3f(c.x / (1.0f + c.x), c.y / (1.0f + c.y),
                             c.z / (1.0f + c.z)));
}

Image tonemap(const Image& img) {
    Image out(img.width, img.height);
    for (size_t i = 0; i < img.pixels.size(); ++i)
        out.pixels[i] = tonemap_pixel(img.pixels[i]);
    return out;
}

void write_image_auto(const std::string& path, const Image& img) {
    const size_t dot = path.rfind('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
    if (ext == ".png")
        write_png(path, tonemap(img));
    else if (ext == ".pfm")
        write_pfm(path, img);
    else
        throw std::runtime_error("unsupported image extension: " + path);
}

}  // namespace prt
