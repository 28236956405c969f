#include <doctest.h>

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "prt/image.h"
#include "prt/rng.h"

using namespace prt;

namespace {

Image random_image(int w, int h, uint64_t seed) {
    Image img(w, h);
    Rng rng(seed, 0);
    for (Vec3f& p : img.pixels)
        p = Vec3f(rng.next_float() * 4.0f, rng.next_float(), rng.next_float() * 0.01f);
    return img;
}

std::vector<unsigned char> slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f);
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(f), {});
}

uint32_t read_be32(const unsigned char* p) {
    return uint32_t(p[0]) << 24 | uint32_t(p[1]) << 16 | uint32_t(p[2]) << 8 |
           uint32_t(p[3]);
}

}  // namespace

TEST_CASE("pfm round-trip is bit exact") {
    Image img = random_image(17, 9, 99);
    img.at(3, 4) = Vec3f(-0.5f, 1e-8f, 65504.0f);
    write_pfm("tmp_roundtrip.pfm", img);
    Image back = read_pfm("tmp_roundtrip.pfm");
    REQUIRE(back.width == img.width);
    REQUIRE(back.height == img.height);
    for (size_t i = 0; i < img.pixels.size(); ++i) {
        CHECK(back.pixels[i].x == img.pixels[i].x);
        CHECK(back.pixels[i].y == img.pixels[i].y);
        CHECK(back.pixels[i].z == img.pixels[i].z);
    }
}

TEST_CASE("pfm reader rejects junk") {
    {
        std::ofstream f("tmp_bad.pfm", std::ios::binary);
        f << "P6\n2 2\n255\nxxxx";
    }
    CHECK_THROWS(read_pfm("tmp_bad.pfm"));
    {
        std::ofstream f("tmp_trunc.pfm", std::ios::binary);
        f << "PF\n8 8\n-1.0\nshort";
    }
    CHECK_THROWS(read_pfm("tmp_trunc.pfm"));
    CHECK_THROWS(read_pfm("tmp_does_not_exist.pfm"));
}

TEST_CASE("png encodes a decodable truecolor image") {
    Image img(5, 3);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 5; ++x)
            img.at(x, y) = Vec3f(x / 4.0f, y / 2.0f, 1.0f - x / 4.0f);
    write_png("tmp_out.png", img);

    std::vector<unsigned char> data = slurp("tmp_out.png");
    REQUIRE(data.size() > 45);
    const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    CHECK(std::memcmp(data.data(), sig, 8) == 0);
    CHECK(std::memcmp(data.data() + 12, "IHDR", 4) == 0);
    CHECK(read_be32(data.data() + 16) == 5);  // width
    CHECK(read_be32(data.data() + 20) == 3);  // height
    CHECK(data[24] == 8);                     // bit depth
    CHECK(data[25] == 2);                     // truecolor

    // Walk chunks, inflate IDAT, undo the (always zero) filter bytes.
    std::vector<unsigned char> idat;
    size_t off = 8;
    while (off + 8 <= data.size()) {
        const uint32_t len = read_be32(data.data() + off);
        if (std::memcmp(data.data() + off + 4, "IDAT", 4) == 0)
            idat.insert(idat.end(), data.begin() + off + 8,
                        data.begin() + off + 8 + len);
        off += 12 + len;
    }
    REQUIRE(!idat.empty());
    std::vector<unsigned char> raw(3 * (1 + 5 * 3));
    uLongf raw_len = uLongf(raw.size());
    REQUIRE(uncompress(raw.data(), &raw_len, idat.data(), uLong(idat.size())) ==
            Z_OK);
    REQUIRE(raw_len == raw.size());
    CHECK(raw[0] == 0);  // filter byte
    CHECK(raw[1] == 0);
    CHECK(raw[2] == 0);
    CHECK(raw[3] == 255);
    // Pixel (4, 0) = (1, 0, 0).
    CHECK(raw[1 + 4 * 3 + 0] == 255);
    CHECK(raw[1 + 4 * 3 + 2] == 0);
}

TEST_CASE("srgb encode hits reference points") {
    CHECK(srgb_encode(0.0f) == doctest::Approx(0.0f));
    CHECK(srgb_encode(1.0f) == doctest::Approx(1.0f));
    CHECK(srgb_encode(0.0031308f) == doctest::Approx(0.040449936f).epsilon(1e-4));
    CHECK(srgb_encode(0.18f) == doctest::Approx(0.46135613f).epsilon(1e-4));
    CHECK(srgb_encode(2.0f) == doctest::Approx(1.0f));  // clamps
    CHECK(srgb_encode(-1.0f) == doctest::Approx(0.0f));
}

TEST_CASE("tone map compresses range into [0, 1]") {
    CHECK(tonemap_pixel(Vec3f(0.0f)).x == doctest::Approx(0.0f));
    // x/(1+x) at 1 is 0.5; sRGB(0.5) = 0.735357.
    CHECK(tonemap_pixel(Vec3f(1.0f)).x == doctest::Approx(0.7353569f).epsilon(1e-4));
    const Vec3f big = tonemap_pixel(Vec3f(1000.0f));
    CHECK(big.x > 0.99f);
    CHECK(big.x <= 1.0f);
    const Vec3f neg = tonemap_pixel(Vec3f(-5.0f));
    CHECK(neg.x == doctest::Approx(0.0f));
}

TEST_CASE("write_image_auto dispatches on extension") {
    Image img = random_image(4, 4, 1);
    CHECK_NOTHROW(write_image_auto("tmp_auto.pfm", img));
    CHECK_NOTHROW(write_image_auto("tmp_auto.png", img));
    CHECK_THROWS(write_image_auto("tmp_auto.jpg", img));
    Image back = read_pfm("tmp_auto.pfm");
    CHECK(back.pixels[5].x == img.pixels[5].x);
}
