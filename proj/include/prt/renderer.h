#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prt/image.h"
#include "prt/neural_transfer.h"
#include "prt/probes.h"
#include "prt/scene.h"
#include "prt/transfer.h"

namespace prt {

struct GBufferPixel {
    bool hit = false;
    Vec3f position;
    Vec3f normal;      // unit shading normal, flipped to the camera side
    Vec3f geo_normal;  // unit, same side as normal; for ray offsets
    Vec3f view;        // unit, surface -> camera
    Vec3f albedo;
    MaterialKind kind = MaterialKind::lambertian;
    uint32_t mesh_id = 0;
    uint32_t tri_id = 0;
    uint32_t vi[3] = {0, 0, 0};  // scene-global vertex indices
    float b0 = 0.0f, b1 = 0.0f, b2 = 0.0f;
    int material_id = 0;
    int object_id = 0;
};

struct GBuffer {
    int width = 0;
    int height = 0;
    std::vector<GBufferPixel> pixels;

    GBuffer() = default;
    GBuffer(int w, int h) : width(w), height(h), pixels(size_t(w) * h) {}

    GBufferPixel& at(int x, int y) { return pixels[size_t(y) * width + x]; }
    const GBufferPixel& at(int x, int y) const {
        return pixels[size_t(y) * width + x];
    }
};

// One primary ray through each pixel center; misses stay flagged off.
GBuffer generate_gbuffer(const Scene& scene, const Camera& camera);

// Per-point transfer coefficients consumed by the shading dot product.
// `stream` keys any internal sampling so evaluations are reproducible and
// independent of pixel scheduling.
class TransferSource {
public:
    virtual ~TransferSource() = default;
    virtual int degree() const = 0;
    virtual SHVector at(const GBufferPixel& px, uint64_t stream) const = 0;
};

// Decodes the trained model at the pixel's barycentric latent.
class NeuralTransferSource final : public TransferSource {
public:
    explicit NeuralTransferSource(const TransferModel& model) : model_(model) {}
    int degree() const override { return model_.degree; }
    SHVector at(const GBufferPixel& px, uint64_t stream) const override;

private:
    const TransferModel& model_;
};

// Analytic unshadowed Lambertian kernel: albedo/pi times the clamped-cosine
// lobe about the shading normal.
class LambertTransferSource final : public TransferSource {
public:
    explicit LambertTransferSource(int degree);
    int degree() const override { return degree_; }
    SHVector at(const GBufferPixel& px, uint64_t stream) const override;

private:
    int degree_;
    std::vector<float> zonal_;
};

// Monte Carlo ground truth evaluated per pixel; slow, for verification
// renders. Streams are keyed off config.seed and the pixel index.
class OracleTransferSource final : public TransferSource {
public:
    OracleTransferSource(const Scene& scene, const BakeConfig& config)
        : scene_(scene), config_(config) {}
    int degree() const override { return config_.degree; }
    SHVector at(const GBufferPixel& px, uint64_t stream) const override;

private:
    const Scene& scene_;
    BakeConfig config_;
};

struct ShadeOptions {
    bool hanning_window = false;  // band-window the light coefficients
};

struct ShadeStats {
    int64_t shaded_pixels = 0;
    int64_t clamped_pixels = 0;  // negative dot products clamped to zero
    int64_t mirror_pixels = 0;   // deferred to shade_specular
};

// Outgoing radiance per hit pixel as the transfer . light inner product,
// clamped at zero from below. Mirror pixels are left black for
// shade_specular. Throws ConfigError when the transfer degree does not match
// the probe grid's.
Image shade_gi(const GBuffer& gbuffer, const TransferSource& transfer,
               const ProbeGrid& grid, const Scene& scene,
               const ShadeOptions& options = {}, ShadeStats* stats = nullptr);

// Mirror pixels only: reflect the view ray, chase up to `bounces` chained
// mirror hits, then shade the first non-mirror surface with the same rule as
// shade_gi. Rays that escape (or chains that exceed the budget) read the
// environment.
Image shade_specular(const GBuffer& gbuffer, const Scene& scene,
                     const TransferSource& transfer, const ProbeGrid& grid,
                     int bounces = 1, const ShadeOptions& options = {},
                     ShadeStats* stats = nullptr);

enum class RenderMode { gi_only, gi_plus_di };

struct RenderConfig {
    RenderMode mode = RenderMode::gi_only;
    int width = 0, height = 0;  // 0: use the camera's resolution
    int specular_bounces = 1;
    float exposure = 1.0f;
    uint64_t seed = 0;
    int di_spp = 64;
    bool hanning_window = false;
    int probe_frames = 50;
};

// Pixel-wise sum; throws ConfigError on resolution mismatch.
void accumulate(Image& dst, const Image& src);

// gi + di in gi_plus_di mode (di required), gi alone otherwise.
Image composite(const Image& gi, const Image* di, RenderMode mode);

// Writes the composite as linear PFM, and, when png_path is non-empty, as an
// 8-bit PNG after exposure scaling, Reinhard, and sRGB encoding.
void composite_and_write(const Image& gi, const Image* di,
                         const RenderConfig& config,
                         const std::string& pfm_path,
                         const std::string& png_path = {});

}  // namespace prt
