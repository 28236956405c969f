#include "prt/renderer.h"

#include <algorithm>
#include <cmath>

#include "prt/errors.h"
#include "prt/parallel.h"
#include "prt/sh.h"

namespace prt {

namespace {

GBufferPixel pixel_from_hit(const SurfaceHit& hit, const Vec3f& view,
                            const Material& material) {
    GBufferPixel px;
    px.hit = true;
    px.position = hit.position;
    px.normal = hit.shading_normal;
    px.geo_normal = hit.geo_normal;
    if (dot(px.normal, view) < 0.0f) px.normal = -px.normal;
    if (dot(px.geo_normal, px.normal) < 0.0f) px.geo_normal = -px.geo_normal;
    px.view = view;
    px.albedo = material.albedo;
    px.kind = material.kind;
    px.mesh_id = hit.mesh_id;
    px.tri_id = hit.tri_id;
    px.vi[0] = hit.vi[0];
    px.vi[1] = hit.vi[1];
    px.vi[2] = hit.vi[2];
    px.b0 = hit.b0;
    px.b1 = hit.b1;
    px.b2 = hit.b2;
    px.material_id = hit.material_id;
    px.object_id = hit.object_id;
    return px;
}

Vec3f shade_point(const GBufferPixel& px, uint64_t stream,
                  const TransferSource& transfer, const ProbeGrid& grid,
                  const Scene& scene, const ShadeOptions& options,
                  bool& clamped) {
    const SHVector t = transfer.at(px, stream);
    SHVector light = interpolate_light(grid, px.position, px.normal, scene);
    if (options.hanning_window) light.apply_hanning_window();
    const Vec3f v = sh_dot(light, t);
    clamped = min_component(v) < 0.0f;
    return {std::max(v.x, 0.0f), std::max(v.y, 0.0f), std::max(v.z, 0.0f)};
}

}  // namespace

GBuffer generate_gbuffer(const Scene& scene, const Camera& camera) {
    if (camera.width <= 0 || camera.height <= 0)
        throw ConfigError("camera resolution must be positive");
    GBuffer gb(camera.width, camera.height);
    parallel_for(0, int64_t(gb.pixels.size()), [&](int64_t i) {
        const int x = int(i % gb.width);
        const int y = int(i / gb.width);
        const Ray ray = camera.generate_ray(x, y, {0.5f, 0.5f});
        const auto hit = scene.intersect(ray.origin, ray.dir);
        if (!hit) return;
        gb.pixels[size_t(i)] =
            pixel_from_hit(*hit, -ray.dir, scene.material_of(*hit));
    });
    return gb;
}

SHVector NeuralTransferSource::at(const GBufferPixel& px, uint64_t) const {
    const float lambda[3] = {px.b0, px.b1, px.b2};
    return model_.decode_at(px.vi, lambda, px.view, px.normal, px.albedo);
}

LambertTransferSource::LambertTransferSource(int degree)
    : degree_(degree), zonal_(clamped_cosine_zonal(degree)) {}

SHVector LambertTransferSource::at(const GBufferPixel& px, uint64_t) const {
    const std::vector<float> lobe = rotate_zonal(zonal_, px.normal);
    SHVector t(degree_);
    const float inv_pi = 1.0f / kPi;
    for (int c = 0; c < 3; ++c) {
        const float scale = (c == 0 ? px.albedo.x : c == 1 ? px.albedo.y
                                                           : px.albedo.z) *
                            inv_pi;
        for (int k = 0; k < t.per_channel(); ++k) t.at(c, k) = scale * lobe[size_t(k)];
    }
    return t;
}

SHVector OracleTransferSource::at(const GBufferPixel& px,
                                  uint64_t stream) const {
    BakePoint point;
    point.position = px.position;
    point.omega_o = px.view;
    point.normal = px.normal;
    point.geo_normal = px.geo_normal;
    point.object_id = px.object_id;
    Rng rng(config_.seed, stream);
    return compute_transfer(scene_, point, scene_.materials[size_t(px.material_id)],
                            config_, rng);
}

Image shade_gi(const GBuffer& gbuffer, const TransferSource& transfer,
               const ProbeGrid& grid, const Scene& scene,
               const ShadeOptions& options, ShadeStats* stats) {
    if (transfer.degree() != grid.config.degree)
        throw ConfigError("transfer degree does not match the probe grid");
    Image img(gbuffer.width, gbuffer.height);
    const size_t n = gbuffer.pixels.size();
    std::vector<uint8_t> clamped(n, 0), shaded(n, 0), mirror(n, 0);

    parallel_for(0, int64_t(n), [&](int64_t i) {
        const GBufferPixel& px = gbuffer.pixels[size_t(i)];
        if (!px.hit) return;
        if (px.kind == MaterialKind::mirror) {
            mirror[size_t(i)] = 1;
            return;
        }
        bool was_clamped = false;
        img.pixels[size_t(i)] = shade_point(px, uint64_t(i), transfer, grid,
                                            scene, options, was_clamped);
        clamped[size_t(i)] = was_clamped ? 1 : 0;
        shaded[size_t(i)] = 1;
    });

    if (stats) {
        for (size_t i = 0; i < n; ++i) {
            stats->shaded_pixels += shaded[i];
            stats->clamped_pixels += clamped[i];
            stats->mirror_pixels += mirror[i];
        }
    }
    return img;
}

Image shade_specular(const GBuffer& gbuffer, const Scene& scene,
                     const TransferSource& transfer, const ProbeGrid& grid,
                     int bounces, const ShadeOptions& options,
                     ShadeStats* stats) {
    if (bounces < 1) throw ConfigError("specular shading needs bounces >= 1");
    if (transfer.degree() != grid.config.degree)
        throw ConfigError("transfer degree does not match the probe grid");
    Image img(gbuffer.width, gbuffer.height);
    const size_t n = gbuffer.pixels.size();
    std::vector<uint8_t> clamped(n, 0), shaded(n, 0);

    parallel_for(0, int64_t(n), [&](int64_t i) {
        const GBufferPixel& px = gbuffer.pixels[size_t(i)];
        if (!px.hit || px.kind != MaterialKind::mirror) return;
        shaded[size_t(i)] = 1;

        Vec3f pos = px.position;
        Vec3f gn = px.geo_normal;
        Vec3f dir = reflect(-px.view, px.normal);
        Vec3f color(0.0f);
        for (int b = 0; b < bounces; ++b) {
            const auto hit = scene.intersect(offset_origin(pos, gn, dir), dir);
            if (!hit) {
                color = scene.env_radiance(dir);
                break;
            }
            const Material& material = scene.material_of(*hit);
            if (material.kind != MaterialKind::mirror) {
                const GBufferPixel target = pixel_from_hit(*hit, -dir, material);
                bool was_clamped = false;
                color = shade_point(target, uint64_t(i), transfer, grid, scene,
                                    options, was_clamped);
                if (was_clamped) clamped[size_t(i)] = 1;
                break;
            }
            Vec3f nn = hit->shading_normal;
            if (dot(nn, -dir) < 0.0f) nn = -nn;
            pos = hit->position;
            gn = dot(hit->geo_normal, nn) < 0.0f ? -hit->geo_normal
                                                 : hit->geo_normal;
            dir = reflect(dir, nn);
            // Chain longer than the budget: approximate the remaining
            // reflection with the environment.
            if (b + 1 == bounces) color = scene.env_radiance(dir);
        }
        img.pixels[size_t(i)] = color;
    });

    if (stats) {
        for (size_t i = 0; i < n; ++i) {
            stats->shaded_pixels += shaded[i];
            stats->clamped_pixels += clamped[i];
        }
    }
    return img;
}

void accumulate(Image& dst, const Image& src) {
    if (dst.width != src.width || dst.height != src.height)
        throw ConfigError("image resolutions do not match");
    for (size_t i = 0; i < dst.pixels.size(); ++i) dst.pixels[i] += src.pixels[i];
}

Image composite(const Image& gi, const Image* di, RenderMode mode) {
    Image out = gi;
    if (mode == RenderMode::gi_plus_di) {
        if (!di) throw ConfigError("gi_plus_di needs a direct-light image");
        accumulate(out, *di);
    }
    return out;
}

void composite_and_write(const Image& gi, const Image* di,
                         const RenderConfig& config,
                         const std::string& pfm_path,
                         const std::string& png_path) {
    const Image out = composite(gi, di, config.mode);
    write_pfm(pfm_path, out);
    if (png_path.empty()) return;
    Image ldr(out.width, out.height);
    for (size_t i = 0; i < out.pixels.size(); ++i)
        ldr.pixels[i] = tonemap_pixel(config.exposure * out.pixels[i]);
    write_png(png_path, ldr);
}

}  // namespace prt
