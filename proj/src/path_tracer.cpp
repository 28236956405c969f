#include "prt/path_tracer.h"

#include <algorithm>
#include <cmath>

#include "prt/brdf.h"
#include "prt/parallel.h"

namespace prt {

namespace {

bool keep_order(TraceMode mode, int order) {
    switch (mode) {
        case TraceMode::direct_only:
            return order <= 1;
        case TraceMode::gi_only:
            return order >= 2;
        case TraceMode::full:
            return true;
    }
    return true;
}

float balance(float this_pdf, float other_pdf) {
    return this_pdf / (this_pdf + other_pdf);
}

}  // namespace

PathTracer::PathTracer(const Scene& scene) : scene_(scene) {
    mesh_to_emitter_.assign(scene.meshes.size(), -1);
    for (uint32_t m = 0; m < scene.meshes.size(); ++m) {
        if (!scene.mesh_is_emitter(m)) continue;
        const uint32_t mesh_id = m;
        SurfaceSampler sampler(
            scene, [mesh_id](const Scene&, uint32_t id) { return id == mesh_id; });
        const float area = float(sampler.total_area());
        mesh_to_emitter_[m] = int(emitters_.size());
        emitters_.push_back(EmitterInfo{int(m), scene.mesh_emission[m],
                                        std::move(sampler), area});
    }
    for (const LightSource& l : scene.lights)
        if (l.kind == LightKind::point) has_point_or_env_ = true;
    if (scene.has_environment) has_point_or_env_ = true;
}

float PathTracer::emitter_pdf(const SurfaceHit& hit, const Vec3f& origin) const {
    const int ei = mesh_to_emitter_[hit.mesh_id];
    if (ei < 0) return 0.0f;
    const Vec3f d = hit.position - origin;
    const float dist2 = dot(d, d);
    if (dist2 <= 0.0f) return 0.0f;
    const Vec3f wi = d * (1.0f / std::sqrt(dist2));
    const float cos_l = dot(hit.geo_normal, -wi);
    if (cos_l <= 0.0f) return 0.0f;
    return emitters_[ei].sampler.area_pdf() * dist2 / cos_l;
}

Vec3f PathTracer::direct_light(const SurfaceHit& hit, const Vec3f& wo,
                               const Material& material, Rng& rng) const {
    Vec3f result(0.0f);
    const Vec3f n = hit.shading_normal;
    const Vec3f x = hit.position;

    for (const LightSource& l : scene_.lights) {
        if (l.kind != LightKind::point) continue;
        const Vec3f d = l.position - x;
        const float dist2 = dot(d, d);
        if (dist2 <= 0.0f) continue;
        const Vec3f wi = d * (1.0f / std::sqrt(dist2));
        const float cos_x = dot(n, wi);
        const Vec3f f = eval_bsdf(material, n, wo, wi);
        if (cos_x <= 0.0f || max_component(f) <= 0.0f) continue;
        if (scene_.occluded(offset_origin(x, hit.geo_normal, wi), l.position))
            continue;
        result += f * (cos_x / dist2) * l.intensity;
    }

    for (const EmitterInfo& e : emitters_) {
        const SurfaceSampler::Sample s = e.sampler.sample(rng);
        const Vec3f d = s.position - x;
        const float dist2 = dot(d, d);
        if (dist2 <= 1e-12f) continue;
        const float dist = std::sqrt(dist2);
        const Vec3f wi = d * (1.0f / dist);
        const float cos_l = dot(s.geo_normal, -wi);  // emission is one-sided
        if (cos_l <= 1e-6f) continue;
        const float cos_x = dot(n, wi);
        const Vec3f f = eval_bsdf(material, n, wo, wi);
        if (cos_x <= 0.0f || max_component(f) <= 0.0f) continue;
        if (scene_.occluded(offset_origin(x, hit.geo_normal, wi), s.position))
            continue;
        const float pdf_w = e.sampler.area_pdf() * dist2 / cos_l;
        if (!(pdf_w > 0.0f) || !std::isfinite(pdf_w)) continue;
        const float w = balance(pdf_w, pdf_bsdf(material, n, wo, wi));
        result += f * cos_x * e.radiance * (w / pdf_w);
    }

    if (scene_.has_environment) {
        const Vec3f wi = sample_uniform_sphere(rng.next_vec2());
        const float cos_x = dot(n, wi);
        const Vec3f f = eval_bsdf(material, n, wo, wi);
        if (cos_x > 0.0f && max_component(f) > 0.0f) {
            const Vec3f o = offset_origin(x, hit.geo_normal, wi);
            if (!scene_.bvh.intersect_any(Ray{o, wi}, kSurfaceEpsilon,
                                          kInfinity)) {
                const float pdf_w = uniform_sphere_pdf();
                const float w = balance(pdf_w, pdf_bsdf(material, n, wo, wi));
                result += f * cos_x * scene_.env_radiance(wi) * (w / pdf_w);
            }
        }
    }

    return result;
}

Vec3f PathTracer::path_contribution(const Vec3f& origin, const Vec3f& dir,
                                    const SurfaceHit* first_hit,
                                    bool first_emission,
                                    const PathConfig& config, Rng& rng) const {
    Vec3f radiance(0.0f);
    Vec3f beta(1.0f);
    int order = 0;        // non-delta scatters between sensor and current ray
    bool prev_delta = true;  // sensor and mirrors have no NEE partner
    float prev_pdf = 0.0f;
    Vec3f prev_pos = origin;
    Vec3f ray_o = origin;
    Vec3f ray_d = dir;

    for (int bounce = 0;; ++bounce) {
        std::optional<SurfaceHit> hit;
        if (bounce == 0 && first_hit)
            hit = *first_hit;
        else
            hit = scene_.intersect(ray_o, ray_d);

        if (!hit) {
            if (scene_.has_environment && keep_order(config.mode, order)) {
                const float w =
                    prev_delta ? 1.0f : balance(prev_pdf, uniform_sphere_pdf());
                radiance += beta * w * scene_.env_radiance(ray_d);
            }
            break;
        }

        const bool emission_allowed = first_emission || bounce > 0;
        if (emission_allowed && max_component(hit->emission) > 0.0f &&
            dot(hit->geo_normal, -ray_d) > 0.0f &&
            keep_order(config.mode, order)) {
            const float w = prev_delta
                                ? 1.0f
                                : balance(prev_pdf, emitter_pdf(*hit, prev_pos));
            radiance += beta * w * hit->emission;
        }

        if (bounce >= config.max_bounces) break;

        const Material& material = scene_.material_of(*hit);
        const Vec3f wo = -ray_d;

        if (material.kind == MaterialKind::mirror) {
            const Vec3f r = reflect(ray_d, hit->shading_normal);
            if (dot(r, hit->geo_normal) <= 0.0f) break;
            beta *= material.albedo;
            prev_delta = true;
            prev_pos = hit->position;
            ray_o = offset_origin(hit->position, hit->geo_normal, r);
            ray_d = r;
            continue;
        }

        order += 1;
        if (config.mode == TraceMode::direct_only && order >= 2) break;

        if (keep_order(config.mode, order))
            radiance += beta * direct_light(*hit, wo, material, rng);

        if (bounce >= config.rr_start) {
            const float q =
                std::clamp(luminance(material.albedo), 0.05f, 0.95f);
            if (rng.next_float() >= q) break;
            beta *= 1.0f / q;
        }

        const auto sample = sample_bsdf(material, hit->shading_normal, wo, rng);
        if (!sample) break;
        const float cos_x = dot(hit->shading_normal, sample->wi);
        if (cos_x <= 0.0f || max_component(sample->f) <= 0.0f) break;
        beta *= sample->f * (cos_x / sample->pdf);
        prev_delta = false;
        prev_pdf = sample->pdf;
        prev_pos = hit->position;
        ray_o = offset_origin(hit->position, hit->geo_normal, sample->wi);
        ray_d = sample->wi;
    }

    return radiance;
}

Vec3f PathTracer::trace_one(const Vec3f& origin, const Vec3f& dir,
                            const PathConfig& config, Rng& rng) const {
    return path_contribution(origin, dir, nullptr, true, config, rng);
}

Vec3f PathTracer::trace_radiance(const Vec3f& origin, const Vec3f& dir,
                                 const PathConfig& config, Rng& rng) const {
    double acc[3] = {0.0, 0.0, 0.0};
    const int n = std::max(config.spp, 1);
    for (int s = 0; s < n; ++s) {
        const Vec3f v = trace_one(origin, dir, config, rng);
        acc[0] += v.x;
        acc[1] += v.y;
        acc[2] += v.z;
    }
    return Vec3f(float(acc[0] / n), float(acc[1] / n), float(acc[2] / n));
}

Image PathTracer::render_reference(const Camera& camera,
                                   const PathConfig& config) const {
    Image img(camera.width, camera.height);
    const int64_t total = int64_t(camera.width) * camera.height;
    const int n = std::max(config.spp, 1);
    parallel_for(0, total, [&](int64_t idx) {
        const int x = int(idx % camera.width);
        const int y = int(idx / camera.width);
        Rng rng(config.seed, uint64_t(idx));
        double acc[3] = {0.0, 0.0, 0.0};
        for (int s = 0; s < n; ++s) {
            const Ray ray = camera.generate_ray(x, y, rng.next_vec2());
            const Vec3f v = trace_one(ray.origin, ray.dir, config, rng);
            acc[0] += v.x;
            acc[1] += v.y;
            acc[2] += v.z;
        }
        img.at(x, y) =
            Vec3f(float(acc[0] / n), float(acc[1] / n), float(acc[2] / n));
    });
    return img;
}

std::optional<PathTracer::ProbeSample> PathTracer::shade_probe_ray(
    const Vec3f& position, const Vec3f& dir, int bounces, Rng& rng) const {
    const auto hit = scene_.intersect(position, dir);
    if (!hit) return std::nullopt;
    if (scene_.mesh_is_emitter(hit->mesh_id)) return std::nullopt;

    PathConfig config;
    config.max_bounces = bounces;
    config.mode = TraceMode::full;
    config.spp = 1;
    const Vec3f radiance =
        path_contribution(position, dir, &*hit, false, config, rng);
    return ProbeSample{radiance, hit->position};
}

}  // namespace prt
