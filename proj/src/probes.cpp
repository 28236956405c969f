#include "prt/probes.h"

#include <atomic>
#include <cmath>

#include "prt/errors.h"
#include "prt/parallel.h"

namespace prt {

namespace {

void decompose(int index, int n, int& i, int& j, int& k) {
    i = index % n;
    j = (index / n) % n;
    k = index / (n * n);
}

// Fibonacci spiral: evenly spread unit directions, no RNG needed.
Vec3f fibonacci_dir(int s, int count) {
    const float golden = 2.399963229728653f;
    const float z = 1.0f - 2.0f * (float(s) + 0.5f) / float(count);
    const float r = std::sqrt(std::max(0.0f, 1.0f - z * z));
    const float phi = golden * float(s);
    return {r * std::cos(phi), r * std::sin(phi), z};
}

void splat(EquirectMap& map, const Vec3f& probe_position,
           const ShadedPoint& point, bool atomic) {
    const Vec3f delta = point.position - probe_position;
    if (length_squared(delta) <= 0.0f) return;
    const Vec3f dir = normalize(delta);
    int x = 0, y = 0;
    map.direction_to_texel(dir, x, y);
    const size_t t = map.texel_index(x, y);
    if (atomic) {
        std::atomic_ref<float>(map.sum[t].x)
            .fetch_add(point.radiance.x, std::memory_order_relaxed);
        std::atomic_ref<float>(map.sum[t].y)
            .fetch_add(point.radiance.y, std::memory_order_relaxed);
        std::atomic_ref<float>(map.sum[t].z)
            .fetch_add(point.radiance.z, std::memory_order_relaxed);
        std::atomic_ref<uint32_t>(map.count[t])
            .fetch_add(1u, std::memory_order_relaxed);
    } else {
        map.sum[t] += point.radiance;
        map.count[t] += 1;
    }
}

int chebyshev(int a, int b, int n) {
    int ai, aj, ak, bi, bj, bk;
    decompose(a, n, ai, aj, ak);
    decompose(b, n, bi, bj, bk);
    return std::max({std::abs(ai - bi), std::abs(aj - bj), std::abs(ak - bk)});
}

}  // namespace

ProbeGrid::ProbeGrid(const Aabb& bounds_, const ProbeGridConfig& config_)
    : config(config_), bounds(bounds_) {
    if (config.n <= 0 || config.rays_per_probe <= 0)
        throw ConfigError("probe grid needs positive n and rays per probe");
    if (config.map_width <= 0 || config.map_height <= 0)
        throw ConfigError("probe map resolution must be positive");
    if (!bounds.valid()) throw ConfigError("probe bounds are empty");

    const int n = config.n;
    probes.reserve(size_t(n) * n * n);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                SHLightProbe p;
                p.i = i;
                p.j = j;
                p.k = k;
                p.position = lattice_position(i, j, k);
                p.map = EquirectMap(config.map_width, config.map_height);
                p.light_coeffs = SHVector(config.degree);
                probes.push_back(std::move(p));
            }
}

Vec3f ProbeGrid::lattice_position(int i, int j, int k) const {
    if (config.n == 1) return bounds.center();
    const float s = 1.0f / float(config.n - 1);
    const Vec3f e = bounds.extent();
    return bounds.lo +
           Vec3f(e.x * float(i) * s, e.y * float(j) * s, e.z * float(k) * s);
}

void ProbeGrid::init_validity(const Scene& scene) {
    constexpr int kDirs = 64;
    parallel_for(0, int64_t(probes.size()), [&](int64_t p) {
        SHLightProbe& probe = probes[size_t(p)];
        int hits = 0, backfaces = 0;
        for (int s = 0; s < kDirs; ++s) {
            const Vec3f dir = fibonacci_dir(s, kDirs);
            const auto hit = scene.intersect(probe.position, dir);
            if (!hit) continue;
            ++hits;
            if (dot(hit->geo_normal, dir) > 0.0f) ++backfaces;
        }
        probe.valid = !(hits > 0 && 2 * backfaces > hits);
        if (!probe.valid) {
            probe.map.clear();
            probe.light_coeffs = SHVector(config.degree);
        }
    });
}

void ProbeGrid::reset_accumulation() {
    for (SHLightProbe& p : probes) {
        p.map.clear();
        p.light_coeffs = SHVector(config.degree);
        p.stale = false;
    }
    frame = 0;
}

std::vector<ShadedPoint> scatter_probe_rays(const Scene& scene,
                                            const ProbeGrid& grid,
                                            uint64_t frame_seed) {
    const PathTracer tracer(scene);
    const int m = grid.config.rays_per_probe;
    const int64_t total = int64_t(grid.probes.size()) * m;
    std::vector<ShadedPoint> slots(size_t(total), ShadedPoint{});
    std::vector<uint8_t> live(size_t(total), 0);

    parallel_for(0, total, [&](int64_t idx) {
        const int p = int(idx / m);
        const SHLightProbe& probe = grid.probes[size_t(p)];
        if (!probe.valid) return;
        Rng rng(frame_seed, uint64_t(idx));
        const Vec3f dir = sample_uniform_sphere(rng.next_vec2());
        const auto sample =
            tracer.shade_probe_ray(probe.position, dir, grid.config.bounces, rng);
        if (!sample || max_component(sample->radiance) <= 0.0f) return;
        slots[size_t(idx)] = {sample->position, sample->radiance, uint32_t(p)};
        live[size_t(idx)] = 1;
    });

    std::vector<ShadedPoint> points;
    points.reserve(size_t(total));
    for (int64_t i = 0; i < total; ++i)
        if (live[size_t(i)]) points.push_back(slots[size_t(i)]);
    return points;
}

void rasterize_shared(ProbeGrid& grid, const std::vector<ShadedPoint>& points,
                      int target_probe, bool parallel) {
    SHLightProbe& probe = grid.probes[size_t(target_probe)];
    if (!probe.valid) return;
    const int n = grid.config.n;
    if (parallel) {
        parallel_for(0, int64_t(points.size()), [&](int64_t i) {
            const ShadedPoint& pt = points[size_t(i)];
            if (chebyshev(int(pt.source_probe), target_probe, n) > 1) return;
            splat(probe.map, probe.position, pt, true);
        });
    } else {
        for (const ShadedPoint& pt : points) {
            if (chebyshev(int(pt.source_probe), target_probe, n) > 1) continue;
            splat(probe.map, probe.position, pt, false);
        }
    }
}

bool update_probe_sh(SHLightProbe& probe, int degree,
                     float max_empty_fraction) {
    if (probe.map.empty_fraction() > max_empty_fraction) {
        probe.stale = true;
        return false;
    }
    probe.light_coeffs = project_map(probe.map, degree, max_empty_fraction);
    probe.stale = false;
    return true;
}

SHVector interpolate_light(const ProbeGrid& grid, const Vec3f& x,
                           const Vec3f& n, const Scene& scene) {
    SHVector out(grid.config.degree);
    if (grid.probes.empty()) return out;
    const int nn = grid.config.n;

    int base[3];
    float t[3];
    const Vec3f ext = grid.bounds.extent();
    const float xs[3] = {x.x - grid.bounds.lo.x, x.y - grid.bounds.lo.y,
                         x.z - grid.bounds.lo.z};
    const float es[3] = {ext.x, ext.y, ext.z};
    for (int a = 0; a < 3; ++a) {
        if (nn == 1 || es[a] <= 0.0f) {
            base[a] = 0;
            t[a] = 0.0f;
            continue;
        }
        const float u =
            std::clamp(xs[a] / es[a] * float(nn - 1), 0.0f, float(nn - 1));
        base[a] = std::min(int(u), nn - 2);
        t[a] = u - float(base[a]);
    }

    struct Corner {
        const SHLightProbe* probe;
        float weight;
        float dist;
    };
    Corner corners[8];
    float weight_sum = 0.0f;
    const bool oriented = length_squared(n) > 0.0f;
    for (int c = 0; c < 8; ++c) {
        const int ci = base[0] + (c & 1);
        const int cj = base[1] + ((c >> 1) & 1);
        const int ck = base[2] + ((c >> 2) & 1);
        const SHLightProbe& probe =
            grid.probe(std::min(ci, nn - 1), std::min(cj, nn - 1),
                       std::min(ck, nn - 1));
        const float wt = ((c & 1) ? t[0] : 1.0f - t[0]) *
                         (((c >> 1) & 1) ? t[1] : 1.0f - t[1]) *
                         (((c >> 2) & 1) ? t[2] : 1.0f - t[2]);
        const Vec3f delta = probe.position - x;
        const float dist = length(delta);
        corners[c] = {&probe, 0.0f, dist};
        if (!probe.valid || wt <= 0.0f) continue;
        if (dist > kSurfaceEpsilon) {
            if (oriented && dot(delta, n) <= 0.0f) continue;  // behind the surface
            const Vec3f origin = x + n * kSurfaceEpsilon;
            if (scene.occluded(origin, probe.position)) continue;
        }
        corners[c].weight = wt;
        weight_sum += wt;
    }

    // Everything pruned: weighted average by inverse distance and how well
    // the probe faces the surface, then by inverse distance alone.
    if (weight_sum <= 0.0f) {
        for (Corner& c : corners) {
            if (!c.probe->valid) continue;
            const float inv_d = 1.0f / std::max(c.dist, kSurfaceEpsilon);
            const float facing =
                c.dist > kSurfaceEpsilon
                    ? std::max(dot((c.probe->position - x) / c.dist, n), 0.0f)
                    : 1.0f;
            c.weight = inv_d * facing;
            weight_sum += c.weight;
        }
    }
    if (weight_sum <= 0.0f) {
        for (Corner& c : corners) {
            if (!c.probe->valid) continue;
            c.weight = 1.0f / std::max(c.dist, kSurfaceEpsilon);
            weight_sum += c.weight;
        }
    }
    if (weight_sum <= 0.0f) return out;

    for (const Corner& c : corners) {
        if (c.weight <= 0.0f) continue;
        const float w = c.weight / weight_sum;
        for (size_t i = 0; i < out.coeffs.size(); ++i)
            out.coeffs[i] += w * c.probe->light_coeffs.coeffs[i];
    }
    return out;
}

void step_frame(const Scene& scene, ProbeGrid& grid, uint64_t frame_seed) {
    const uint64_t fp = scene.light_fingerprint();
    if (grid.frame == 0 || fp != grid.fingerprint) {
        grid.reset_accumulation();
        grid.fingerprint = fp;
    }

    const std::vector<ShadedPoint> points =
        scatter_probe_rays(scene, grid, frame_seed);

    const int n = grid.config.n;
    if (grid.config.deterministic) {
        // Each target gathers its neighborhood serially; maps are disjoint
        // across tasks so the result is independent of the worker count.
        parallel_for(0, int64_t(grid.probes.size()), [&](int64_t p) {
            SHLightProbe& probe = grid.probes[size_t(p)];
            if (!probe.valid) return;
            for (const ShadedPoint& pt : points) {
                if (chebyshev(int(pt.source_probe), int(p), n) > 1) continue;
                splat(probe.map, probe.position, pt, false);
            }
        });
    } else {
        parallel_for(0, int64_t(points.size()), [&](int64_t i) {
            const ShadedPoint& pt = points[size_t(i)];
            int si, sj, sk;
            decompose(int(pt.source_probe), n, si, sj, sk);
            for (int dk = -1; dk <= 1; ++dk)
                for (int dj = -1; dj <= 1; ++dj)
                    for (int di = -1; di <= 1; ++di) {
                        const int ti = si + di, tj = sj + dj, tk = sk + dk;
                        if (ti < 0 || tj < 0 || tk < 0 || ti >= n || tj >= n ||
                            tk >= n)
                            continue;
                        SHLightProbe& target =
                            grid.probes[size_t(grid.probe_index(ti, tj, tk))];
                        if (!target.valid) continue;
                        splat(target.map, target.position, pt, true);
                    }
        });
    }

    grid.frame += 1;
    parallel_for(0, int64_t(grid.probes.size()), [&](int64_t p) {
        SHLightProbe& probe = grid.probes[size_t(p)];
        if (!probe.valid) return;
        update_probe_sh(probe, grid.config.degree,
                        grid.config.max_empty_fraction);
    });
}

}  // namespace prt
