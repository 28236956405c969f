#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "prt/errors.h"
#include "prt/metrics.h"
#include "prt/neural_transfer.h"
#include "prt/path_tracer.h"
#include "prt/probes.h"
#include "prt/renderer.h"
#include "prt/scene.h"
#include "prt/transfer.h"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace prt;

namespace {

// ---------------------------------------------------------------------------
// Plumbing shared by every command.

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

// Exclusive marker on an output directory; a second command writing to the
// same place fails fast instead of interleaving files.
class DirLock {
public:
    explicit DirLock(const fs::path& dir) {
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec)
            throw ConfigError("cannot create output directory: " + dir.string());
        path_ = dir / ".prtgi.lock";
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0)
            throw ConfigError("output directory is locked: " + path_.string() +
                              " exists (remove it if no other run is active)");
        const std::string pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] ssize_t n = ::write(fd_, pid.data(), pid.size());
    }
    ~DirLock() {
        if (fd_ >= 0) {
            ::close(fd_);
            ::unlink(path_.c_str());
        }
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    fs::path path_;
    int fd_ = -1;
};

// Lock the directory that will receive `output` (the parent for plain files).
DirLock lock_for(const fs::path& output, bool is_directory) {
    if (is_directory) return DirLock(output);
    const fs::path parent = output.parent_path();
    return DirLock(parent.empty() ? fs::path(".") : parent);
}

json vec3_json(const Vec3f& v) { return json::array({v.x, v.y, v.z}); }

std::string timestamp_utc() {
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

json manifest_base(const char* command, const std::string& scene,
                   uint64_t seed, bool deterministic) {
    json j;
    j["tool"] = "prtgi";
    j["command"] = command;
    if (!scene.empty()) j["scene"] = scene;
    j["seed"] = seed;
    j["deterministic"] = deterministic;
    const char* threads = std::getenv("PRTGI_THREADS");
    j["threads"] = threads ? threads : "auto";
    j["created"] = timestamp_utc();
    return j;
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write: " + path.string());
    f << j.dump(2) << "\n";
    if (!f) throw DataError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Probe-field flags shared by render, probe-dump, and ablate.

struct ProbeFlags {
    int n = 8;
    int rays = 100;
    int map_w = 100;
    int map_h = 50;
    int frames = 50;
    int bounces = 3;
    float max_empty = 0.95f;
};

void add_probe_options(CLI::App* cmd, ProbeFlags& p) {
    cmd->add_option("--grid-n", p.n, "Probes per axis (N^3 lattice)")
        ->capture_default_str();
    cmd->add_option("--probe-rays", p.rays, "Scatter rays per probe per frame")
        ->capture_default_str();
    cmd->add_option("--map-width", p.map_w, "Radiance map width (texels)")
        ->capture_default_str();
    cmd->add_option("--map-height", p.map_h, "Radiance map height (texels)")
        ->capture_default_str();
    cmd->add_option("--probe-frames", p.frames,
                    "Accumulation frames before the probes are read")
        ->capture_default_str();
    cmd->add_option("--probe-bounces", p.bounces,
                    "Path-tracing bounces behind each probe ray")
        ->capture_default_str();
    cmd->add_option("--max-empty", p.max_empty,
                    "Skip SH refits while this texel fraction is still empty")
        ->capture_default_str();
}

json probe_flags_json(const ProbeFlags& p) {
    json j;
    j["grid_n"] = p.n;
    j["rays_per_probe"] = p.rays;
    j["map"] = {p.map_w, p.map_h};
    j["frames"] = p.frames;
    j["bounces"] = p.bounces;
    j["max_empty_fraction"] = p.max_empty;
    return j;
}

ProbeGridConfig grid_config_from(const ProbeFlags& p, int degree,
                                 bool deterministic) {
    ProbeGridConfig c;
    c.n = p.n;
    c.rays_per_probe = p.rays;
    c.map_width = p.map_w;
    c.map_height = p.map_h;
    c.degree = degree;
    c.bounces = p.bounces;
    c.max_empty_fraction = p.max_empty;
    c.deterministic = deterministic;
    return c;
}

ProbeGrid converge_probes(const Scene& scene, const ProbeFlags& flags,
                          int degree, bool deterministic, uint64_t seed,
                          bool verbose) {
    ProbeGrid grid(scene.probe_bounds, grid_config_from(flags, degree,
                                                        deterministic));
    grid.init_validity(scene);
    const auto t0 = std::chrono::steady_clock::now();
    for (int f = 0; f < flags.frames; ++f) {
        step_frame(scene, grid, seed + uint64_t(f));
        if (verbose && ((f + 1) % 10 == 0 || f + 1 == flags.frames))
            std::printf("  probes: frame %d/%d (%.1fs)\n", f + 1, flags.frames,
                        seconds_since(t0));
    }
    return grid;
}

// ---------------------------------------------------------------------------
// Probe state serialization: a fixed header, then one record per probe with
// position, validity, SH coefficients, and the total texel sample count.

constexpr char kProbeMagic[8] = {'P', 'R', 'T', 'P', 'R', 'O', 'B', 'E'};

void write_probe_index(const ProbeGrid& grid, uint64_t seed,
                       const fs::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write: " + path.string());

    auto u32 = [&](uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
    auto u64 = [&](uint64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); };
    auto f32 = [&](float v) { f.write(reinterpret_cast<const char*>(&v), 4); };
    auto vec = [&](const Vec3f& v) { f32(v.x), f32(v.y), f32(v.z); };

    f.write(kProbeMagic, 8);
    u32(1);  // version
    u32(uint32_t(grid.config.n));
    u32(uint32_t(grid.config.degree));
    u32(uint32_t(grid.config.map_width));
    u32(uint32_t(grid.config.map_height));
    u64(grid.frame);
    u64(seed);
    vec(grid.bounds.lo);
    vec(grid.bounds.hi);

    for (const SHLightProbe& p : grid.probes) {
        vec(p.position);
        u32(p.valid ? 1u : 0u);
        for (float c : p.light_coeffs.coeffs) f32(c);
        u32(uint32_t(p.map.total_count()));
    }
    if (!f) throw DataError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Camera overrides shared by the rendering commands.

struct CameraFlags {
    std::vector<float> position, look_at, up;
    float vfov = 0.0f;
    int width = 0, height = 0;
};

void add_camera_options(CLI::App* cmd, CameraFlags& c) {
    cmd->add_option("--cam-pos", c.position, "Camera position (overrides scene)")
        ->expected(3);
    cmd->add_option("--cam-look", c.look_at, "Camera target (overrides scene)")
        ->expected(3);
    cmd->add_option("--cam-up", c.up, "Camera up vector (overrides scene)")
        ->expected(3);
    cmd->add_option("--vfov", c.vfov, "Vertical field of view, degrees");
    cmd->add_option("--width", c.width, "Output width (0: scene camera)");
    cmd->add_option("--height", c.height, "Output height (0: scene camera)");
}

void apply_camera_flags(Camera& cam, const CameraFlags& c) {
    if (!c.position.empty()) cam.position = {c.position[0], c.position[1], c.position[2]};
    if (!c.look_at.empty()) cam.look_at = {c.look_at[0], c.look_at[1], c.look_at[2]};
    if (!c.up.empty()) cam.up = {c.up[0], c.up[1], c.up[2]};
    if (c.vfov != 0.0f) {
        if (c.vfov <= 0.0f || c.vfov >= 180.0f)
            throw ConfigError("--vfov must be in (0, 180)");
        cam.vfov_deg = c.vfov;
    }
    if (c.width < 0 || c.height < 0)
        throw ConfigError("--width/--height must be non-negative");
    if (c.width > 0) cam.width = c.width;
    if (c.height > 0) cam.height = c.height;
}

json camera_json(const Camera& cam) {
    json j;
    j["position"] = vec3_json(cam.position);
    j["look_at"] = vec3_json(cam.look_at);
    j["up"] = vec3_json(cam.up);
    j["vfov_deg"] = cam.vfov_deg;
    j["resolution"] = {cam.width, cam.height};
    return j;
}

// ---------------------------------------------------------------------------
// bake

struct BakeArgs {
    std::string scene, out;
    BakeConfig config;
};

// Streams the records back to report mean |t| per SH band without holding
// the dataset in memory.
void print_dataset_summary(const std::string& path) {
    const DatasetHeader h = read_dataset_header(path);
    const int coeffs = sh_count(int(h.degree));
    const size_t prefix = 3 * sizeof(uint32_t) + (3 + 4 * 3) * sizeof(float);

    std::ifstream f(path, std::ios::binary);
    f.seekg(64);
    std::vector<double> band_sum(size_t(h.degree) + 1, 0.0);
    std::vector<char> rec(h.record_bytes);
    std::vector<float> t(size_t(3) * coeffs);
    for (uint64_t r = 0; r < h.n_records; ++r) {
        if (!f.read(rec.data(), rec.size()))
            throw DataError(path + ": truncated dataset body");
        std::memcpy(t.data(), rec.data() + prefix, t.size() * sizeof(float));
        for (int c = 0; c < 3; ++c)
            for (int k = 0; k < coeffs; ++k) {
                int l, m;
                sh_index_to_lm(k, l, m);
                band_sum[size_t(l)] += std::abs(double(t[size_t(c) * coeffs + k]));
            }
    }

    std::printf("records: %llu  incident rays: %u  degree: %u  seed: %llu\n",
                (unsigned long long)h.n_records, h.n_incident, h.degree,
                (unsigned long long)h.seed);
    std::printf("mean |t| per band:");
    for (size_t l = 0; l < band_sum.size(); ++l) {
        const double count = double(h.n_records) * 3.0 * double(2 * l + 1);
        std::printf("  l=%zu %.5f", l, band_sum[l] / count);
    }
    std::printf("\n");
}

void run_bake(const BakeArgs& a) {
    const Scene scene = load_scene(a.scene);
    const DirLock lock = lock_for(a.out, false);
    const auto t0 = std::chrono::steady_clock::now();

    int64_t last_pct = -1;
    bake_dataset(scene, a.config, a.out, [&](int64_t done, int64_t total) {
        const int64_t pct = 100 * done / total;
        if (pct / 5 > last_pct / 5) {
            std::printf("  baked %lld%% (%.1fs)\n", (long long)pct,
                        seconds_since(t0));
            last_pct = pct;
        }
    });
    std::printf("bake finished in %.1fs -> %s\n", seconds_since(t0),
                a.out.c_str());
    print_dataset_summary(a.out);

    json m = manifest_base("bake", a.scene, a.config.seed, false);
    m["output"] = a.out;
    m["bake"] = {{"samples", a.config.n_samples},
                 {"incident", a.config.n_incident},
                 {"t_threshold", a.config.t_threshold},
                 {"degree", a.config.degree}};
    write_json_file(a.out + ".manifest.json", m);
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string dataset, out, resume, log;
    TrainConfig config;
    int latent_dim = 7;
    std::vector<int> hidden = {128, 128, 128};
};

void run_train(const TrainArgs& a) {
    const TransferDataset dataset = load_dataset(a.dataset);
    const DirLock lock = lock_for(a.out, false);

    TransferModel model =
        a.resume.empty()
            ? create_model(dataset.header.total_vertices, a.config.seed,
                           a.latent_dim, int(dataset.header.degree), a.hidden)
            : load_checkpoint(a.resume);
    if (!a.resume.empty())
        std::printf("resuming from %s at iteration %llu\n", a.resume.c_str(),
                    (unsigned long long)model.iteration);

    TrainConfig config = a.config;
    config.log_path = a.log.empty() ? a.out + ".loss.csv" : a.log;

    const auto t0 = std::chrono::steady_clock::now();
    const int64_t log_every = std::max(1, config.log_every);
    const TrainStats stats =
        train(model, dataset, config, [&](int64_t it, double loss) {
            if (it % log_every == 0)
                std::printf("  iter %lld  loss %.6f  (%.1fs)\n", (long long)it,
                            loss, seconds_since(t0));
        });
    save_checkpoint(model, a.out);

    double target_sum = 0.0;
    for (float t : dataset.targets) target_sum += std::abs(double(t));
    const double mean_t = target_sum / double(dataset.targets.size());

    std::printf("train finished in %.1fs -> %s\n", seconds_since(t0),
                a.out.c_str());
    std::printf("iterations run: %lld  train records: %zu  held-out: %zu\n",
                (long long)stats.iterations_run, stats.train_records,
                stats.holdout_records);
    std::printf("held-out L1: %.6f  mean |t|: %.6f  ratio: %.3f\n",
                stats.holdout_loss, mean_t,
                mean_t > 0.0 ? stats.holdout_loss / mean_t : 0.0);

    json m = manifest_base("train", "", a.config.seed, false);
    m["dataset"] = a.dataset;
    m["output"] = a.out;
    if (!a.resume.empty()) m["resume"] = a.resume;
    m["train"] = {{"batch", config.batch},
                  {"lr", config.lr},
                  {"iterations", config.iterations},
                  {"decay", config.decay},
                  {"holdout_fraction", config.holdout_fraction},
                  {"latent_dim", model.latents.d},
                  {"hidden", a.hidden},
                  {"log", config.log_path}};
    m["result"] = {{"iterations_run", stats.iterations_run},
                   {"train_loss", stats.train_loss},
                   {"holdout_l1", stats.holdout_loss},
                   {"mean_abs_target", mean_t}};
    write_json_file(a.out + ".manifest.json", m);
}

// ---------------------------------------------------------------------------
// render

struct RenderArgs {
    std::string scene, out, checkpoint;
    std::string transfer = "neural";  // neural | oracle | lambert
    ProbeFlags probes;
    CameraFlags camera;
    RenderConfig config;
    int n_incident = 2000;  // oracle transfer sampling
    float t_threshold = -1.0f;
    bool deterministic = false;
};

struct TransferChoice {
    std::unique_ptr<TransferModel> model;  // keeps the neural source alive
    std::unique_ptr<TransferSource> source;
};

TransferChoice make_transfer(const RenderArgs& a, const Scene& scene) {
    TransferChoice t;
    if (a.transfer == "neural") {
        if (a.checkpoint.empty())
            throw ConfigError("--transfer neural requires --checkpoint");
        t.model = std::make_unique<TransferModel>(load_checkpoint(a.checkpoint));
        if (t.model->latents.vertex_count != scene.total_vertices)
            throw DataError("checkpoint was trained for " +
                            std::to_string(t.model->latents.vertex_count) +
                            " vertices but the scene has " +
                            std::to_string(scene.total_vertices));
        t.source = std::make_unique<NeuralTransferSource>(*t.model);
    } else if (a.transfer == "oracle") {
        BakeConfig c;
        c.n_incident = a.n_incident;
        c.t_threshold = a.t_threshold;
        c.seed = a.config.seed;
        t.source = std::make_unique<OracleTransferSource>(scene, c);
    } else if (a.transfer == "lambert") {
        t.source = std::make_unique<LambertTransferSource>(4);
    } else {
        throw ConfigError("unknown transfer source '" + a.transfer + "'");
    }
    return t;
}

void run_render(const RenderArgs& a) {
    Scene scene = load_scene(a.scene);
    apply_camera_flags(scene.camera, a.camera);
    const DirLock lock = lock_for(a.out, true);
    const fs::path out(a.out);

    const TransferChoice transfer = make_transfer(a, scene);
    const auto t0 = std::chrono::steady_clock::now();
    const ProbeGrid grid =
        converge_probes(scene, a.probes, transfer.source->degree(),
                        a.deterministic, a.config.seed, true);

    const GBuffer gbuffer = generate_gbuffer(scene, scene.camera);
    ShadeOptions options;
    options.hanning_window = a.config.hanning_window;
    ShadeStats stats;
    Image gi = shade_gi(gbuffer, *transfer.source, grid, scene, options, &stats);
    if (stats.mirror_pixels > 0) {
        const Image spec =
            shade_specular(gbuffer, scene, *transfer.source, grid,
                           a.config.specular_bounces, options, &stats);
        accumulate(gi, spec);
    }
    write_pfm((out / "gi.pfm").string(), gi);

    Image di;
    const Image* di_ptr = nullptr;
    if (a.config.mode == RenderMode::gi_plus_di) {
        PathConfig pc;
        pc.spp = a.config.di_spp;
        pc.mode = TraceMode::direct_only;
        pc.seed = a.config.seed;
        di = PathTracer(scene).render_reference(scene.camera, pc);
        write_pfm((out / "di.pfm").string(), di);
        di_ptr = &di;
    }
    composite_and_write(gi, di_ptr, a.config, (out / "render.pfm").string(),
                        (out / "render.png").string());
    write_probe_index(grid, a.config.seed, out / "probes.bin");

    std::printf("render finished in %.1fs -> %s\n", seconds_since(t0),
                a.out.c_str());
    std::printf("shaded %lld pixels (%lld clamped, %lld mirror)\n",
                (long long)stats.shaded_pixels, (long long)stats.clamped_pixels,
                (long long)stats.mirror_pixels);

    json m = manifest_base("render", a.scene, a.config.seed, a.deterministic);
    m["output"] = a.out;
    m["transfer"] = a.transfer;
    if (!a.checkpoint.empty()) m["checkpoint"] = a.checkpoint;
    if (a.transfer == "oracle")
        m["oracle"] = {{"incident", a.n_incident}, {"t_threshold", a.t_threshold}};
    m["probes"] = probe_flags_json(a.probes);
    m["camera"] = camera_json(scene.camera);
    m["render"] = {{"mode", a.config.mode == RenderMode::gi_plus_di ? "gi+di" : "gi"},
                   {"di_spp", a.config.di_spp},
                   {"specular_bounces", a.config.specular_bounces},
                   {"exposure", a.config.exposure},
                   {"hanning_window", a.config.hanning_window}};
    m["stats"] = {{"shaded", stats.shaded_pixels},
                  {"clamped", stats.clamped_pixels},
                  {"mirror", stats.mirror_pixels}};
    write_json_file(out / "run-manifest.json", m);
}

// ---------------------------------------------------------------------------
// render-reference

struct ReferenceArgs {
    std::string scene, out;
    std::string mode = "full";  // full | gi | direct
    CameraFlags camera;
    PathConfig config;
    float exposure = 1.0f;
};

TraceMode trace_mode_from(const std::string& name) {
    if (name == "full") return TraceMode::full;
    if (name == "gi") return TraceMode::gi_only;
    if (name == "direct") return TraceMode::direct_only;
    throw ConfigError("unknown trace mode '" + name + "'");
}

void run_reference(const ReferenceArgs& a) {
    Scene scene = load_scene(a.scene);
    apply_camera_flags(scene.camera, a.camera);
    const DirLock lock = lock_for(a.out, true);
    const fs::path out(a.out);

    PathConfig config = a.config;
    config.mode = trace_mode_from(a.mode);

    const auto t0 = std::chrono::steady_clock::now();
    const Image img = PathTracer(scene).render_reference(scene.camera, config);
    write_pfm((out / "reference.pfm").string(), img);
    Image mapped = img;
    for (Vec3f& p : mapped.pixels) p = tonemap_pixel(p * a.exposure);
    write_png((out / "reference.png").string(), mapped);
    std::printf("reference (%s, %d spp) finished in %.1fs -> %s\n",
                a.mode.c_str(), config.spp, seconds_since(t0), a.out.c_str());

    json m = manifest_base("render-reference", a.scene, config.seed, false);
    m["output"] = a.out;
    m["camera"] = camera_json(scene.camera);
    m["path"] = {{"spp", config.spp},
                 {"max_bounces", config.max_bounces},
                 {"mode", a.mode},
                 {"rr_start", config.rr_start},
                 {"exposure", a.exposure}};
    write_json_file(out / "run-manifest.json", m);
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::vector<std::string> images;  // pairs, in order
    std::string out;
    bool linear = false;
};

void run_eval(const EvalArgs& a) {
    if (a.images.size() < 2 || a.images.size() % 2 != 0)
        throw ConfigError("eval expects an even number of image paths (pairs)");

    std::string csv = MetricReport::csv_header() + "\n";
    std::printf("%s", csv.c_str());
    for (size_t i = 0; i < a.images.size(); i += 2) {
        const Image img_a = read_pfm(a.images[i]);
        const Image img_b = read_pfm(a.images[i + 1]);
        MetricReport r = compare(img_a, img_b, a.linear);
        r.path_a = a.images[i];
        r.path_b = a.images[i + 1];
        const std::string row = r.csv_row() + "\n";
        std::printf("%s", row.c_str());
        csv += row;
    }
    if (!a.out.empty()) {
        const DirLock lock = lock_for(a.out, false);
        std::ofstream f(a.out);
        if (!f) throw DataError("cannot write: " + a.out);
        f << csv;
    }
}

// ---------------------------------------------------------------------------
// probe-dump

struct ProbeDumpArgs {
    std::string scene, out;
    ProbeFlags probes;
    int degree = 4;
    uint64_t seed = 0;
    bool deterministic = false;
};

void write_coefficient_grids(const ProbeGrid& grid, const fs::path& out) {
    const int n = grid.config.n;
    const int bands[3][2] = {{0, 0}, {1, 0}, {2, 0}};
    for (const auto& lm : bands) {
        // z slices tiled left to right; within a slice x = i, y = j.
        Image img(n * n, n);
        for (int k = 0; k < n; ++k)
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i) {
                    const SHVector& c =
                        grid.probes[size_t(grid.probe_index(i, j, k))].light_coeffs;
                    img.at(k * n + i, j) = Vec3f(c.at(0, lm[0], lm[1]),
                                                 c.at(1, lm[0], lm[1]),
                                                 c.at(2, lm[0], lm[1]));
                }
        char name[48];
        std::snprintf(name, sizeof(name), "coeffs_l%d_m%d.pfm", lm[0], lm[1]);
        write_pfm((out / name).string(), img);
    }
}

void run_probe_dump(const ProbeDumpArgs& a) {
    const Scene scene = load_scene(a.scene);
    const DirLock lock = lock_for(a.out, true);
    const fs::path out(a.out);

    const auto t0 = std::chrono::steady_clock::now();
    const ProbeGrid grid = converge_probes(scene, a.probes, a.degree,
                                           a.deterministic, a.seed, true);
    write_probe_index(grid, a.seed, out / "probes.bin");

    const int n = grid.config.n;
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const SHLightProbe& p =
                    grid.probes[size_t(grid.probe_index(i, j, k))];
                Image img(p.map.width, p.map.height);
                for (int y = 0; y < p.map.height; ++y)
                    for (int x = 0; x < p.map.width; ++x)
                        img.at(x, y) = p.map.texel_mean(x, y);
                char name[48];
                std::snprintf(name, sizeof(name), "probe_%03d_%03d_%03d.pfm",
                              i, j, k);
                write_pfm((out / name).string(), img);
            }
    write_coefficient_grids(grid, out);

    int valid = 0;
    for (const SHLightProbe& p : grid.probes) valid += p.valid ? 1 : 0;
    std::printf("probe-dump finished in %.1fs -> %s (%d probes, %d valid)\n",
                seconds_since(t0), a.out.c_str(), n * n * n, valid);

    json m = manifest_base("probe-dump", a.scene, a.seed, a.deterministic);
    m["output"] = a.out;
    m["degree"] = a.degree;
    m["probes"] = probe_flags_json(a.probes);
    write_json_file(out / "run-manifest.json", m);
}

// ---------------------------------------------------------------------------
// ablate

struct AblateArgs {
    std::string scene, out, dataset;
    std::string transfer = "oracle";  // oracle | lambert | neural
    std::string checkpoint;
    ProbeFlags probes;  // base configuration; n/rays/map are swept
    CameraFlags camera;
    int ref_spp = 512;
    int n_incident = 2000;
    int64_t iterations = 2000;  // latent-dimension rows train this long
    uint64_t seed = 0;
    bool deterministic = false;
};

struct AblateRow {
    std::string parameter, value;
    MetricReport report;
};

void run_ablate(const AblateArgs& a) {
    Scene scene = load_scene(a.scene);
    apply_camera_flags(scene.camera, a.camera);
    const DirLock lock = lock_for(a.out, true);
    const fs::path out(a.out);
    const auto t0 = std::chrono::steady_clock::now();

    PathConfig ref_config;
    ref_config.spp = a.ref_spp;
    ref_config.mode = TraceMode::gi_only;
    ref_config.seed = a.seed;
    std::printf("reference: %d spp gi\n", a.ref_spp);
    const Image reference =
        PathTracer(scene).render_reference(scene.camera, ref_config);
    write_pfm((out / "reference.pfm").string(), reference);

    RenderArgs base;
    base.scene = a.scene;
    base.checkpoint = a.checkpoint;
    base.transfer = a.transfer;
    base.n_incident = a.n_incident;
    base.config.seed = a.seed;
    base.deterministic = a.deterministic;
    const TransferChoice transfer = make_transfer(base, scene);

    // One GI render at the given probe configuration, scored against the
    // reference. Identical configurations are rendered once.
    std::map<std::string, MetricReport> cache;
    auto score = [&](const ProbeFlags& flags, const TransferSource& source,
                     const std::string& tag) -> MetricReport {
        const std::string key = std::to_string(flags.n) + "/" +
                                std::to_string(flags.rays) + "/" +
                                std::to_string(flags.map_w) + "x" +
                                std::to_string(flags.map_h) + "/" + tag;
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;

        const ProbeGrid grid = converge_probes(
            scene, flags, source.degree(), a.deterministic, a.seed, false);
        const GBuffer gbuffer = generate_gbuffer(scene, scene.camera);
        ShadeStats stats;
        Image gi = shade_gi(gbuffer, source, grid, scene, {}, &stats);
        if (stats.mirror_pixels > 0) {
            const Image spec =
                shade_specular(gbuffer, scene, source, grid, 1, {}, &stats);
            accumulate(gi, spec);
        }
        MetricReport r = compare(gi, reference);
        r.path_b = "reference.pfm";
        cache.emplace(key, r);
        return r;
    };

    std::vector<AblateRow> rows;
    auto add_row = [&](const char* parameter, const std::string& value,
                       const MetricReport& r) {
        rows.push_back({parameter, value, r});
        std::printf("  %-8s %-8s ssim %.4f  rmse %.4f  l1 %.4f  (%.1fs)\n",
                    parameter, value.c_str(), r.ssim, r.rmse, r.l1,
                    seconds_since(t0));
    };

    const int map_dims[3][2] = {{50, 25}, {100, 50}, {200, 100}};
    for (const auto& wh : map_dims) {
        ProbeFlags f = a.probes;
        f.map_w = wh[0], f.map_h = wh[1];
        add_row("map", std::to_string(wh[0]) + "x" + std::to_string(wh[1]),
                score(f, *transfer.source, ""));
    }
    for (int n : {4, 8, 16}) {
        ProbeFlags f = a.probes;
        f.n = n;
        add_row("grid", std::to_string(n), score(f, *transfer.source, ""));
    }
    for (int rays : {50, 100, 200}) {
        ProbeFlags f = a.probes;
        f.rays = rays;
        add_row("rays", std::to_string(rays), score(f, *transfer.source, ""));
    }

    if (!a.dataset.empty()) {
        const TransferDataset dataset = load_dataset(a.dataset);
        for (int d : {7, 23}) {
            TrainConfig tc;
            tc.iterations = a.iterations;
            tc.seed = a.seed;
            TransferModel model =
                create_model(dataset.header.total_vertices, a.seed, d,
                             int(dataset.header.degree));
            std::printf("  training d=%d for %lld iterations\n", d,
                        (long long)a.iterations);
            train(model, dataset, tc);
            const NeuralTransferSource source(model);
            add_row("latent", std::to_string(d),
                    score(a.probes, source, "d" + std::to_string(d)));
        }
    }

    std::string csv = "parameter,value,ssim,rmse,l1\n";
    char line[160];
    for (const AblateRow& r : rows) {
        std::snprintf(line, sizeof(line), "%s,%s,%.6f,%.6f,%.6f\n",
                      r.parameter.c_str(), r.value.c_str(), r.report.ssim,
                      r.report.rmse, r.report.l1);
        csv += line;
    }
    std::ofstream f(out / "ablation.csv");
    if (!f) throw DataError("cannot write: " + (out / "ablation.csv").string());
    f << csv;
    std::printf("ablate finished in %.1fs -> %s\n", seconds_since(t0),
                a.out.c_str());

    json m = manifest_base("ablate", a.scene, a.seed, a.deterministic);
    m["output"] = a.out;
    m["transfer"] = a.transfer;
    if (!a.dataset.empty())
        m["latent_rows"] = {{"dataset", a.dataset}, {"iterations", a.iterations}};
    m["reference_spp"] = a.ref_spp;
    m["base_probes"] = probe_flags_json(a.probes);
    m["camera"] = camera_json(scene.camera);
    write_json_file(out / "run-manifest.json", m);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "prtgi: bake transfer coefficients, train the decoder, light probes, "
        "and render precomputed-radiance-transfer GI"};
    app.require_subcommand(1);
    app.set_config("--config", "",
                   "Read defaults from an INI file ([command] sections); "
                   "explicit flags win");

    BakeArgs bake;
    CLI::App* cb = app.add_subcommand(
        "bake", "Sample transfer coefficients into a training dataset");
    cb->add_option("--scene", bake.scene, "Scene description (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cb->add_option("--out", bake.out, "Output dataset path")->required();
    cb->add_option("--samples", bake.config.n_samples, "Surface samples to bake")
        ->capture_default_str();
    cb->add_option("--incident", bake.config.n_incident,
                   "Incident directions per sample")
        ->capture_default_str();
    cb->add_option("--t-threshold", bake.config.t_threshold,
                   "Self-visibility ray cap (<= 0: 2x object bounding radius)")
        ->capture_default_str();
    cb->add_option("--degree", bake.config.degree, "SH degree of the targets")
        ->capture_default_str();
    cb->add_option("--seed", bake.config.seed, "RNG seed")->capture_default_str();
    cb->callback([&] { run_bake(bake); });

    TrainArgs tr;
    CLI::App* ct = app.add_subcommand(
        "train", "Fit vertex latents and the shared decoder to a dataset");
    ct->add_option("--dataset", tr.dataset, "Baked transfer dataset")
        ->required()
        ->check(CLI::ExistingFile);
    ct->add_option("--out", tr.out, "Output checkpoint path")->required();
    ct->add_option("--iterations", tr.config.iterations,
                   "Total Adam steps (resume continues the count)")
        ->capture_default_str();
    ct->add_option("--batch", tr.config.batch, "Records per step")
        ->capture_default_str();
    ct->add_option("--lr", tr.config.lr, "Adam learning rate")
        ->capture_default_str();
    ct->add_option("--decay", tr.config.decay, "LR multiplier at each milestone")
        ->capture_default_str();
    ct->add_option("--holdout", tr.config.holdout_fraction,
                   "Held-out record fraction")
        ->capture_default_str();
    ct->add_option("--latent-dim", tr.latent_dim, "Latent floats per vertex")
        ->capture_default_str();
    ct->add_option("--hidden", tr.hidden, "Decoder hidden layer widths")
        ->capture_default_str();
    ct->add_option("--seed", tr.config.seed, "RNG seed")->capture_default_str();
    ct->add_option("--log-every", tr.config.log_every, "Loss log stride")
        ->capture_default_str();
    ct->add_option("--log", tr.log, "Loss CSV path (default: <out>.loss.csv)");
    ct->add_option("--resume", tr.resume, "Checkpoint to continue from")
        ->check(CLI::ExistingFile);
    ct->callback([&] { run_train(tr); });

    RenderArgs rn;
    std::string render_mode = "gi";
    CLI::App* cr = app.add_subcommand(
        "render", "Shade the camera view from probes and transfer coefficients");
    cr->add_option("--scene", rn.scene, "Scene description (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cr->add_option("--out", rn.out, "Output directory")->required();
    cr->add_option("--checkpoint", rn.checkpoint, "Trained transfer model")
        ->check(CLI::ExistingFile);
    cr->add_option("--transfer", rn.transfer,
                   "Transfer source: neural, oracle, or lambert")
        ->capture_default_str();
    cr->add_option("--mode", render_mode, "gi or gi+di")->capture_default_str();
    cr->add_option("--di-spp", rn.config.di_spp,
                   "Direct-light samples per pixel (gi+di mode)")
        ->capture_default_str();
    cr->add_option("--specular-bounces", rn.config.specular_bounces,
                   "Mirror chain budget")
        ->capture_default_str();
    cr->add_option("--exposure", rn.config.exposure, "PNG exposure scale")
        ->capture_default_str();
    cr->add_flag("--hanning", rn.config.hanning_window,
                 "Band-window the light coefficients");
    cr->add_option("--incident", rn.n_incident,
                   "Oracle transfer: incident directions per pixel")
        ->capture_default_str();
    cr->add_option("--t-threshold", rn.t_threshold,
                   "Oracle transfer: self-visibility ray cap");
    cr->add_option("--seed", rn.config.seed, "RNG seed")->capture_default_str();
    cr->add_flag("--deterministic", rn.deterministic,
                 "Bit-identical output regardless of thread count");
    add_probe_options(cr, rn.probes);
    add_camera_options(cr, rn.camera);
    cr->callback([&] {
        if (render_mode == "gi+di" || render_mode == "full")
            rn.config.mode = RenderMode::gi_plus_di;
        else if (render_mode == "gi")
            rn.config.mode = RenderMode::gi_only;
        else
            throw ConfigError("unknown render mode '" + render_mode + "'");
        rn.config.probe_frames = rn.probes.frames;
        run_render(rn);
    });

    ReferenceArgs rf;
    CLI::App* cf = app.add_subcommand(
        "render-reference", "Path-trace the camera view (verification oracle)");
    cf->add_option("--scene", rf.scene, "Scene description (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cf->add_option("--out", rf.out, "Output directory")->required();
    cf->add_option("--spp", rf.config.spp, "Samples per pixel")
        ->capture_default_str();
    cf->add_option("--bounces", rf.config.max_bounces, "Path depth cap")
        ->capture_default_str();
    cf->add_option("--mode", rf.mode, "full, gi, or direct")
        ->capture_default_str();
    cf->add_option("--seed", rf.config.seed, "RNG seed")->capture_default_str();
    cf->add_option("--exposure", rf.exposure, "PNG exposure scale")
        ->capture_default_str();
    add_camera_options(cf, rf.camera);
    cf->callback([&] { run_reference(rf); });

    EvalArgs ev;
    CLI::App* ce = app.add_subcommand(
        "eval", "Score image pairs (RMSE, L1, SSIM) in the order given");
    ce->add_option("images", ev.images, "PFM paths: a1 b1 [a2 b2 ...]")
        ->required()
        ->check(CLI::ExistingFile);
    ce->add_flag("--linear", ev.linear,
                 "Compare raw radiance instead of tone-mapped values");
    ce->add_option("--out", ev.out, "Write the rows to a CSV file");
    ce->callback([&] { run_eval(ev); });

    ProbeDumpArgs pd;
    CLI::App* cp = app.add_subcommand(
        "probe-dump", "Converge the probe field and write its state to disk");
    cp->add_option("--scene", pd.scene, "Scene description (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cp->add_option("--out", pd.out, "Output directory")->required();
    cp->add_option("--degree", pd.degree, "SH degree of the projection")
        ->capture_default_str();
    cp->add_option("--seed", pd.seed, "RNG seed")->capture_default_str();
    cp->add_flag("--deterministic", pd.deterministic,
                 "Bit-identical output regardless of thread count");
    add_probe_options(cp, pd.probes);
    cp->callback([&] { run_probe_dump(pd); });

    AblateArgs ab;
    CLI::App* ca = app.add_subcommand(
        "ablate", "Sweep probe parameters (and latent size) against a "
                  "path-traced reference; emits a CSV");
    ca->add_option("--scene", ab.scene, "Scene description (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    ca->add_option("--out", ab.out, "Output directory")->required();
    ca->add_option("--dataset", ab.dataset,
                   "Baked dataset; enables the latent-dimension rows")
        ->check(CLI::ExistingFile);
    ca->add_option("--transfer", ab.transfer,
                   "Transfer source for the probe rows")
        ->capture_default_str();
    ca->add_option("--checkpoint", ab.checkpoint,
                   "Trained model (with --transfer neural)")
        ->check(CLI::ExistingFile);
    ca->add_option("--ref-spp", ab.ref_spp, "Reference samples per pixel")
        ->capture_default_str();
    ca->add_option("--iterations", ab.iterations,
                   "Training steps for each latent-dimension row")
        ->capture_default_str();
    ca->add_option("--incident", ab.n_incident,
                   "Oracle transfer: incident directions per pixel")
        ->capture_default_str();
    ca->add_option("--seed", ab.seed, "RNG seed")->capture_default_str();
    ca->add_flag("--deterministic", ab.deterministic,
                 "Bit-identical output regardless of thread count");
    add_probe_options(ca, ab.probes);
    add_camera_options(ca, ab.camera);
    ca->callback([&] { run_ablate(ab); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
