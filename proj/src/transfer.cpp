#include "prt/transfer.h"

#include <bit>
#include <cstdio>
#include <cstring>
#include <memory>

#include "prt/brdf.h"
#include "prt/errors.h"
#include "prt/parallel.h"

namespace prt {

static_assert(std::endian::native == std::endian::little,
              "dataset serialization assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'X', 'F', 'E', 'R', 'S', 'E', 'T', '1'};
constexpr size_t kHeaderBytes = 64;
constexpr int64_t kSlabRecords = 65536;

size_t record_bytes_for(int degree) {
    return 3 * sizeof(uint32_t) + 3 * sizeof(float) + 4 * 3 * sizeof(float) +
           size_t(3 * sh_count(degree)) * sizeof(float);
}

struct Cursor {
    unsigned char* p;
    void u32(uint32_t v) { std::memcpy(p, &v, 4), p += 4; }
    void u64(uint64_t v) { std::memcpy(p, &v, 8), p += 8; }
    void f32(float v) { std::memcpy(p, &v, 4), p += 4; }
    void vec(const Vec3f& v) { f32(v.x), f32(v.y), f32(v.z); }
};

struct Reader {
    const unsigned char* p;
    uint32_t u32() { uint32_t v; std::memcpy(&v, p, 4); p += 4; return v; }
    uint64_t u64() { uint64_t v; std::memcpy(&v, p, 8); p += 8; return v; }
    float f32() { float v; std::memcpy(&v, p, 4); p += 4; return v; }
    Vec3f vec() { Vec3f v; v.x = f32(); v.y = f32(); v.z = f32(); return v; }
};

void encode_header(const DatasetHeader& h, unsigned char* dst) {
    std::memset(dst, 0, kHeaderBytes);
    std::memcpy(dst, kMagic, 8);
    Cursor c{dst + 8};
    c.u32(h.version);
    c.u32(h.record_bytes);
    c.u64(h.n_records);
    c.u32(h.n_incident);
    c.u32(h.degree);
    c.u32(h.latent_dim);
    c.f32(h.t_threshold);
    c.u64(h.seed);
    c.u64(h.total_vertices);
}

DatasetHeader decode_header(const unsigned char* src, const std::string& path) {
    if (std::memcmp(src, kMagic, 8) != 0)
        throw DataError(path + ": not a transfer dataset (bad magic)");
    Reader r{src + 8};
    DatasetHeader h;
    h.version = r.u32();
    h.record_bytes = r.u32();
    h.n_records = r.u64();
    h.n_incident = r.u32();
    h.degree = r.u32();
    h.latent_dim = r.u32();
    h.t_threshold = r.f32();
    h.seed = r.u64();
    h.total_vertices = r.u64();
    if (h.version != 1)
        throw DataError(path + ": unsupported dataset version " +
                        std::to_string(h.version));
    if (h.degree > 10) throw DataError(path + ": implausible SH degree");
    if (h.record_bytes != record_bytes_for(int(h.degree)))
        throw DataError(path + ": record size does not match SH degree");
    return h;
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

bool mesh_bakeable(const Scene& scene, uint32_t mesh_id) {
    if (scene.mesh_is_emitter(mesh_id)) return false;
    const Material& m = scene.materials[scene.meshes[mesh_id].material_id];
    return m.kind != MaterialKind::mirror;
}

}  // namespace

int visibility(const Scene& scene, int object_id, const Vec3f& x_o,
               const Vec3f& geo_normal, const Vec3f& wi, float t_threshold) {
    if (t_threshold <= 0.0f) return 1;
    const Vec3f origin = offset_origin(x_o, geo_normal, wi);
    const bool blocked = scene.object_bvhs[object_id].intersect_any(
        Ray{origin, wi}, kSurfaceEpsilon, t_threshold);
    return blocked ? 0 : 1;
}

SHVector compute_transfer(const Scene& scene, const BakePoint& point,
                          const Material& material, const BakeConfig& config,
                          Rng& rng) {
    const int n_coeffs = sh_count(config.degree);
    const float threshold = config.t_threshold > 0.0f
                                ? config.t_threshold
                                : 2.0f * scene.object_radius[point.object_id];

    std::vector<double> acc(size_t(n_coeffs), 0.0);
    std::vector<float> basis(size_t(n_coeffs), 0.0f);
    const Frame frame = Frame::from_z(point.normal);
    for (int j = 0; j < config.n_incident; ++j) {
        const Vec3f local = sample_uniform_hemisphere(rng.next_vec2());
        if (local.z <= 0.0f) continue;
        const Vec3f wi = frame.to_world(local);
        const float shape = bsdf_shape(material, point.normal, point.omega_o, wi);
        if (shape <= 0.0f) continue;
        if (!visibility(scene, point.object_id, point.position, point.geo_normal,
                        wi, threshold))
            continue;
        const double w = double(kTwoPi) * shape * local.z;  // 1/pdf = 2 pi
        sh_basis(config.degree, wi, basis.data());
        for (int k = 0; k < n_coeffs; ++k) acc[k] += w * basis[k];
    }

    SHVector out(config.degree);
    const float inv_n = 1.0f / float(config.n_incident);
    for (int c = 0; c < 3; ++c) {
        const float a = c == 0   ? material.albedo.x
                        : c == 1 ? material.albedo.y
                                 : material.albedo.z;
        for (int k = 0; k < n_coeffs; ++k)
            out.at(c, k) = a * float(acc[size_t(k)]) * inv_n;
    }
    return out;
}

void bake_dataset(const Scene& scene, const BakeConfig& config,
                  const std::string& out_path, const BakeProgress& progress) {
    if (config.n_samples <= 0 || config.n_incident <= 0 || config.degree < 0)
        throw ConfigError("bake: n_samples, n_incident, degree must be positive");

    const SurfaceSampler sampler(scene, mesh_bakeable);
    const size_t rec_bytes = record_bytes_for(config.degree);
    const int n_coeffs = sh_count(config.degree);

    FilePtr file(std::fopen(out_path.c_str(), "wb"));
    if (!file) throw DataError("cannot open for writing: " + out_path);

    DatasetHeader header;
    header.record_bytes = uint32_t(rec_bytes);
    header.n_records = uint64_t(config.n_samples);
    header.n_incident = uint32_t(config.n_incident);
    header.degree = uint32_t(config.degree);
    header.t_threshold = config.t_threshold;
    header.seed = config.seed;
    header.total_vertices = scene.total_vertices;

    unsigned char head[kHeaderBytes];
    encode_header(header, head);
    if (std::fwrite(head, 1, kHeaderBytes, file.get()) != kHeaderBytes)
        throw DataError("write failed: " + out_path);

    std::vector<unsigned char> slab;
    for (int64_t start = 0; start < config.n_samples; start += kSlabRecords) {
        const int64_t count = std::min(kSlabRecords, config.n_samples - start);
        slab.assign(size_t(count) * rec_bytes, 0);
        parallel_for(0, count, [&](int64_t i) {
            Rng rng(config.seed, uint64_t(start + i));
            const SurfaceSampler::Sample smp = sampler.sample(rng);

            Vec3f local;
            do {
                local = sample_uniform_hemisphere(rng.next_vec2());
            } while (local.z <= 1e-4f);
            const Vec3f omega_o = Frame::from_z(smp.normal).to_world(local);

            const TriangleMesh& mesh = scene.meshes[smp.mesh_id];
            const BakePoint point{smp.position, omega_o, smp.normal,
                                  smp.geo_normal, mesh.object_id};
            const Material& material = scene.materials[mesh.material_id];
            const SHVector t =
                compute_transfer(scene, point, material, config, rng);

            Cursor c{slab.data() + size_t(i) * rec_bytes};
            c.u32(smp.vi[0]), c.u32(smp.vi[1]), c.u32(smp.vi[2]);
            c.f32(smp.b0), c.f32(smp.b1), c.f32(smp.b2);
            c.vec(smp.position);
            c.vec(omega_o);
            c.vec(smp.normal);
            c.vec(smp.albedo);
            for (int ch = 0; ch < 3; ++ch)
                for (int k = 0; k < n_coeffs; ++k) c.f32(t.at(ch, k));
        });
        if (std::fwrite(slab.data(), 1, slab.size(), file.get()) != slab.size())
            throw DataError("write failed: " + out_path);
        if (progress) progress(start + count, config.n_samples);
    }
    if (std::fflush(file.get()) != 0)
        throw DataError("write failed: " + out_path);
}

DatasetHeader read_dataset_header(const std::string& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw DataError("cannot open: " + path);
    unsigned char head[kHeaderBytes];
    if (std::fread(head, 1, kHeaderBytes, file.get()) != kHeaderBytes)
        throw DataError(path + ": truncated dataset header");
    return decode_header(head, path);
}

TransferDataset load_dataset(const std::string& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw DataError("cannot open: " + path);
    unsigned char head[kHeaderBytes];
    if (std::fread(head, 1, kHeaderBytes, file.get()) != kHeaderBytes)
        throw DataError(path + ": truncated dataset header");

    TransferDataset ds;
    ds.header = decode_header(head, path);
    const size_t n = size_t(ds.header.n_records);
    const size_t rec_bytes = ds.header.record_bytes;
    const int stride = ds.target_stride();

    ds.indices.resize(3 * n);
    ds.lambdas.resize(3 * n);
    ds.position.resize(n);
    ds.omega_o.resize(n);
    ds.normal.resize(n);
    ds.albedo.resize(n);
    ds.targets.resize(n * size_t(stride));

    std::vector<unsigned char> slab;
    size_t done = 0;
    while (done < n) {
        const size_t count = std::min(size_t(kSlabRecords), n - done);
        slab.resize(count * rec_bytes);
        if (std::fread(slab.data(), 1, slab.size(), file.get()) != slab.size())
            throw DataError(path + ": truncated dataset body");
        for (size_t i = 0; i < count; ++i) {
            const size_t r = done + i;
            Reader rd{slab.data() + i * rec_bytes};
            for (int j = 0; j < 3; ++j) ds.indices[3 * r + j] = rd.u32();
            for (int j = 0; j < 3; ++j) ds.lambdas[3 * r + j] = rd.f32();
            ds.position[r] = rd.vec();
            ds.omega_o[r] = rd.vec();
            ds.normal[r] = rd.vec();
            ds.albedo[r] = rd.vec();
            float* t = ds.targets.data() + r * size_t(stride);
            for (int k = 0; k < stride; ++k) t[k] = rd.f32();
        }
        done += count;
    }
    // Reject trailing garbage.
    unsigned char extra;
    if (std::fread(&extra, 1, 1, file.get()) == 1)
        throw DataError(path + ": dataset longer than header declares");
    return ds;
}

}  // namespace prt
