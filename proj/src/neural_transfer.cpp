#include "prt/neural_transfer.h"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include "prt/errors.h"
#include "prt/parallel.h"

namespace prt {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

namespace {

constexpr char kModelMagic[9] = "XFERMDL1";
constexpr uint32_t kModelVersion = 1;
constexpr int kGradChunks = 16;
constexpr int kEvalBlock = 4096;

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void check_compatible(const TransferModel& model, const TransferDataset& ds) {
    if (ds.header.total_vertices != model.latents.vertex_count)
        throw DataError("dataset vertex count does not match the latent table");
    if (int(ds.header.degree) != model.degree ||
        ds.target_stride() != model.decoder.output_size())
        throw DataError("dataset SH degree does not match the decoder output");
    if (model.decoder.input_size() != model.latents.d + 9)
        throw DataError("decoder input size does not match the latent dimension");
}

void check_record_indices(const TransferModel& model, const TransferDataset& ds,
                          const uint32_t* ids, int count) {
    for (int i = 0; i < count; ++i) {
        const uint32_t r = ids[i];
        if (size_t(r) >= ds.size())
            throw DataError("record id out of range");
        for (int j = 0; j < 3; ++j)
            if (ds.indices[size_t(r) * 3 + j] >= model.latents.vertex_count)
                throw DataError("latent lookup: vertex index out of range");
    }
}

// Fills one column of X with [z | albedo | n | omega_o]. Indices must be
// pre-validated; this runs inside worker threads.
void gather_input(const TransferModel& model, const TransferDataset& ds,
                  uint32_t r, Eigen::MatrixXf& x, int col) {
    const int d = model.latents.d;
    float* dst = x.data() + size_t(col) * x.rows();
    const uint32_t* vi = &ds.indices[size_t(r) * 3];
    const float* lam = &ds.lambdas[size_t(r) * 3];
    for (int k = 0; k < d; ++k) dst[k] = 0.0f;
    for (int j = 0; j < 3; ++j) {
        const float* z = model.latents.at(vi[j]);
        for (int k = 0; k < d; ++k) dst[k] += lam[j] * z[k];
    }
    const Vec3f& a = ds.albedo[r];
    const Vec3f& n = ds.normal[r];
    const Vec3f& o = ds.omega_o[r];
    dst[d + 0] = a.x;
    dst[d + 1] = a.y;
    dst[d + 2] = a.z;
    dst[d + 3] = n.x;
    dst[d + 4] = n.y;
    dst[d + 5] = n.z;
    dst[d + 6] = o.x;
    dst[d + 7] = o.y;
    dst[d + 8] = o.z;
}

}  // namespace

void LatentTable::init(uint64_t vertices, int dim, Rng& rng) {
    if (dim <= 0) throw ConfigError("latent dimension must be positive");
    d = dim;
    vertex_count = vertices;
    values.resize(vertices * uint64_t(dim));
    for (float& v : values) v = (2.0f * rng.next_float() - 1.0f) * 0.1f;
}

void interpolate_latent(const LatentTable& table, const uint32_t idx[3],
                        const float lambda[3], float* out) {
    for (int j = 0; j < 3; ++j)
        if (idx[j] >= table.vertex_count)
            throw DataError("latent lookup: vertex index out of range");
    for (int k = 0; k < table.d; ++k) out[k] = 0.0f;
    for (int j = 0; j < 3; ++j) {
        const float* z = table.at(idx[j]);
        for (int k = 0; k < table.d; ++k) out[k] += lambda[j] * z[k];
    }
}

SHVector TransferModel::decode(const float* z, const Vec3f& omega_o,
                               const Vec3f& normal, const Vec3f& albedo) const {
    const int d = latents.d;
    Eigen::MatrixXf x(decoder.input_size(), 1);
    for (int k = 0; k < d; ++k) x(k, 0) = z[k];
    x(d + 0, 0) = albedo.x;
    x(d + 1, 0) = albedo.y;
    x(d + 2, 0) = albedo.z;
    x(d + 3, 0) = normal.x;
    x(d + 4, 0) = normal.y;
    x(d + 5, 0) = normal.z;
    x(d + 6, 0) = omega_o.x;
    x(d + 7, 0) = omega_o.y;
    x(d + 8, 0) = omega_o.z;
    Mlp::Workspace ws;
    const Eigen::MatrixXf& y = decoder.forward(x, ws);
    SHVector out(degree);
    for (int i = 0; i < int(out.coeffs.size()); ++i) out.coeffs[size_t(i)] = y(i, 0);
    return out;
}

SHVector TransferModel::decode_at(const uint32_t idx[3], const float lambda[3],
                                  const Vec3f& omega_o, const Vec3f& normal,
                                  const Vec3f& albedo) const {
    std::vector<float> z(size_t(latents.d), 0.0f);
    interpolate_latent(latents, idx, lambda, z.data());
    return decode(z.data(), omega_o, normal, albedo);
}

TransferModel create_model(uint64_t vertex_count, uint64_t seed, int d,
                           int degree, const std::vector<int>& hidden) {
    if (vertex_count == 0) throw ConfigError("model needs at least one vertex");
    if (degree < 0 || degree > 10) throw ConfigError("unsupported SH degree");
    TransferModel model;
    model.degree = degree;
    model.seed = seed;
    std::vector<int> sizes;
    sizes.reserve(hidden.size() + 2);
    sizes.push_back(d + 9);
    for (int h : hidden) sizes.push_back(h);
    sizes.push_back(3 * sh_count(degree));
    model.decoder = Mlp(sizes);
    Rng wrng(seed, 1);
    model.decoder.init_fan_in(wrng);
    Rng zrng(seed, 2);
    model.latents.init(vertex_count, d, zrng);
    return model;
}

double loss_and_gradients(const TransferModel& model,
                          const TransferDataset& dataset, const uint32_t* ids,
                          int count, ModelGrads& grads) {
    check_compatible(model, dataset);
    check_record_indices(model, dataset, ids, count);
    grads.decoder.assign(model.decoder.params().size(), 0.0f);
    grads.latents.assign(model.latents.values.size(), 0.0f);
    if (count <= 0) return 0.0;

    const int in_size = model.decoder.input_size();
    const int out_size = model.decoder.output_size();
    const float inv_total = 1.0f / (float(count) * float(out_size));

    struct ChunkOut {
        std::vector<float> decoder;
        Eigen::MatrixXf d_input;
        double loss_sum = 0.0;
        int64_t lo = 0, hi = 0;
    };
    std::vector<ChunkOut> outs(kGradChunks);

    parallel_chunks(count, kGradChunks, [&](int chunk, int64_t lo, int64_t hi) {
        ChunkOut& co = outs[size_t(chunk)];
        co.lo = lo;
        co.hi = hi;
        co.decoder.assign(model.decoder.params().size(), 0.0f);
        const int b = int(hi - lo);
        if (b == 0) return;
        Eigen::MatrixXf x(in_size, b);
        Eigen::MatrixXf target(out_size, b);
        for (int i = 0; i < b; ++i) {
            const uint32_t r = ids[lo + i];
            gather_input(model, dataset, r, x, i);
            std::memcpy(target.data() + size_t(i) * out_size, dataset.target(r),
                        size_t(out_size) * sizeof(float));
        }
        Mlp::Workspace ws;
        const Eigen::MatrixXf& y = model.decoder.forward(x, ws);
        Eigen::MatrixXf diff = y - target;
        co.loss_sum = diff.array().abs().cast<double>().sum();
        // L1 subgradient, 0 at 0.
        Eigen::MatrixXf d_out = diff.array().sign().matrix() * inv_total;
        model.decoder.backward(ws, d_out, co.decoder.data(), &co.d_input);
    });

    double loss_sum = 0.0;
    const int d = model.latents.d;
    Eigen::Map<Eigen::VectorXf> acc(grads.decoder.data(),
                                    Eigen::Index(grads.decoder.size()));
    for (const ChunkOut& co : outs) {
        if (co.decoder.empty()) continue;  // chunk grid smaller than the batch
        loss_sum += co.loss_sum;
        acc += Eigen::Map<const Eigen::VectorXf>(co.decoder.data(),
                                                 Eigen::Index(co.decoder.size()));
        for (int64_t i = co.lo; i < co.hi; ++i) {
            const uint32_t r = ids[i];
            const float* dz = co.d_input.data() + size_t(i - co.lo) * in_size;
            for (int j = 0; j < 3; ++j) {
                const float lam = dataset.lambdas[size_t(r) * 3 + j];
                float* g = grads.latents.data() +
                           size_t(dataset.indices[size_t(r) * 3 + j]) * size_t(d);
                for (int k = 0; k < d; ++k) g[k] += lam * dz[k];
            }
        }
    }
    return loss_sum * double(inv_total);
}

double evaluate(const TransferModel& model, const TransferDataset& dataset,
                const uint32_t* ids, int count) {
    check_compatible(model, dataset);
    check_record_indices(model, dataset, ids, count);
    if (count <= 0) return 0.0;

    const int in_size = model.decoder.input_size();
    const int out_size = model.decoder.output_size();
    std::vector<double> sums(size_t(kGradChunks), 0.0);

    parallel_chunks(count, kGradChunks, [&](int chunk, int64_t lo, int64_t hi) {
        Mlp::Workspace ws;
        for (int64_t block = lo; block < hi; block += kEvalBlock) {
            const int b = int(std::min<int64_t>(kEvalBlock, hi - block));
            Eigen::MatrixXf x(in_size, b);
            Eigen::MatrixXf target(out_size, b);
            for (int i = 0; i < b; ++i) {
                const uint32_t r = ids[block + i];
                gather_input(model, dataset, r, x, i);
                std::memcpy(target.data() + size_t(i) * out_size,
                            dataset.target(r), size_t(out_size) * sizeof(float));
            }
            const Eigen::MatrixXf& y = model.decoder.forward(x, ws);
            sums[size_t(chunk)] += (y - target).array().abs().cast<double>().sum();
        }
    });

    double total = 0.0;
    for (double s : sums) total += s;
    return total / (double(count) * out_size);
}

void split_dataset(size_t n_records, uint64_t seed, float holdout_fraction,
                   std::vector<uint32_t>& train_ids,
                   std::vector<uint32_t>& holdout_ids) {
    train_ids.clear();
    holdout_ids.clear();
    const float frac = std::clamp(holdout_fraction, 0.0f, 1.0f);
    const uint64_t cut = uint64_t(double(frac) * 4294967296.0);
    const uint64_t key = splitmix64(seed);
    for (size_t r = 0; r < n_records; ++r) {
        const uint32_t h = uint32_t(splitmix64(key ^ uint64_t(r)));
        if (uint64_t(h) < cut)
            holdout_ids.push_back(uint32_t(r));
        else
            train_ids.push_back(uint32_t(r));
    }
}

TrainStats train(TransferModel& model, const TransferDataset& dataset,
                 const TrainConfig& config, const TrainProgress& progress) {
    check_compatible(model, dataset);
    if (config.batch <= 0) throw ConfigError("batch size must be positive");
    if (config.iterations < 0) throw ConfigError("iteration count must be >= 0");
    if (dataset.size() == 0) throw DataError("dataset has no records");

    std::vector<uint32_t> train_ids, holdout_ids;
    split_dataset(dataset.size(), config.seed, config.holdout_fraction,
                  train_ids, holdout_ids);
    if (train_ids.empty())
        throw DataError("holdout split left no training records");

    std::vector<int64_t> milestones;
    for (float f : config.milestone_fractions)
        milestones.push_back(int64_t(double(f) * double(config.iterations)));
    std::sort(milestones.begin(), milestones.end());

    AdamState opt_w, opt_z;
    opt_w.resize(model.decoder.params().size());
    opt_z.resize(model.latents.values.size());

    FilePtr log;
    if (!config.log_path.empty()) {
        log.reset(std::fopen(config.log_path.c_str(), "wb"));
        if (!log) throw DataError("cannot open for writing: " + config.log_path);
        std::fprintf(log.get(), "iteration,seconds,loss\n");
    }

    TrainStats stats;
    stats.train_records = train_ids.size();
    stats.holdout_records = holdout_ids.size();

    ModelGrads grads;
    std::vector<uint32_t> batch(size_t(config.batch));
    const int log_every = std::max(1, config.log_every);
    const auto t0 = std::chrono::steady_clock::now();

    while (int64_t(model.iteration) < config.iterations) {
        const uint64_t it = model.iteration;
        Rng rng(config.seed, it);
        for (uint32_t& b : batch)
            b = train_ids[rng.next_below(uint32_t(train_ids.size()))];

        const double loss =
            loss_and_gradients(model, dataset, batch.data(), config.batch, grads);
        if (!std::isfinite(loss))
            throw DataError("training diverged: non-finite loss at iteration " +
                            std::to_string(it));

        float lr = config.lr;
        for (int64_t m : milestones)
            if (int64_t(it) >= m) lr *= config.decay;

        opt_w.t++;
        adam_step(model.decoder.params(), grads.decoder, opt_w, lr);
        opt_z.t++;
        adam_step(model.latents.values, grads.latents, opt_z, lr);
        model.iteration++;
        stats.train_loss = loss;
        stats.iterations_run++;

        if (log && (model.iteration % uint64_t(log_every) == 0 ||
                    int64_t(model.iteration) == config.iterations)) {
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                    .count();
            std::fprintf(log.get(), "%llu,%.3f,%.8f\n",
                         static_cast<unsigned long long>(model.iteration), secs,
                         loss);
        }
        if (progress) progress(int64_t(model.iteration), loss);
    }

    if (!holdout_ids.empty())
        stats.holdout_loss = evaluate(model, dataset, holdout_ids.data(),
                                      int(holdout_ids.size()));
    return stats;
}

namespace {

void append_bytes(std::vector<uint8_t>& buf, const void* src, size_t n) {
    const size_t at = buf.size();
    buf.resize(at + n);
    std::memcpy(buf.data() + at, src, n);
}

template <typename T>
void append(std::vector<uint8_t>& buf, T v) {
    append_bytes(buf, &v, sizeof(T));
}

template <typename T>
T read_one(std::FILE* f, const std::string& path) {
    T v;
    if (std::fread(&v, sizeof(T), 1, f) != 1)
        throw DataError(path + ": truncated checkpoint");
    return v;
}

}  // namespace

void save_checkpoint(const TransferModel& model, const std::string& path) {
    std::vector<uint8_t> head;
    append_bytes(head, kModelMagic, 8);
    append<uint32_t>(head, kModelVersion);
    append<uint32_t>(head, uint32_t(model.latents.d));
    append<uint32_t>(head, uint32_t(model.degree));
    const std::vector<int>& sizes = model.decoder.layer_sizes();
    append<uint32_t>(head, uint32_t(sizes.size()));
    for (int s : sizes) append<uint32_t>(head, uint32_t(s));
    append<uint64_t>(head, model.latents.vertex_count);
    append<uint64_t>(head, model.iteration);
    append<uint64_t>(head, model.seed);

    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) throw DataError("cannot open for writing: " + path);
    const auto put = [&](const void* src, size_t n) {
        if (std::fwrite(src, 1, n, file.get()) != n)
            throw DataError("write failed: " + path);
    };
    put(head.data(), head.size());
    put(model.decoder.params().data(),
        model.decoder.params().size() * sizeof(float));
    put(model.latents.values.data(),
        model.latents.values.size() * sizeof(float));
    if (std::fflush(file.get()) != 0) throw DataError("write failed: " + path);
}

TransferModel load_checkpoint(const std::string& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw DataError("cannot open: " + path);

    char magic[8];
    if (std::fread(magic, 1, 8, file.get()) != 8)
        throw DataError(path + ": truncated checkpoint");
    if (std::memcmp(magic, kModelMagic, 8) != 0)
        throw DataError(path + ": not a transfer model (bad magic)");
    const uint32_t version = read_one<uint32_t>(file.get(), path);
    if (version != kModelVersion)
        throw DataError(path + ": unsupported model version " +
                        std::to_string(version));

    const uint32_t d = read_one<uint32_t>(file.get(), path);
    const uint32_t degree = read_one<uint32_t>(file.get(), path);
    if (d == 0 || d > 4096) throw DataError(path + ": implausible latent dimension");
    if (degree > 10) throw DataError(path + ": implausible SH degree");

    const uint32_t n_sizes = read_one<uint32_t>(file.get(), path);
    if (n_sizes < 2 || n_sizes > 64)
        throw DataError(path + ": implausible layer count");
    std::vector<int> sizes(size_t(n_sizes), 0);
    for (uint32_t i = 0; i < n_sizes; ++i) {
        const uint32_t s = read_one<uint32_t>(file.get(), path);
        if (s == 0 || s > (1u << 20))
            throw DataError(path + ": implausible layer size");
        sizes[i] = int(s);
    }
    if (sizes.front() != int(d) + 9)
        throw DataError(path + ": decoder input does not match latent dimension");
    if (sizes.back() != 3 * sh_count(int(degree)))
        throw DataError(path + ": decoder output does not match SH degree");

    TransferModel model;
    model.degree = int(degree);
    model.latents.d = int(d);
    model.latents.vertex_count = read_one<uint64_t>(file.get(), path);
    model.iteration = read_one<uint64_t>(file.get(), path);
    model.seed = read_one<uint64_t>(file.get(), path);
    model.decoder = Mlp(sizes);

    const int64_t body_start = std::ftell(file.get());
    std::fseek(file.get(), 0, SEEK_END);
    const int64_t file_end = std::ftell(file.get());
    std::fseek(file.get(), body_start, SEEK_SET);
    const uint64_t expected =
        (model.decoder.params().size() +
         model.latents.vertex_count * uint64_t(model.latents.d)) *
        sizeof(float);
    if (uint64_t(file_end - body_start) != expected)
        throw DataError(path + ": checkpoint size does not match its header");

    const auto read_block = [&](float* dst, size_t n) {
        if (std::fread(dst, sizeof(float), n, file.get()) != n)
            throw DataError(path + ": truncated checkpoint");
    };
    read_block(model.decoder.params().data(), model.decoder.params().size());
    model.latents.values.resize(model.latents.vertex_count *
                                uint64_t(model.latents.d));
    read_block(model.latents.values.data(), model.latents.values.size());
    return model;
}

}  // namespace prt
