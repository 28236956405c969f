#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "prt/mlp.h"
#include "prt/sh.h"
#include "prt/transfer.h"

namespace prt {

struct LatentTable {
    int d = 7;
    uint64_t vertex_count = 0;
    std::vector<float> values;  // vertex-major, d floats per vertex

    void init(uint64_t vertices, int dim, Rng& rng);  // uniform in +-0.1
    const float* at(uint64_t v) const { return values.data() + v * uint64_t(d); }
    float* at(uint64_t v) { return values.data() + v * uint64_t(d); }
};

// z = sum_j lambda_j * latent(i_j). Throws DataError on a bad index.
void interpolate_latent(const LatentTable& table, const uint32_t idx[3],
                        const float lambda[3], float* out);

// Vertex latents plus the decoder network; together they map a surface point
// and viewing configuration to transfer coefficients.
struct TransferModel {
    LatentTable latents;
    Mlp decoder;  // input d+9, output 3*(degree+1)^2
    int degree = 4;
    uint64_t iteration = 0;  // Adam steps applied so far
    uint64_t seed = 0;

    // Decoder input is [z | albedo | n | omega_o].
    SHVector decode(const float* z, const Vec3f& omega_o, const Vec3f& normal,
                    const Vec3f& albedo) const;
    // Convenience: interpolation plus decode.
    SHVector decode_at(const uint32_t idx[3], const float lambda[3],
                       const Vec3f& omega_o, const Vec3f& normal,
                       const Vec3f& albedo) const;
};

TransferModel create_model(uint64_t vertex_count, uint64_t seed, int d = 7,
                           int degree = 4,
                           const std::vector<int>& hidden = {128, 128, 128});

struct ModelGrads {
    std::vector<float> decoder;  // flat, layout of Mlp::params()
    std::vector<float> latents;  // dense, layout of LatentTable::values
};

// Mean L1 over batch records and coefficient entries, with exact gradients
// for the decoder and the touched vertex latents (lambda-weighted). The
// batch is processed in a fixed 16-chunk grid merged in order, so results
// are independent of thread count.
double loss_and_gradients(const TransferModel& model,
                          const TransferDataset& dataset, const uint32_t* ids,
                          int count, ModelGrads& grads);

// Forward-only mean L1 over the given records.
double evaluate(const TransferModel& model, const TransferDataset& dataset,
                const uint32_t* ids, int count);

struct TrainConfig {
    int batch = 2048;
    float lr = 1e-4f;
    int64_t iterations = 50'000;  // target total (resume continues the count)
    float decay = 0.33f;
    std::vector<float> milestone_fractions = {0.6f, 0.85f};
    uint64_t seed = 0;
    float holdout_fraction = 0.1f;
    int log_every = 100;
    std::string log_path;  // CSV (iteration, seconds, loss); empty = no log
};

struct TrainStats {
    double train_loss = 0.0;    // last batch loss
    double holdout_loss = 0.0;  // mean L1 on the held-out split (0 if none)
    int64_t iterations_run = 0;
    size_t train_records = 0;
    size_t holdout_records = 0;
};

using TrainProgress = std::function<void(int64_t iteration, double loss)>;

// Adam on decoder weights and vertex latents, MultiStep lr decay at the
// milestone fractions. Starts from model.iteration, stops at
// config.iterations. Throws DataError on dataset/model mismatch or a
// non-finite loss.
TrainStats train(TransferModel& model, const TransferDataset& dataset,
                 const TrainConfig& config, const TrainProgress& progress = {});

// Records are split by a seed-keyed hash of their index; disjoint and
// deterministic. Used by train; exposed for tests and the eval command.
void split_dataset(size_t n_records, uint64_t seed, float holdout_fraction,
                   std::vector<uint32_t>& train_ids,
                   std::vector<uint32_t>& holdout_ids);

void save_checkpoint(const TransferModel& model, const std::string& path);
TransferModel load_checkpoint(const std::string& path);

}  // namespace prt
