#pragma once

#include <Eigen/Dense>
#include <vector>

#include "prt/rng.h"

namespace prt {

// Fully connected network, rectifier hidden activations, identity output.
// Parameters live in one flat buffer (per layer: column-major weight matrix,
// then bias) so the optimizer and checkpoint IO can treat them as a single
// vector.
class Mlp {
public:
    Mlp() = default;
    explicit Mlp(std::vector<int> layer_sizes);

    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }
    int layer_count() const { return int(sizes_.size()) - 1; }
    const std::vector<int>& layer_sizes() const { return sizes_; }

    std::vector<float>& params() { return params_; }
    const std::vector<float>& params() const { return params_; }

    Eigen::Map<Eigen::MatrixXf> weight(int layer);
    Eigen::Map<const Eigen::MatrixXf> weight(int layer) const;
    Eigen::Map<Eigen::VectorXf> bias(int layer);
    Eigen::Map<const Eigen::VectorXf> bias(int layer) const;

    // Uniform in +-1/sqrt(fan_in), biases included.
    void init_fan_in(Rng& rng);

    struct Workspace {
        std::vector<Eigen::MatrixXf> pre;  // pre-activation per layer
        std::vector<Eigen::MatrixXf> act;  // act[0] = input, act[l+1] = post
    };

    // Columns are records. Returns ws.act.back() (out x batch).
    const Eigen::MatrixXf& forward(const Eigen::MatrixXf& input,
                                   Workspace& ws) const;

    // d_output is dL/d(out), same shape as the forward result. Accumulates
    // into grads (flat, same layout as params; caller zeroes) and optionally
    // writes dL/d(input).
    void backward(const Workspace& ws, const Eigen::MatrixXf& d_output,
                  float* grads, Eigen::MatrixXf* d_input = nullptr) const;

private:
    size_t weight_offset(int layer) const;
    std::vector<int> sizes_;
    std::vector<size_t> offsets_;  // per layer, into params_
    std::vector<float> params_;
};

// One Adam step over a flat parameter vector; `t` must be incremented by the
// caller before each call (bias correction uses it).
struct AdamState {
    std::vector<float> m, v;
    int64_t t = 0;

    void resize(size_t n) {
        m.assign(n, 0.0f);
        v.assign(n, 0.0f);
        t = 0;
    }
};

void adam_step(std::vector<float>& params, const std::vector<float>& grads,
               AdamState& state, float lr, float beta1 = 0.9f,
               float beta2 = 0.999f, float eps = 1e-8f);

}  // namespace prt
