#include "prt/mlp.h"

#include <cmath>
#include <stdexcept>

namespace prt {

Mlp::Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) throw std::invalid_argument("mlp needs >= 2 layers");
    for (int s : sizes_)
        if (s <= 0) throw std::invalid_argument("mlp layer size must be positive");
    size_t total = 0;
    offsets_.reserve(sizes_.size() - 1);
    for (int l = 0; l + 1 < int(sizes_.size()); ++l) {
        offsets_.push_back(total);
        total += size_t(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
    }
    params_.assign(total, 0.0f);
}

size_t Mlp::weight_offset(int layer) const { return offsets_[size_t(layer)]; }

Eigen::Map<Eigen::MatrixXf> Mlp::weight(int layer) {
    return {params_.data() + weight_offset(layer), sizes_[layer + 1],
            sizes_[layer]};
}

Eigen::Map<const Eigen::MatrixXf> Mlp::weight(int layer) const {
    return {params_.data() + weight_offset(layer), sizes_[layer + 1],
            sizes_[layer]};
}

Eigen::Map<Eigen::VectorXf> Mlp::bias(int layer) {
    return {params_.data() + weight_offset(layer) +
                size_t(sizes_[layer]) * sizes_[layer + 1],
            sizes_[layer + 1]};
}

Eigen::Map<const Eigen::VectorXf> Mlp::bias(int layer) const {
    return {params_.data() + weight_offset(layer) +
                size_t(sizes_[layer]) * sizes_[layer + 1],
            sizes_[layer + 1]};
}

void Mlp::init_fan_in(Rng& rng) {
    for (int l = 0; l < layer_count(); ++l) {
        const float bound = 1.0f / std::sqrt(float(sizes_[l]));
        auto w = weight(l);
        for (int col = 0; col < w.cols(); ++col)
            for (int row = 0; row < w.rows(); ++row)
                w(row, col) = (2.0f * rng.next_float() - 1.0f) * bound;
        auto b = bias(l);
        for (int i = 0; i < b.size(); ++i)
            b[i] = (2.0f * rng.next_float() - 1.0f) * bound;
    }
}

const Eigen::MatrixXf& Mlp::forward(const Eigen::MatrixXf& input,
                                    Workspace& ws) const {
    if (input.rows() != input_size())
        throw std::invalid_argument("mlp forward: input dimension mismatch");
    const int n = layer_count();
    ws.pre.resize(size_t(n));
    ws.act.resize(size_t(n) + 1);
    ws.act[0] = input;
    for (int l = 0; l < n; ++l) {
        ws.pre[size_t(l)].noalias() = weight(l) * ws.act[size_t(l)];
        ws.pre[size_t(l)].colwise() += bias(l);
        if (l + 1 < n)
            ws.act[size_t(l) + 1] = ws.pre[size_t(l)].cwiseMax(0.0f);
        else
            ws.act[size_t(l) + 1] = ws.pre[size_t(l)];
    }
    return ws.act.back();
}

void Mlp::backward(const Workspace& ws, const Eigen::MatrixXf& d_output,
                   float* grads, Eigen::MatrixXf* d_input) const {
    const int n = layer_count();
    Eigen::MatrixXf delta = d_output;
    for (int l = n - 1; l >= 0; --l) {
        Eigen::Map<Eigen::MatrixXf> gw(grads + weight_offset(l),
                                       sizes_[l + 1], sizes_[l]);
        Eigen::Map<Eigen::VectorXf> gb(
            grads + weight_offset(l) + size_t(sizes_[l]) * sizes_[l + 1],
            sizes_[l + 1]);
        // Evaluate into owned (aligned) temporaries first: Eigen's kernel
        // selection depends on destination alignment, and accumulating
        // straight into the caller's buffer would tie the float rounding to
        // the heap address. The elementwise adds below are address-agnostic.
        const Eigen::MatrixXf dw = delta * ws.act[size_t(l)].transpose();
        const Eigen::VectorXf db = delta.rowwise().sum();
        gw += dw;
        gb += db;
        if (l > 0) {
            Eigen::MatrixXf next = weight(l).transpose() * delta;
            // Rectifier subgradient: 0 at 0.
            delta = next.cwiseProduct(
                (ws.pre[size_t(l) - 1].array() > 0.0f).cast<float>().matrix());
        } else if (d_input) {
            d_input->noalias() = weight(0).transpose() * delta;
        }
    }
}

void adam_step(std::vector<float>& params, const std::vector<float>& grads,
               AdamState& state, float lr, float beta1, float beta2,
               float eps) {
    const float bc1 = 1.0f - std::pow(beta1, float(state.t));
    const float bc2 = 1.0f - std::pow(beta2, float(state.t));
    for (size_t i = 0; i < params.size(); ++i) {
        state.m[i] = beta1 * state.m[i] + (1.0f - beta1) * grads[i];
        state.v[i] = beta2 * state.v[i] + (1.0f - beta2) * grads[i] * grads[i];
        const float mhat = state.m[i] / bc1;
        const float vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace prt
