#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "recon/errors.hpp"
#include "recon/model.hpp"

namespace recon {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moment buffers, one pair per parameter tensor in layer order.
template <typename T>
struct AdamState {
    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;
    std::int64_t step = 0;

    template <typename U>
    static AdamState make_for(const AutoencoderModel<U>& model) {
        AdamState s;
        for_each_parameter(model, [&](std::size_t, const std::string&, const Tensor<U>& t) {
            s.m.push_back(Tensor<T>(t.shape()));
            s.v.push_back(Tensor<T>(t.shape()));
        });
        return s;
    }
};

/// Bias-corrected Adam update on one parameter buffer. `step` is the
/// already-incremented step counter (1 on the first update).
template <typename T>
void adam_update(std::span<T> params, std::span<const T> grads, std::span<T> m, std::span<T> v,
                 std::int64_t step, const AdamConfig& cfg) {
    if (params.size() != grads.size() || params.size() != m.size() || params.size() != v.size())
        throw ShapeMismatch("adam_update: buffer sizes differ");
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    const T corr1 = static_cast<T>(1.0 - std::pow(cfg.beta1, static_cast<double>(step)));
    const T corr2 = static_cast<T>(1.0 - std::pow(cfg.beta2, static_cast<double>(step)));
    const T lr = static_cast<T>(cfg.learning_rate);
    const T eps = static_cast<T>(cfg.epsilon);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const T g = grads[i];
        m[i] = b1 * m[i] + (T(1) - b1) * g;
        v[i] = b2 * v[i] + (T(1) - b2) * g * g;
        const T mhat = m[i] / corr1;
        const T vhat = v[i] / corr2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

/// One optimizer step over every parameter tensor of the model.
template <typename T>
void adam_step(AutoencoderModel<T>& model, const Gradients<T>& grads, AdamState<T>& state,
               const AdamConfig& cfg) {
    if (grads.layers.size() != model.layers.size())
        throw ShapeMismatch("adam_step: gradient layer count differs from model");
    ++state.step;
    std::size_t slot = 0;
    for_each_parameter(model, [&](std::size_t layer_idx, const std::string& name, Tensor<T>& p) {
        const auto& lg = grads.layers[layer_idx];
        const Tensor<T>& g = name.ends_with(".weight") ? lg.weights : lg.bias;
        if (g.shape() != p.shape())
            throw ShapeMismatch("adam_step: gradient shape mismatch for " + name);
        if (slot >= state.m.size()) throw ShapeMismatch("adam_step: state too small");
        adam_update<T>(p.data(), g.data(), state.m[slot].data(), state.v[slot].data(),
                       state.step, cfg);
        ++slot;
    });
}

} // namespace recon
