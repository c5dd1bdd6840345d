#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "recon/layers.hpp"
#include "recon/rng.hpp"
#include "recon/tensor.hpp"

namespace recon {

enum class ConfigId { Karman2D, Karman3DStack, Droplet3D };

inline std::string config_id_name(ConfigId id) {
    switch (id) {
        case ConfigId::Karman2D: return "KARMAN_2D";
        case ConfigId::Karman3DStack: return "KARMAN_3D_STACK";
        case ConfigId::Droplet3D: return "DROPLET_3D";
    }
    return "?";
}

inline std::optional<ConfigId> config_id_from_name(const std::string& name) {
    if (name == "KARMAN_2D") return ConfigId::Karman2D;
    if (name == "KARMAN_3D_STACK") return ConfigId::Karman3DStack;
    if (name == "DROPLET_3D") return ConfigId::Droplet3D;
    return std::nullopt;
}

/// Autoencoder as an ordered layer stack. `latent_layer` indexes the layer
/// whose output is the latent representation. `widths` holds the builder
/// hyper-parameters so checkpoints can reconstruct the exact architecture:
/// Karman configs use {conv_filters, dense_hidden, latent_units}; the droplet
/// config uses {filters_1, filters_2}.
template <typename T>
struct AutoencoderModel {
    ConfigId config = ConfigId::Karman2D;
    Shape input_shape;
    std::vector<Layer<T>> layers;
    std::size_t latent_layer = 0;
    std::vector<int> widths;
    T clamp_lo = T(0), clamp_hi = T(1);
};

template <typename T>
struct ForwardResult {
    Tensor<T> reconstruction;
    Tensor<T> latent;
};

/// Per-layer parameter gradients, aligned with the model's layer list.
/// Parameter-free layers hold empty tensors.
template <typename T>
struct LayerGrads {
    Tensor<T> weights;
    Tensor<T> bias;
};

template <typename T>
struct Gradients {
    std::vector<LayerGrads<T>> layers;
};

namespace detail {

template <typename T>
Tensor<T> layer_forward(const Layer<T>& layer, const Tensor<T>& x) {
    return std::visit(
        [&](const auto& l) -> Tensor<T> {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, ConvLayer<T>>)
                return conv_forward(l, x);
            else if constexpr (std::is_same_v<L, TransposedConvLayer<T>>)
                return conv_transpose_forward(l, x);
            else if constexpr (std::is_same_v<L, DenseLayer<T>>)
                return dense_forward(l, x);
            else if constexpr (std::is_same_v<L, ReluLayer>)
                return relu_forward(x);
            else if constexpr (std::is_same_v<L, ClampLayer<T>>)
                return clamp_forward(l, x);
            else if constexpr (std::is_same_v<L, ReshapeLayer>)
                return reshape(x, l.target);
            else
                return crop_to(x, l.target);
        },
        layer);
}

/// Backward through one layer: fills grads (if the layer has parameters) and
/// returns d(loss)/d(layer input).
template <typename T>
Tensor<T> layer_backward(const Layer<T>& layer, const Tensor<T>& x, const Tensor<T>& grad_out,
                         LayerGrads<T>& grads) {
    return std::visit(
        [&](const auto& l) -> Tensor<T> {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, ConvLayer<T>>) {
                Tensor<T> gx;
                conv_backward(l, x, grad_out, gx, grads.weights, grads.bias);
                return gx;
            } else if constexpr (std::is_same_v<L, TransposedConvLayer<T>>) {
                Tensor<T> gx;
                conv_transpose_backward(l, x, grad_out, gx, grads.weights, grads.bias);
                return gx;
            } else if constexpr (std::is_same_v<L, DenseLayer<T>>) {
                Tensor<T> gx;
                dense_backward(l, x, grad_out, gx, grads.weights, grads.bias);
                return gx;
            } else if constexpr (std::is_same_v<L, ReluLayer>) {
                return relu_backward(x, grad_out);
            } else if constexpr (std::is_same_v<L, ClampLayer<T>>) {
                return clamp_backward(l, x, grad_out);
            } else if constexpr (std::is_same_v<L, ReshapeLayer>) {
                return reshape(grad_out, x.shape());
            } else {
                return zero_pad_to(grad_out, x.shape());
            }
        },
        layer);
}

} // namespace detail

template <typename T>
ForwardResult<T> forward(const AutoencoderModel<T>& model, const Tensor<T>& x) {
    if (x.shape() != model.input_shape)
        throw ShapeMismatch("forward: input shape " + x.shape().str() + ", model expects " +
                            model.input_shape.str());
    Tensor<T> cur = x;
    Tensor<T> latent;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        cur = detail::layer_forward(model.layers[i], cur);
        if (i == model.latent_layer) latent = cur;
    }
    return {std::move(cur), std::move(latent)};
}

/// Gradients of mse(forward(x).reconstruction, target) w.r.t. every parameter
/// tensor. Forward activations are cached layer by layer; no taping.
template <typename T>
Gradients<T> backward(const AutoencoderModel<T>& model, const Tensor<T>& x,
                      const Tensor<T>& target, double* loss_out = nullptr) {
    if (x.shape() != model.input_shape)
        throw ShapeMismatch("backward: input shape " + x.shape().str() + ", model expects " +
                            model.input_shape.str());
    const std::size_t n_layers = model.layers.size();
    std::vector<Tensor<T>> inputs;
    inputs.reserve(n_layers);
    Tensor<T> cur = x;
    for (std::size_t i = 0; i < n_layers; ++i) {
        inputs.push_back(cur);
        cur = detail::layer_forward(model.layers[i], cur);
    }
    if (cur.shape() != target.shape())
        throw ShapeMismatch("backward: target shape " + target.shape().str() +
                            " != reconstruction shape " + cur.shape().str());

    if (loss_out) *loss_out = mse(cur, target);

    // d(mse)/d(recon) = 2 (recon - target) / n
    Tensor<T> grad(cur.shape());
    {
        const T scale = T(2) / static_cast<T>(cur.size());
        const T* R = cur.raw();
        const T* Tg = target.raw();
        T* G = grad.raw();
        for (std::size_t i = 0; i < cur.size(); ++i) G[i] = scale * (R[i] - Tg[i]);
    }

    Gradients<T> grads;
    grads.layers.resize(n_layers);
    for (std::size_t i = n_layers; i-- > 0;)
        grad = detail::layer_backward(model.layers[i], inputs[i], grad, grads.layers[i]);
    return grads;
}

/// Visits every parameter tensor in checkpoint order (layer index ascending,
/// weights before bias).
template <typename T, typename Fn>
void for_each_parameter(AutoencoderModel<T>& model, Fn&& fn) {
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        std::visit(
            [&](auto& l) {
                using L = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<L, ConvLayer<T>> ||
                              std::is_same_v<L, TransposedConvLayer<T>> ||
                              std::is_same_v<L, DenseLayer<T>>) {
                    fn(i, "layer" + std::to_string(i) + ".weight", l.weights);
                    fn(i, "layer" + std::to_string(i) + ".bias", l.bias);
                }
            },
            model.layers[i]);
    }
}

template <typename T, typename Fn>
void for_each_parameter(const AutoencoderModel<T>& model, Fn&& fn) {
    for_each_parameter(const_cast<AutoencoderModel<T>&>(model),
                       [&](std::size_t i, const std::string& name, Tensor<T>& t) {
                           fn(i, name, static_cast<const Tensor<T>&>(t));
                       });
}

template <typename T>
std::size_t parameter_count(const AutoencoderModel<T>& model) {
    std::size_t n = 0;
    for_each_parameter(model, [&](std::size_t, const std::string&, const Tensor<T>& t) {
        n += t.size();
    });
    return n;
}

/// Scaled uniform fan-in initialization, U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
/// drawn from a single seeded stream in layer order. Biases start at zero:
/// single-channel output layers would otherwise inherit one bias draw as a
/// constant offset of the whole reconstruction, and a negative draw parks
/// every output below the clamp floor where no gradient flows.
template <typename T>
void init_parameters(AutoencoderModel<T>& model, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x696e6974ull)); // "init"
    for (auto& layer : model.layers) {
        std::visit(
            [&](auto& l) {
                using L = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<L, ConvLayer<T>> ||
                              std::is_same_v<L, TransposedConvLayer<T>> ||
                              std::is_same_v<L, DenseLayer<T>>) {
                    std::int64_t fan_in = 1;
                    if constexpr (std::is_same_v<L, DenseLayer<T>>) {
                        fan_in = l.in_units();
                    } else {
                        fan_in = l.in_channels();
                        for (int a = 0; a < l.rank; ++a) fan_in *= l.kernel(a);
                    }
                    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
                    for (T& v : l.weights.data())
                        v = static_cast<T>(rng.uniform(-bound, bound));
                    l.bias.fill(T(0));
                }
            },
            layer);
    }
}

// ---------------------------------------------------------------------------
// The three paper configurations (plus toy instantiations via the width
// arguments). All use kernel 3 everywhere.
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
ConvLayer<T> make_conv(int rank, int in_ch, int out_ch, std::array<int, 3> stride,
                       std::array<int, 3> pad) {
    ConvLayer<T> l;
    l.rank = rank;
    std::vector<std::int64_t> wdims{out_ch, in_ch};
    for (int a = 0; a < rank; ++a) wdims.push_back(3);
    l.weights = Tensor<T>(Shape(wdims));
    l.bias = Tensor<T>(Shape{out_ch});
    l.stride = stride;
    l.pad = pad;
    return l;
}

template <typename T>
TransposedConvLayer<T> make_tconv(int rank, int in_ch, int out_ch, std::array<int, 3> stride) {
    TransposedConvLayer<T> l;
    l.rank = rank;
    std::vector<std::int64_t> wdims{in_ch, out_ch};
    for (int a = 0; a < rank; ++a) wdims.push_back(3);
    l.weights = Tensor<T>(Shape(wdims));
    l.bias = Tensor<T>(Shape{out_ch});
    l.stride = stride;
    return l;
}

template <typename T>
DenseLayer<T> make_dense(int in_units, int out_units) {
    DenseLayer<T> l;
    l.weights = Tensor<T>(Shape{out_units, in_units});
    l.bias = Tensor<T>(Shape{out_units});
    return l;
}

inline std::int64_t halved(std::int64_t n) { return (n - 1) / 2 + 1; } // ceil(n / 2)

} // namespace detail

/// Four stride-2 conv layers (pad 1), two dense layers to the latent vector,
/// one dense expansion, four stride-2 transposed convs, crop, clamp.
/// Input shape [H, W].
template <typename T>
AutoencoderModel<T> make_karman_2d(const Shape& input, int filters = 64, int dense_hidden = 256,
                                   int latent_units = 128, T clamp_lo = T(0), T clamp_hi = T(1)) {
    if (input.rank() != 2)
        throw ShapeMismatch("KARMAN_2D expects a rank-2 input, got " + input.str());
    using namespace detail;
    AutoencoderModel<T> m;
    m.config = ConfigId::Karman2D;
    m.input_shape = input;
    m.widths = {filters, dense_hidden, latent_units};
    m.clamp_lo = clamp_lo;
    m.clamp_hi = clamp_hi;

    const std::int64_t H = input.extent(0), W = input.extent(1);
    m.layers.push_back(ReshapeLayer{Shape{1, H, W}});
    std::int64_t h = H, w = W;
    int ch = 1;
    for (int i = 0; i < 4; ++i) {
        m.layers.push_back(make_conv<T>(2, ch, filters, {2, 2, 1}, {1, 1, 0}));
        m.layers.push_back(ReluLayer{});
        h = halved(h);
        w = halved(w);
        ch = filters;
    }
    const std::int64_t flat = static_cast<std::int64_t>(filters) * h * w;
    m.layers.push_back(ReshapeLayer{Shape{flat}});
    m.layers.push_back(make_dense<T>(static_cast<int>(flat), dense_hidden));
    m.layers.push_back(ReluLayer{});
    m.layers.push_back(make_dense<T>(dense_hidden, latent_units));
    m.latent_layer = m.layers.size() - 1;
    m.layers.push_back(make_dense<T>(latent_units, static_cast<int>(flat)));
    m.layers.push_back(ReluLayer{});
    m.layers.push_back(ReshapeLayer{Shape{filters, h, w}});
    for (int i = 0; i < 4; ++i) {
        const bool last = i == 3;
        m.layers.push_back(make_tconv<T>(2, filters, last ? 1 : filters, {2, 2, 1}));
        if (!last) m.layers.push_back(ReluLayer{});
    }
    m.layers.push_back(CropLayer{Shape{1, H, W}});
    m.layers.push_back(ReshapeLayer{Shape{H, W}});
    m.layers.push_back(ClampLayer<T>{clamp_lo, clamp_hi});
    return m;
}

/// The 2D configuration with rank-3 kernels over a depth-3 temporal axis:
/// temporal stride 1 / pad 1 in the encoder so the depth is preserved,
/// spatial stride 2. Input shape [3, H, W] (time first).
template <typename T>
AutoencoderModel<T> make_karman_3d(const Shape& input, int filters = 64, int dense_hidden = 256,
                                   int latent_units = 128, T clamp_lo = T(0), T clamp_hi = T(1)) {
    if (input.rank() != 3)
        throw ShapeMismatch("KARMAN_3D_STACK expects a rank-3 input, got " + input.str());
    using namespace detail;
    AutoencoderModel<T> m;
    m.config = ConfigId::Karman3DStack;
    m.input_shape = input;
    m.widths = {filters, dense_hidden, latent_units};
    m.clamp_lo = clamp_lo;
    m.clamp_hi = clamp_hi;

    const std::int64_t D = input.extent(0), H = input.extent(1), W = input.extent(2);
    m.layers.push_back(ReshapeLayer{Shape{1, D, H, W}});
    std::int64_t h = H, w = W;
    int ch = 1;
    for (int i = 0; i < 4; ++i) {
        m.layers.push_back(make_conv<T>(3, ch, filters, {1, 2, 2}, {1, 1, 1}));
        m.layers.push_back(ReluLayer{});
        h = halved(h);
        w = halved(w);
        ch = filters;
    }
    const std::int64_t flat = static_cast<std::int64_t>(filters) * D * h * w;
    m.layers.push_back(ReshapeLayer{Shape{flat}});
    m.layers.push_back(make_dense<T>(static_cast<int>(flat), dense_hidden));
    m.layers.push_back(ReluLayer{});
    m.layers.push_back(make_dense<T>(dense_hidden, latent_units));
    m.latent_layer = m.layers.size() - 1;
    m.layers.push_back(make_dense<T>(latent_units, static_cast<int>(flat)));
    m.layers.push_back(ReluLayer{});
    m.layers.push_back(ReshapeLayer{Shape{filters, D, h, w}});
    for (int i = 0; i < 4; ++i) {
        const bool last = i == 3;
        m.layers.push_back(make_tconv<T>(3, filters, last ? 1 : filters, {1, 2, 2}));
        if (!last) m.layers.push_back(ReluLayer{});
    }
    m.layers.push_back(CropLayer{Shape{1, D, H, W}});
    m.layers.push_back(ReshapeLayer{Shape{D, H, W}});
    m.layers.push_back(ClampLayer<T>{clamp_lo, clamp_hi});
    return m;
}

/// Shallow volumetric autoencoder: two feature convs plus one
/// channel-collapsing stride-2 conv to a single-channel spatial latent of
/// side input/8, mirrored by three transposed convs and a crop.
/// Input shape [S, S, S].
template <typename T>
AutoencoderModel<T> make_droplet_3d(const Shape& input, int filters_1 = 32, int filters_2 = 64,
                                    T clamp_lo = T(0), T clamp_hi = T(255)) {
    if (input.rank() != 3)
        throw ShapeMismatch("DROPLET_3D expects a rank-3 input, got " + input.str());
    using namespace detail;
    AutoencoderModel<T> m;
    m.config = ConfigId::Droplet3D;
    m.input_shape = input;
    m.widths = {filters_1, filters_2};
    m.clamp_lo = clamp_lo;
    m.clamp_hi = clamp_hi;

    const std::int64_t N0 = input.extent(0), N1 = input.extent(1), N2 = input.extent(2);
    m.layers.push_back(ReshapeLayer{Shape{1, N0, N1, N2}});
    std::int64_t e0 = N0, e1 = N1, e2 = N2;
    m.layers.push_back(make_conv<T>(3, 1, filters_1, {2, 2, 2}, {1, 1, 1}));
    m.layers.push_back(ReluLayer{});
    e0 = halved(e0), e1 = halved(e1), e2 = halved(e2);
    m.layers.push_back(make_conv<T>(3, filters_1, filters_2, {2, 2, 2}, {1, 1, 1}));
    m.layers.push_back(ReluLayer{});
    e0 = halved(e0), e1 = halved(e1), e2 = halved(e2);
    m.layers.push_back(make_conv<T>(3, filters_2, 1, {2, 2, 2}, {1, 1, 1}));
    e0 = halved(e0), e1 = halved(e1), e2 = halved(e2);
    m.layers.push_back(ReshapeLayer{Shape{e0, e1, e2}}); // latent grid
    m.latent_layer = m.layers.size() - 1;
    m.layers.push_back(ReshapeLayer{Shape{1, e0, e1, e2}});
    m.layers.push_back(make_tconv<T>(3, 1, filters_2, {2, 2, 2}));
    m.layers.push_back(ReluLayer{});
    m.layers.push_back(make_tconv<T>(3, filters_2, filters_1, {2, 2, 2}));
    m.layers.push_back(ReluLayer{});
    m.layers.push_back(make_tconv<T>(3, filters_1, 1, {2, 2, 2}));
    m.layers.push_back(CropLayer{Shape{1, N0, N1, N2}});
    m.layers.push_back(ReshapeLayer{Shape{N0, N1, N2}});
    m.layers.push_back(ClampLayer<T>{clamp_lo, clamp_hi});
    return m;
}

/// Rebuilds a configuration from its checkpoint metadata.
template <typename T>
AutoencoderModel<T> make_model(ConfigId id, const Shape& input, const std::vector<int>& widths,
                               T clamp_lo, T clamp_hi) {
    switch (id) {
        case ConfigId::Karman2D:
            if (widths.size() != 3) throw BadParams("KARMAN_2D needs 3 width values");
            return make_karman_2d<T>(input, widths[0], widths[1], widths[2], clamp_lo, clamp_hi);
        case ConfigId::Karman3DStack:
            if (widths.size() != 3) throw BadParams("KARMAN_3D_STACK needs 3 width values");
            return make_karman_3d<T>(input, widths[0], widths[1], widths[2], clamp_lo, clamp_hi);
        case ConfigId::Droplet3D:
            if (widths.size() != 2) throw BadParams("DROPLET_3D needs 2 width values");
            return make_droplet_3d<T>(input, widths[0], widths[1], clamp_lo, clamp_hi);
    }
    throw BadParams("unknown config id");
}

/// Token naming a layer's kind, used in checkpoint headers.
template <typename T>
std::string layer_kind_token(const Layer<T>& layer) {
    return std::visit(
        [](const auto& l) -> std::string {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, ConvLayer<T>>)
                return "conv";
            else if constexpr (std::is_same_v<L, TransposedConvLayer<T>>)
                return "tconv";
            else if constexpr (std::is_same_v<L, DenseLayer<T>>)
                return "dense";
            else if constexpr (std::is_same_v<L, ReluLayer>)
                return "relu";
            else if constexpr (std::is_same_v<L, ClampLayer<T>>)
                return "clamp";
            else if constexpr (std::is_same_v<L, ReshapeLayer>)
                return "reshape";
            else
                return "crop";
        },
        layer);
}

} // namespace recon
