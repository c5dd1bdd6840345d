#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>

#include "recon/errors.hpp"
#include "recon/tensor.hpp"

namespace recon {

namespace detail {
// b > 0 in both.
inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
    return a > 0 ? (a + b - 1) / b : a / b;
}
inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    return a >= 0 ? a / b : -((-a + b - 1) / b);
}
} // namespace detail

/// Strided convolution with zero padding. Input and output are
/// channel-first: [channels, spatial...]. Weights are [out_ch, in_ch, k...].
template <typename T>
struct ConvLayer {
    int rank = 2; // spatial axes
    Tensor<T> weights;
    Tensor<T> bias;
    std::array<int, 3> stride{1, 1, 1};
    std::array<int, 3> pad{0, 0, 0};

    int out_channels() const { return static_cast<int>(weights.shape().extent(0)); }
    int in_channels() const { return static_cast<int>(weights.shape().extent(1)); }
    int kernel(int axis) const { return static_cast<int>(weights.shape().extent(2 + axis)); }
};

/// Transposed (adjoint) convolution, stride >= 1, no padding. Weights are
/// [in_ch, out_ch, k...] so that with the same weight buffer the layer is the
/// exact adjoint of a padding-free ConvLayer mapping out_ch -> in_ch.
template <typename T>
struct TransposedConvLayer {
    int rank = 2;
    Tensor<T> weights;
    Tensor<T> bias;
    std::array<int, 3> stride{1, 1, 1};

    int in_channels() const { return static_cast<int>(weights.shape().extent(0)); }
    int out_channels() const { return static_cast<int>(weights.shape().extent(1)); }
    int kernel(int axis) const { return static_cast<int>(weights.shape().extent(2 + axis)); }
};

/// Fully connected layer over rank-1 inputs. Weights are [out_units, in_units].
template <typename T>
struct DenseLayer {
    Tensor<T> weights;
    Tensor<T> bias;

    int out_units() const { return static_cast<int>(weights.shape().extent(0)); }
    int in_units() const { return static_cast<int>(weights.shape().extent(1)); }
};

struct ReluLayer {};

/// Output activation: clamps values to the active data range.
template <typename T>
struct ClampLayer {
    T lo, hi;
};

struct ReshapeLayer {
    Shape target;
};

struct CropLayer {
    Shape target;
};

template <typename T>
using Layer = std::variant<ConvLayer<T>, TransposedConvLayer<T>, DenseLayer<T>, ReluLayer,
                           ClampLayer<T>, ReshapeLayer, CropLayer>;

// ---------------------------------------------------------------------------
// Convolution forward/backward
// ---------------------------------------------------------------------------

template <typename T>
Shape conv_output_shape(const ConvLayer<T>& layer, const Shape& in) {
    if (static_cast<int>(in.rank()) != layer.rank + 1)
        throw ShapeMismatch("conv: input rank " + std::to_string(in.rank()) +
                            " does not match layer rank " + std::to_string(layer.rank));
    if (in.extent(0) != layer.in_channels())
        throw ShapeMismatch("conv: input has " + std::to_string(in.extent(0)) +
                            " channels, layer expects " + std::to_string(layer.in_channels()));
    std::vector<std::int64_t> dims{layer.out_channels()};
    for (int a = 0; a < layer.rank; ++a) {
        const std::int64_t n = in.extent(static_cast<std::size_t>(a) + 1);
        const std::int64_t e =
            detail::floor_div(n + 2 * layer.pad[static_cast<std::size_t>(a)] - layer.kernel(a),
                              layer.stride[static_cast<std::size_t>(a)]) +
            1;
        if (e < 1)
            throw ShapeMismatch("conv: output extent " + std::to_string(e) +
                                " on axis " + std::to_string(a));
        dims.push_back(e);
    }
    return Shape(dims);
}

namespace detail {

/// Geometry of the kernel-offset patch matrix ("im2col"): row r = ic * K + kk
/// holds, for every output position p, the input value the kernel tap kk
/// reads when producing p (zero where the tap falls in the padding). Building
/// it once per call turns every conv into dense row-broadcast loops over
/// contiguous memory, amortizing the strided gathers over output channels.
struct ColPlan {
    std::int64_t K = 1;      // kernel taps per channel
    std::int64_t P = 1;      // output positions
    std::int64_t rows = 1;   // IC * K
    std::int64_t in_chan_stride = 1;
};

template <typename T>
ColPlan make_col_plan(int rank, int in_channels, const std::int64_t* kernel,
                      const Shape& in, const Shape& out) {
    ColPlan plan;
    for (int a = 0; a < rank; ++a) plan.K *= kernel[a];
    for (int a = 0; a < rank; ++a) plan.P *= out.extent(static_cast<std::size_t>(a) + 1);
    plan.rows = in_channels * plan.K;
    plan.in_chan_stride = 1;
    for (int a = 0; a < rank; ++a) plan.in_chan_stride *= in.extent(static_cast<std::size_t>(a) + 1);
    return plan;
}

/// gather = true: col[r][p] = x[tap position]   (im2col)
/// gather = false: x[tap position] += col[r][p] (col2im scatter-add)
template <typename T, bool gather>
void col_transfer(int rank, const std::int64_t* kernel, const std::int64_t* stride,
                  const std::int64_t* pad, const Shape& in_shape, const Shape& out_shape,
                  std::conditional_t<gather, const T*, T*> x, T* col, const ColPlan& plan) {
    const int IC = static_cast<int>(in_shape.extent(0));
    const std::int64_t N0 = in_shape.extent(1), O0 = out_shape.extent(1);
    const std::int64_t N1 = rank >= 2 ? in_shape.extent(2) : 1;
    const std::int64_t O1 = rank >= 2 ? out_shape.extent(2) : 1;
    const std::int64_t N2 = rank >= 3 ? in_shape.extent(3) : 1;
    const std::int64_t O2 = rank >= 3 ? out_shape.extent(3) : 1;
    const std::int64_t K0 = kernel[0], K1 = rank >= 2 ? kernel[1] : 1,
                       K2 = rank >= 3 ? kernel[2] : 1;
    const std::int64_t S0 = stride[0], S1 = rank >= 2 ? stride[1] : 1,
                       S2 = rank >= 3 ? stride[2] : 1;
    const std::int64_t P0 = pad[0], P1 = rank >= 2 ? pad[1] : 0, P2 = rank >= 3 ? pad[2] : 0;

    for (int ic = 0; ic < IC; ++ic) {
        auto xchan = x + ic * plan.in_chan_stride;
        for (std::int64_t k0 = 0; k0 < K0; ++k0) {
            const std::int64_t oz0 = std::max<std::int64_t>(0, ceil_div(P0 - k0, S0));
            const std::int64_t oz1 = std::min(O0, floor_div(N0 - 1 - k0 + P0, S0) + 1);
            for (std::int64_t k1 = 0; k1 < K1; ++k1) {
                const std::int64_t oy0 = std::max<std::int64_t>(0, ceil_div(P1 - k1, S1));
                const std::int64_t oy1 = std::min(O1, floor_div(N1 - 1 - k1 + P1, S1) + 1);
                for (std::int64_t k2 = 0; k2 < K2; ++k2) {
                    const std::int64_t ox0 = std::max<std::int64_t>(0, ceil_div(P2 - k2, S2));
                    const std::int64_t ox1 = std::min(O2, floor_div(N2 - 1 - k2 + P2, S2) + 1);
                    const std::int64_t r = (ic * K0 + k0) * K1 * K2 + k1 * K2 + k2;
                    T* crow_base = col + r * plan.P;
                    for (std::int64_t oz = oz0; oz < oz1; ++oz) {
                        const std::int64_t iz = oz * S0 + k0 - P0;
                        for (std::int64_t oy = oy0; oy < oy1; ++oy) {
                            auto xrow = xchan + (iz * N1 + (oy * S1 + k1 - P1)) * N2 + (k2 - P2);
                            T* crow = crow_base + (oz * O1 + oy) * O2;
                            if constexpr (gather) {
                                for (std::int64_t ox = ox0; ox < ox1; ++ox)
                                    crow[ox] = xrow[ox * S2];
                            } else {
                                for (std::int64_t ox = ox0; ox < ox1; ++ox)
                                    xrow[ox * S2] += crow[ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

// y[M][P] (+)= a[M][R] * b[R][P]
template <typename T, bool accumulate>
void gemm_rowmajor(std::int64_t M, std::int64_t R, std::int64_t P, const T* a, const T* b,
                   T* y) {
    for (std::int64_t m = 0; m < M; ++m) {
        T* yrow = y + m * P;
        if constexpr (!accumulate)
            for (std::int64_t p = 0; p < P; ++p) yrow[p] = T(0);
        const T* arow = a + m * R;
        for (std::int64_t r = 0; r < R; ++r) {
            const T av = arow[r];
            if (av == T(0)) continue;
            const T* brow = b + r * P;
            for (std::int64_t p = 0; p < P; ++p) yrow[p] += av * brow[p];
        }
    }
}

// y[M][P] (+)= a[R][M]^T * b[R][P]
template <typename T>
void gemm_at_b(std::int64_t R, std::int64_t M, std::int64_t P, const T* a, const T* b, T* y) {
    for (std::int64_t m = 0; m < M; ++m)
        for (std::int64_t p = 0; p < P; ++p) y[m * P + p] = T(0);
    for (std::int64_t r = 0; r < R; ++r) {
        const T* arow = a + r * M;
        const T* brow = b + r * P;
        for (std::int64_t m = 0; m < M; ++m) {
            const T av = arow[m];
            if (av == T(0)) continue;
            T* yrow = y + m * P;
            for (std::int64_t p = 0; p < P; ++p) yrow[p] += av * brow[p];
        }
    }
}

// y[M][R] += a[M][P] * b[R][P]^T. The dot products run over a fixed set of
// independent partial accumulators (strict FP blocks reassociation of a
// single-accumulator reduction, which would leave this loop scalar); the
// summation order is fixed, so results stay run-to-run identical.
template <typename T>
void gemm_abt_acc(std::int64_t M, std::int64_t R, std::int64_t P, const T* a, const T* b,
                  T* y) {
    constexpr std::int64_t kLanes = 16;
    for (std::int64_t m = 0; m < M; ++m) {
        const T* arow = a + m * P;
        T* yrow = y + m * R;
        for (std::int64_t r = 0; r < R; ++r) {
            const T* brow = b + r * P;
            T lanes[kLanes] = {};
            std::int64_t p = 0;
            for (; p + kLanes <= P; p += kLanes)
                for (std::int64_t l = 0; l < kLanes; ++l)
                    lanes[l] += arow[p + l] * brow[p + l];
            T acc = T(0);
            for (std::int64_t l = 0; l < kLanes; ++l) acc += lanes[l];
            for (; p < P; ++p) acc += arow[p] * brow[p];
            yrow[r] += acc;
        }
    }
}

} // namespace detail

template <typename T>
Tensor<T> conv_forward(const ConvLayer<T>& layer, const Tensor<T>& x) {
    const Shape out_shape = conv_output_shape(layer, x.shape());
    Tensor<T> out(out_shape);

    const int IC = layer.in_channels(), OC = layer.out_channels();
    const std::int64_t kernel[3] = {layer.kernel(0), layer.rank >= 2 ? layer.kernel(1) : 1,
                                    layer.rank >= 3 ? layer.kernel(2) : 1};
    const std::int64_t stride[3] = {layer.stride[0], layer.stride[1], layer.stride[2]};
    const std::int64_t pad[3] = {layer.pad[0], layer.pad[1], layer.pad[2]};

    const auto plan = detail::make_col_plan<T>(layer.rank, IC, kernel, x.shape(), out_shape);
    std::vector<T> col(static_cast<std::size_t>(plan.rows * plan.P), T(0));
    detail::col_transfer<T, true>(layer.rank, kernel, stride, pad, x.shape(), out_shape,
                                  x.raw(), col.data(), plan);

    detail::gemm_rowmajor<T, false>(OC, plan.rows, plan.P, layer.weights.raw(), col.data(),
                                    out.raw());
    for (int oc = 0; oc < OC; ++oc) {
        const T b = layer.bias[static_cast<std::size_t>(oc)];
        T* ychan = out.raw() + oc * plan.P;
        for (std::int64_t p = 0; p < plan.P; ++p) ychan[p] += b;
    }
    return out;
}

/// Gradients of a conv layer: d(loss)/d(input), d/d(weights), d/d(bias),
/// given d(loss)/d(output).
template <typename T>
void conv_backward(const ConvLayer<T>& layer, const Tensor<T>& x, const Tensor<T>& grad_out,
                   Tensor<T>& grad_x, Tensor<T>& grad_w, Tensor<T>& grad_b) {
    const Shape out_shape = conv_output_shape(layer, x.shape());
    if (grad_out.shape() != out_shape)
        throw ShapeMismatch("conv backward: grad shape " + grad_out.shape().str() +
                            " != " + out_shape.str());
    grad_x = Tensor<T>(x.shape());
    grad_w = Tensor<T>(layer.weights.shape());
    grad_b = Tensor<T>(layer.bias.shape());

    const int IC = layer.in_channels(), OC = layer.out_channels();
    const std::int64_t kernel[3] = {layer.kernel(0), layer.rank >= 2 ? layer.kernel(1) : 1,
                                    layer.rank >= 3 ? layer.kernel(2) : 1};
    const std::int64_t stride[3] = {layer.stride[0], layer.stride[1], layer.stride[2]};
    const std::int64_t pad[3] = {layer.pad[0], layer.pad[1], layer.pad[2]};
    const auto plan = detail::make_col_plan<T>(layer.rank, IC, kernel, x.shape(), out_shape);

    for (int oc = 0; oc < OC; ++oc) {
        const T* gchan = grad_out.raw() + oc * plan.P;
        double gb = 0;
        for (std::int64_t i = 0; i < plan.P; ++i) gb += gchan[i];
        grad_b[static_cast<std::size_t>(oc)] = static_cast<T>(gb);
    }

    std::vector<T> col(static_cast<std::size_t>(plan.rows * plan.P), T(0));
    detail::col_transfer<T, true>(layer.rank, kernel, stride, pad, x.shape(), out_shape,
                                  x.raw(), col.data(), plan);
    // dW[oc][r] = sum_p g[oc][p] col[r][p]
    detail::gemm_abt_acc<T>(OC, plan.rows, plan.P, grad_out.raw(), col.data(), grad_w.raw());

    // d(col)[r][p] = sum_oc W[oc][r] g[oc][p], scattered back onto the input.
    detail::gemm_at_b<T>(OC, plan.rows, plan.P, layer.weights.raw(), grad_out.raw(),
                         col.data());
    detail::col_transfer<T, false>(layer.rank, kernel, stride, pad, x.shape(), out_shape,
                                   grad_x.raw(), col.data(), plan);
}

// ---------------------------------------------------------------------------
// Transposed convolution forward/backward
// ---------------------------------------------------------------------------

template <typename T>
Shape conv_transpose_output_shape(const TransposedConvLayer<T>& layer, const Shape& in) {
    if (static_cast<int>(in.rank()) != layer.rank + 1)
        throw ShapeMismatch("conv_transpose: input rank " + std::to_string(in.rank()) +
                            " does not match layer rank " + std::to_string(layer.rank));
    if (in.extent(0) != layer.in_channels())
        throw ShapeMismatch("conv_transpose: input has " + std::to_string(in.extent(0)) +
                            " channels, layer expects " + std::to_string(layer.in_channels()));
    std::vector<std::int64_t> dims{layer.out_channels()};
    for (int a = 0; a < layer.rank; ++a)
        dims.push_back((in.extent(static_cast<std::size_t>(a) + 1) - 1) *
                           layer.stride[static_cast<std::size_t>(a)] +
                       layer.kernel(a));
    return Shape(dims);
}

namespace detail {

/// Transposed conv via the adjoint patch matrix: the layer's output relates
/// to a padding-free stride-s convolution from out-space back to in-space,
/// so the same col machinery applies with the roles of the spaces swapped
/// (in-space positions play the "output positions" of that convolution).
template <typename T>
ColPlan tconv_plan(const TransposedConvLayer<T>& layer, const Shape& in,
                   const Shape& out, std::int64_t kernel[3], std::int64_t stride[3],
                   std::int64_t pad[3]) {
    kernel[0] = layer.kernel(0);
    kernel[1] = layer.rank >= 2 ? layer.kernel(1) : 1;
    kernel[2] = layer.rank >= 3 ? layer.kernel(2) : 1;
    stride[0] = layer.stride[0];
    stride[1] = layer.stride[1];
    stride[2] = layer.stride[2];
    pad[0] = pad[1] = pad[2] = 0;
    return make_col_plan<T>(layer.rank, layer.out_channels(), kernel, out, in);
}

} // namespace detail

template <typename T>
Tensor<T> conv_transpose_forward(const TransposedConvLayer<T>& layer, const Tensor<T>& x) {
    const Shape out_shape = conv_transpose_output_shape(layer, x.shape());
    Tensor<T> out(out_shape);

    const int IC = layer.in_channels(), OC = layer.out_channels();
    std::int64_t kernel[3], stride[3], pad[3];
    const auto plan = detail::tconv_plan(layer, x.shape(), out_shape, kernel, stride, pad);
    // plan.P = input positions; plan.rows = OC * K.

    // col[oc*K + kk][q] = sum_ic W[ic][oc*K + kk] * x[ic][q]
    std::vector<T> col(static_cast<std::size_t>(plan.rows * plan.P));
    detail::gemm_at_b<T>(IC, plan.rows, plan.P, layer.weights.raw(), x.raw(), col.data());

    for (int oc = 0; oc < OC; ++oc) {
        const T b = layer.bias[static_cast<std::size_t>(oc)];
        T* ychan = out.raw() + oc * (out.shape().element_count() / OC);
        for (std::int64_t i = 0; i < out.shape().element_count() / OC; ++i) ychan[i] = b;
    }
    // Scatter each tap's contribution onto the oversized output.
    detail::col_transfer<T, false>(layer.rank, kernel, stride, pad, out_shape, x.shape(),
                                   out.raw(), col.data(), plan);
    return out;
}

template <typename T>
void conv_transpose_backward(const TransposedConvLayer<T>& layer, const Tensor<T>& x,
                             const Tensor<T>& grad_out, Tensor<T>& grad_x, Tensor<T>& grad_w,
                             Tensor<T>& grad_b) {
    const Shape out_shape = conv_transpose_output_shape(layer, x.shape());
    if (grad_out.shape() != out_shape)
        throw ShapeMismatch("conv_transpose backward: grad shape " + grad_out.shape().str() +
                            " != " + out_shape.str());
    grad_x = Tensor<T>(x.shape());
    grad_w = Tensor<T>(layer.weights.shape());
    grad_b = Tensor<T>(layer.bias.shape());

    const int IC = layer.in_channels(), OC = layer.out_channels();
    std::int64_t kernel[3], stride[3], pad[3];
    const auto plan = detail::tconv_plan(layer, x.shape(), out_shape, kernel, stride, pad);

    const std::int64_t out_chan = out_shape.element_count() / OC;
    for (int oc = 0; oc < OC; ++oc) {
        const T* gchan = grad_out.raw() + oc * out_chan;
        double gb = 0;
        for (std::int64_t i = 0; i < out_chan; ++i) gb += gchan[i];
        grad_b[static_cast<std::size_t>(oc)] = static_cast<T>(gb);
    }

    // col_g[oc*K + kk][q] = g[oc][q*s + kk]
    std::vector<T> col(static_cast<std::size_t>(plan.rows * plan.P), T(0));
    detail::col_transfer<T, true>(layer.rank, kernel, stride, pad, out_shape, x.shape(),
                                  grad_out.raw(), col.data(), plan);

    // dX[ic][q] = sum_r W[ic][r] col_g[r][q]
    detail::gemm_rowmajor<T, false>(IC, plan.rows, plan.P, layer.weights.raw(), col.data(),
                                    grad_x.raw());
    // dW[ic][r] = sum_q x[ic][q] col_g[r][q]
    detail::gemm_abt_acc<T>(IC, plan.rows, plan.P, x.raw(), col.data(), grad_w.raw());
}

// ---------------------------------------------------------------------------
// Dense forward/backward
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> dense_forward(const DenseLayer<T>& layer, const Tensor<T>& x) {
    if (x.shape().rank() != 1 || x.shape().extent(0) != layer.in_units())
        throw ShapeMismatch("dense: input shape " + x.shape().str() + ", layer expects [" +
                            std::to_string(layer.in_units()) + "]");
    const int O = layer.out_units(), I = layer.in_units();
    Tensor<T> out(Shape{O});
    const T* W = layer.weights.raw();
    const T* X = x.raw();
    for (int o = 0; o < O; ++o) {
        const T* wrow = W + static_cast<std::size_t>(o) * I;
        T acc = layer.bias[static_cast<std::size_t>(o)];
        for (int i = 0; i < I; ++i) acc += wrow[i] * X[i];
        out[static_cast<std::size_t>(o)] = acc;
    }
    return out;
}

template <typename T>
void dense_backward(const DenseLayer<T>& layer, const Tensor<T>& x, const Tensor<T>& grad_out,
                    Tensor<T>& grad_x, Tensor<T>& grad_w, Tensor<T>& grad_b) {
    if (grad_out.shape().rank() != 1 || grad_out.shape().extent(0) != layer.out_units())
        throw ShapeMismatch("dense backward: grad shape " + grad_out.shape().str());
    const int O = layer.out_units(), I = layer.in_units();
    grad_x = Tensor<T>(x.shape());
    grad_w = Tensor<T>(layer.weights.shape());
    grad_b = grad_out;
    const T* W = layer.weights.raw();
    const T* X = x.raw();
    const T* G = grad_out.raw();
    T* GX = grad_x.raw();
    T* GW = grad_w.raw();
    for (int o = 0; o < O; ++o) {
        const T g = G[o];
        const T* wrow = W + static_cast<std::size_t>(o) * I;
        T* gwrow = GW + static_cast<std::size_t>(o) * I;
        for (int i = 0; i < I; ++i) {
            gwrow[i] = g * X[i];
            GX[i] += g * wrow[i];
        }
    }
}

// ---------------------------------------------------------------------------
// Pointwise layers
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
    Tensor<T> out(x.shape());
    const T* X = x.raw();
    T* Y = out.raw();
    for (std::size_t i = 0; i < x.size(); ++i) Y[i] = X[i] > T(0) ? X[i] : T(0);
    return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
    Tensor<T> gx(x.shape());
    const T* X = x.raw();
    const T* G = grad_out.raw();
    T* GX = gx.raw();
    for (std::size_t i = 0; i < x.size(); ++i) GX[i] = X[i] > T(0) ? G[i] : T(0);
    return gx;
}

template <typename T>
Tensor<T> clamp_forward(const ClampLayer<T>& layer, const Tensor<T>& x) {
    Tensor<T> out(x.shape());
    const T* X = x.raw();
    T* Y = out.raw();
    for (std::size_t i = 0; i < x.size(); ++i)
        Y[i] = X[i] < layer.lo ? layer.lo : (X[i] > layer.hi ? layer.hi : X[i]);
    return out;
}

template <typename T>
Tensor<T> clamp_backward(const ClampLayer<T>& layer, const Tensor<T>& x,
                         const Tensor<T>& grad_out) {
    Tensor<T> gx(x.shape());
    const T* X = x.raw();
    const T* G = grad_out.raw();
    T* GX = gx.raw();
    for (std::size_t i = 0; i < x.size(); ++i)
        GX[i] = (X[i] >= layer.lo && X[i] <= layer.hi) ? G[i] : T(0);
    return gx;
}

} // namespace recon
