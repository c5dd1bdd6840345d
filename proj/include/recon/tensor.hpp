#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "recon/errors.hpp"

namespace recon {

/// Extents of a dense row-major array. Between 1 and 5 axes, every extent >= 1.
class Shape {
public:
    static constexpr std::size_t kMaxRank = 5;

    Shape() = default;

    Shape(std::initializer_list<std::int64_t> dims)
        : Shape(std::vector<std::int64_t>(dims)) {}

    explicit Shape(std::vector<std::int64_t> dims) : dims_(std::move(dims)) {
        if (dims_.empty() || dims_.size() > kMaxRank)
            throw ShapeMismatch("shape rank must be between 1 and 5, got " +
                                std::to_string(dims_.size()));
        std::int64_t count = 1;
        for (std::int64_t d : dims_) {
            if (d < 1)
                throw ShapeMismatch("shape extent must be >= 1, got " + std::to_string(d));
            if (count > std::numeric_limits<std::int64_t>::max() / d)
                throw ShapeMismatch("shape element count overflows the index type");
            count *= d;
        }
        count_ = count;
    }

    std::size_t rank() const { return dims_.size(); }
    std::int64_t extent(std::size_t axis) const { return dims_[axis]; }
    std::int64_t element_count() const { return count_; }
    const std::vector<std::int64_t>& dims() const { return dims_; }

    bool operator==(const Shape& other) const { return dims_ == other.dims_; }
    bool operator!=(const Shape& other) const { return !(*this == other); }

    std::string str() const {
        std::ostringstream os;
        for (std::size_t i = 0; i < dims_.size(); ++i) {
            if (i) os << 'x';
            os << dims_[i];
        }
        return os.str();
    }

private:
    std::vector<std::int64_t> dims_;
    std::int64_t count_ = 0;
};

/// Dense row-major N-d array over float (training) or double (gradient checks).
/// Value-semantic; the public operations never alias buffers.
template <typename T>
class Tensor {
    static_assert(std::is_floating_point_v<T>);

public:
    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T(0))
        : shape_(std::move(shape)),
          data_(static_cast<std::size_t>(shape_.element_count()), fill) {}

    Tensor(Shape shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (static_cast<std::int64_t>(data_.size()) != shape_.element_count())
            throw ShapeMismatch("buffer length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_.str());
    }

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<const T> data() const { return data_; }
    std::span<T> data() { return data_; }
    const T* raw() const { return data_.data(); }
    T* raw() { return data_.data(); }

    T operator[](std::size_t i) const { return data_[i]; }
    T& operator[](std::size_t i) { return data_[i]; }

    /// Row-major element access; rank must match the argument count.
    template <typename... Ix>
    T& at(Ix... ix) {
        return data_[offset_of(ix...)];
    }
    template <typename... Ix>
    T at(Ix... ix) const {
        return data_[offset_of(ix...)];
    }

    bool all_finite() const {
        for (T v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool operator==(const Tensor& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

    /// Precision conversion (float <-> double).
    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return Tensor<U>(shape_, std::move(out));
    }

private:
    template <typename... Ix>
    std::size_t offset_of(Ix... ix) const {
        const std::int64_t idx[] = {static_cast<std::int64_t>(ix)...};
        const std::size_t n = sizeof...(Ix);
        std::size_t off = 0;
        for (std::size_t a = 0; a < n; ++a)
            off = off * static_cast<std::size_t>(shape_.extent(a)) +
                  static_cast<std::size_t>(idx[a]);
        return off;
    }

    Shape shape_;
    std::vector<T> data_;
};

/// Reinterprets the buffer under a new shape with the same element count.
template <typename T>
Tensor<T> reshape(const Tensor<T>& t, const Shape& target) {
    if (target.element_count() != t.shape().element_count())
        throw ShapeMismatch("reshape " + t.shape().str() + " -> " + target.str() +
                            ": element counts differ");
    return Tensor<T>(target, std::vector<T>(t.data().begin(), t.data().end()));
}

namespace detail {

template <typename T>
void copy_cropped(const Tensor<T>& src, Tensor<T>& dst, std::size_t axis,
                  std::size_t src_off, std::size_t dst_off) {
    const auto& s = src.shape();
    const auto& d = dst.shape();
    if (axis + 1 == s.rank()) {
        const T* in = src.raw() + src_off;
        T* out = dst.raw() + dst_off;
        std::copy(in, in + d.extent(axis), out);
        return;
    }
    std::size_t src_stride = 1, dst_stride = 1;
    for (std::size_t a = axis + 1; a < s.rank(); ++a) {
        src_stride *= static_cast<std::size_t>(s.extent(a));
        dst_stride *= static_cast<std::size_t>(d.extent(a));
    }
    for (std::int64_t i = 0; i < d.extent(axis); ++i)
        copy_cropped(src, dst, axis + 1, src_off + static_cast<std::size_t>(i) * src_stride,
                     dst_off + static_cast<std::size_t>(i) * dst_stride);
}

} // namespace detail

/// Origin-anchored crop: keeps indices [0, target_extent) along every axis.
template <typename T>
Tensor<T> crop_to(const Tensor<T>& t, const Shape& target) {
    if (target.rank() != t.shape().rank())
        throw ShapeMismatch("crop " + t.shape().str() + " -> " + target.str() +
                            ": rank differs");
    for (std::size_t a = 0; a < target.rank(); ++a)
        if (target.extent(a) > t.shape().extent(a))
            throw ShapeMismatch("crop " + t.shape().str() + " -> " + target.str() +
                                ": target extent exceeds source on axis " + std::to_string(a));
    if (target == t.shape()) return t;
    Tensor<T> out(target);
    detail::copy_cropped(t, out, 0, 0, 0);
    return out;
}

/// Adjoint of crop_to: embeds `t` at the origin of a zero tensor of shape `target`.
template <typename T>
Tensor<T> zero_pad_to(const Tensor<T>& t, const Shape& target) {
    if (target.rank() != t.shape().rank())
        throw ShapeMismatch("pad " + t.shape().str() + " -> " + target.str() + ": rank differs");
    for (std::size_t a = 0; a < target.rank(); ++a)
        if (target.extent(a) < t.shape().extent(a))
            throw ShapeMismatch("pad " + t.shape().str() + " -> " + target.str() +
                                ": target extent smaller than source on axis " + std::to_string(a));
    if (target == t.shape()) return t;
    Tensor<T> out(target);
    // Reuse the crop walker with src/dst roles swapped: iterate over t's extents.
    const auto& s = t.shape();
    std::vector<std::size_t> src_stride(s.rank(), 1), dst_stride(s.rank(), 1);
    for (std::size_t a = s.rank(); a-- > 1;) {
        src_stride[a - 1] = src_stride[a] * static_cast<std::size_t>(s.extent(a));
        dst_stride[a - 1] = dst_stride[a] * static_cast<std::size_t>(target.extent(a));
    }
    std::vector<std::int64_t> idx(s.rank(), 0);
    for (;;) {
        std::size_t so = 0, do_ = 0;
        for (std::size_t a = 0; a + 1 < s.rank(); ++a) {
            so += static_cast<std::size_t>(idx[a]) * src_stride[a];
            do_ += static_cast<std::size_t>(idx[a]) * dst_stride[a];
        }
        const T* in = t.raw() + so;
        std::copy(in, in + s.extent(s.rank() - 1), out.raw() + do_);
        std::size_t a = s.rank() - 1;
        for (;;) {
            if (a == 0) return out;
            --a;
            if (++idx[a] < s.extent(a)) break;
            idx[a] = 0;
        }
    }
}

/// Mean squared difference; accumulates in double regardless of T.
template <typename T>
double mse(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape())
        throw ShapeMismatch("mse: shapes " + a.shape().str() + " and " + b.shape().str() +
                            " differ");
    double acc = 0.0;
    const T* pa = a.raw();
    const T* pb = b.raw();
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(n);
}

} // namespace recon
