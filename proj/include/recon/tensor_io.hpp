#pragma once

#include <istream>
#include <ostream>
#include <type_traits>

#include "recon/errors.hpp"
#include "recon/io_util.hpp"
#include "recon/tensor.hpp"

namespace recon {

// TNSR record layout:
//   magic "TRAC" | version 0x01 | dtype (1=f32, 2=f64, 3=u8) | rank |
//   rank x u64 LE extents | raw row-major data, little-endian.

inline constexpr char kTnsrMagic[4] = {'T', 'R', 'A', 'C'};
inline constexpr unsigned char kTnsrVersion = 0x01;

enum class TnsrDtype : unsigned char { F32 = 1, F64 = 2, U8 = 3 };

template <typename T>
void write_tnsr(std::ostream& os, const Tensor<T>& t) {
    os.write(kTnsrMagic, 4);
    os.put(static_cast<char>(kTnsrVersion));
    os.put(static_cast<char>(std::is_same_v<T, float> ? TnsrDtype::F32 : TnsrDtype::F64));
    os.put(static_cast<char>(t.shape().rank()));
    for (std::size_t a = 0; a < t.shape().rank(); ++a)
        write_u64le(os, static_cast<std::uint64_t>(t.shape().extent(a)));
    for (T v : t.data()) {
        if constexpr (std::is_same_v<T, float>)
            write_f32le(os, v);
        else
            write_f64le(os, v);
    }
    if (!os) throw IoFailure("TNSR write failed");
}

namespace detail {

inline Shape read_tnsr_header(std::istream& is, TnsrDtype& dtype) {
    char magic[4];
    if (!is.read(magic, 4)) throw FormatError("TNSR record truncated in header");
    if (std::string_view(magic, 4) != std::string_view(kTnsrMagic, 4))
        throw FormatError("bad TNSR magic");
    const int version = is.get();
    if (version != kTnsrVersion)
        throw FormatError("unsupported TNSR version " + std::to_string(version));
    const int dt = is.get();
    if (dt != 1 && dt != 2 && dt != 3)
        throw FormatError("unknown TNSR dtype " + std::to_string(dt));
    dtype = static_cast<TnsrDtype>(dt);
    const int rank = is.get();
    if (rank < 1 || rank > static_cast<int>(Shape::kMaxRank))
        throw FormatError("bad TNSR rank " + std::to_string(rank));
    std::vector<std::int64_t> dims(static_cast<std::size_t>(rank));
    for (auto& d : dims) {
        std::uint64_t v = 0;
        if (!read_u64le(is, v)) throw FormatError("TNSR record truncated in extents");
        if (v == 0 || v > (std::uint64_t{1} << 48)) throw FormatError("bad TNSR extent");
        d = static_cast<std::int64_t>(v);
    }
    try {
        return Shape(dims);
    } catch (const ShapeMismatch& e) {
        throw FormatError(std::string("bad TNSR shape: ") + e.what());
    }
}

} // namespace detail

/// Reads one TNSR record. Tensor<float> accepts f32 and u8 payloads (u8 is
/// widened exactly); Tensor<double> accepts f64 only.
template <typename T>
Tensor<T> read_tnsr(std::istream& is) {
    TnsrDtype dtype;
    const Shape shape = detail::read_tnsr_header(is, dtype);
    const std::size_t n = static_cast<std::size_t>(shape.element_count());
    std::vector<T> data(n);
    if constexpr (std::is_same_v<T, float>) {
        if (dtype == TnsrDtype::F32) {
            for (std::size_t i = 0; i < n; ++i) {
                std::uint32_t bits;
                if (!read_u32le(is, bits)) throw FormatError("TNSR record truncated in data");
                data[i] = std::bit_cast<float>(bits);
            }
        } else if (dtype == TnsrDtype::U8) {
            for (std::size_t i = 0; i < n; ++i) {
                const int b = is.get();
                if (b == std::char_traits<char>::eof())
                    throw FormatError("TNSR record truncated in data");
                data[i] = static_cast<float>(b);
            }
        } else {
            throw FormatError("TNSR dtype f64 cannot be read as 32-bit tensor");
        }
    } else {
        if (dtype != TnsrDtype::F64)
            throw FormatError("TNSR dtype is not f64");
        for (std::size_t i = 0; i < n; ++i) {
            std::uint64_t bits;
            if (!read_u64le(is, bits)) throw FormatError("TNSR record truncated in data");
            data[i] = std::bit_cast<double>(bits);
        }
    }
    return Tensor<T>(shape, std::move(data));
}

} // namespace recon
