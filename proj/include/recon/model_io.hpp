#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>

#include "recon/io_util.hpp"
#include "recon/model.hpp"
#include "recon/tensor_io.hpp"

namespace recon {

// Checkpoint = text header (config id, input shape, builder widths, clamp
// range, layer kind list) followed by one named TNSR record per parameter
// tensor, in layer order. Deterministic byte-for-byte given the model.

template <typename T>
void write_checkpoint(std::ostream& os, const AutoencoderModel<T>& model) {
    os << "AEMODEL 1\n";
    os << "config = " << config_id_name(model.config) << "\n";
    os << "input_shape =";
    for (auto d : model.input_shape.dims()) os << ' ' << d;
    os << "\n";
    os << "widths =";
    for (int w : model.widths) os << ' ' << w;
    os << "\n";
    os << "clamp = " << format_g17(static_cast<double>(model.clamp_lo)) << ' '
       << format_g17(static_cast<double>(model.clamp_hi)) << "\n";
    os << "layers =";
    for (const auto& l : model.layers) os << ' ' << layer_kind_token(l);
    os << "\n";
    std::size_t n_tensors = 0;
    for_each_parameter(model, [&](std::size_t, const std::string&, const Tensor<T>&) {
        ++n_tensors;
    });
    os << "tensors = " << n_tensors << "\n";
    for_each_parameter(model, [&](std::size_t, const std::string& name, const Tensor<T>& t) {
        write_u32le(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_tnsr(os, t);
    });
    if (!os) throw IoFailure("checkpoint write failed");
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const AutoencoderModel<T>& model) {
    write_file_atomic(path, [&](std::ostream& os) { write_checkpoint(os, model); });
}

namespace detail {

inline std::string expect_header_line(std::istream& is, const std::string& key) {
    std::string line;
    if (!std::getline(is, line)) throw FormatError("checkpoint truncated before '" + key + "'");
    const std::string prefix = key + " =";
    if (line.rfind(prefix, 0) != 0)
        throw FormatError("checkpoint: expected '" + key + " = ...', got '" + line + "'");
    std::string rest = line.substr(prefix.size());
    if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
    return rest;
}

} // namespace detail

template <typename T>
AutoencoderModel<T> read_checkpoint(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "AEMODEL 1")
        throw FormatError("not a checkpoint file (bad magic line)");

    const std::string config_name = detail::expect_header_line(is, "config");
    const auto config = config_id_from_name(config_name);
    if (!config) throw FormatError("checkpoint: unknown config '" + config_name + "'");

    std::vector<std::int64_t> dims;
    {
        std::istringstream ss(detail::expect_header_line(is, "input_shape"));
        std::int64_t d;
        while (ss >> d) dims.push_back(d);
    }
    if (dims.empty()) throw FormatError("checkpoint: empty input_shape");

    std::vector<int> widths;
    {
        std::istringstream ss(detail::expect_header_line(is, "widths"));
        int w;
        while (ss >> w) widths.push_back(w);
    }

    double lo, hi;
    {
        std::istringstream ss(detail::expect_header_line(is, "clamp"));
        if (!(ss >> lo >> hi)) throw FormatError("checkpoint: bad clamp line");
    }

    const std::string layer_tokens = detail::expect_header_line(is, "layers");

    std::size_t n_tensors;
    {
        std::istringstream ss(detail::expect_header_line(is, "tensors"));
        if (!(ss >> n_tensors)) throw FormatError("checkpoint: bad tensors line");
    }

    AutoencoderModel<T> model;
    try {
        model = make_model<T>(*config, Shape(dims), widths, static_cast<T>(lo),
                              static_cast<T>(hi));
    } catch (const Error& e) {
        throw FormatError(std::string("checkpoint: cannot rebuild model: ") + e.what());
    }

    std::string expected_tokens;
    for (const auto& l : model.layers) {
        if (!expected_tokens.empty()) expected_tokens += ' ';
        expected_tokens += layer_kind_token(l);
    }
    if (layer_tokens != expected_tokens)
        throw FormatError("checkpoint: layer list does not match the " + config_name +
                          " architecture");

    std::size_t loaded = 0;
    for_each_parameter(model, [&](std::size_t, const std::string& name, Tensor<T>& t) {
        if (loaded >= n_tensors) throw FormatError("checkpoint: too few tensor records");
        std::uint32_t len;
        if (!read_u32le(is, len) || len > 256)
            throw FormatError("checkpoint truncated in record name");
        std::string rec_name(len, '\0');
        if (!is.read(rec_name.data(), len)) throw FormatError("checkpoint truncated in record name");
        if (rec_name != name)
            throw FormatError("checkpoint: expected record '" + name + "', found '" + rec_name +
                              "'");
        Tensor<T> value = read_tnsr<T>(is);
        if (value.shape() != t.shape())
            throw FormatError("checkpoint: record '" + name + "' has shape " +
                              value.shape().str() + ", expected " + t.shape().str());
        t = std::move(value);
        ++loaded;
    });
    if (loaded != n_tensors) throw FormatError("checkpoint: extra tensor records");
    is.peek();
    if (!is.eof()) throw FormatError("checkpoint: trailing bytes after last record");
    return model;
}

template <typename T>
AutoencoderModel<T> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoFailure("cannot open checkpoint " + path.string());
    return read_checkpoint<T>(is);
}

} // namespace recon
