#pragma once

#include <filesystem>

#include "recon/tensor.hpp"

namespace recon {

/// Binary PGM ("P5", maxval 255). Values are mapped from [lo, hi] to bytes.
void write_pgm(const std::filesystem::path& path, const Tensor<float>& image, double lo,
               double hi);

/// Central slice along the leading axis of a rank-3 volume.
Tensor<float> central_slice(const Tensor<float>& volume);

} // namespace recon
