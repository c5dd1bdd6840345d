#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "recon/tensor.hpp"

namespace recon {

enum class Split : std::uint8_t { None = 0, Train = 1, Val = 2, Test = 3 };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

enum class NormMode : std::uint8_t { BytePassthrough = 0, MinMax = 1 };

/// How the stored values relate to the raw byte-scale data. BYTE_PASSTHROUGH
/// keeps values in [0, 255] untouched; MINMAX maps the recorded global
/// extremes onto [0, 1].
struct NormalizationRecord {
    NormMode mode = NormMode::BytePassthrough;
    double global_min = 0.0;
    double global_max = 255.0;
};

/// Active data range (the scale losses and thresholds live in).
inline double scale_lo(const NormalizationRecord&) { return 0.0; }
inline double scale_hi(const NormalizationRecord& n) {
    return n.mode == NormMode::MinMax ? 1.0 : 255.0;
}

inline double denormalize(const NormalizationRecord& n, double v) {
    return n.mode == NormMode::MinMax ? v * (n.global_max - n.global_min) + n.global_min : v;
}

/// One raw 2D field from a simulation, byte-scale values.
struct Frame {
    std::int32_t sim_id = 0;
    std::int32_t t = 0;
    Tensor<float> values;
};

/// One scoring unit: a 2D frame (t_start == t_end, rank-2 tensor) or a 3D
/// volume (rank-3 tensor; stacked Karman volumes span t_start..t_start+2).
struct Sample {
    std::int32_t sim_id = 0;
    std::int32_t t_start = 0;
    std::int32_t t_end = 0;
    Tensor<float> values;
};

using Volume = Sample;

struct DatasetManifest {
    std::vector<Sample> samples;
    std::vector<Split> split; // parallel to samples
    NormalizationRecord norm;
    std::string source;
    std::uint64_t seed = 0;

    std::vector<std::size_t> indices_of(Split s) const;
    std::size_t count_of(Split s) const;
};

/// Number of leading formation time steps dropped from every simulation.
inline constexpr int kKarmanDiscardSteps = 18;

/// In-place global min-max normalization; returns (min, max). Throws
/// DegenerateRange when the data are constant.
std::pair<double, double> normalize_global_minmax(std::vector<Frame>& frames);

/// Re-normalizes a byte-scale manifest to [0, 1] using its global extremes.
void apply_minmax(DatasetManifest& manifest);

/// Drops the first 18 steps of every simulation, selects `n_sims_selected`
/// simulations by seeded draw, min-max normalizes over everything kept, then
/// shuffles and splits 70/15/15 (floor/floor/remainder).
DatasetManifest prepare_karman(const std::vector<Frame>& frames, int n_sims_selected,
                               std::uint64_t seed);

/// Restacks a 2D Karman manifest into depth-3 volumes over non-overlapping
/// consecutive time triples within each simulation (leftover 1-2 frames are
/// dropped), then reassigns splits per volume using the manifest seed.
DatasetManifest stack_temporal(const DatasetManifest& manifest);

/// 2x2x2 mean pooling; every extent must be even.
Tensor<float> mean_pool2(const Tensor<float>& volume);

/// Halves each spatial axis by mean pooling, keeps the leading 60% of time
/// steps, and splits 70/15/15. Values stay in the byte range.
DatasetManifest prepare_droplet(const std::vector<Volume>& volumes, std::uint64_t seed);

void write_dataset(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_dataset(const std::filesystem::path& path);

} // namespace recon
