#include "recon/dataset.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <sstream>

#include "recon/errors.hpp"
#include "recon/io_util.hpp"
#include "recon/rng.hpp"
#include "recon/tensor_io.hpp"

namespace recon {

std::string split_name(Split s) {
    switch (s) {
        case Split::None: return "none";
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

Split split_from_name(const std::string& name) {
    if (name == "none") return Split::None;
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    throw FormatError("unknown split '" + name + "'");
}

std::vector<std::size_t> DatasetManifest::indices_of(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i)
        if (split[i] == s) out.push_back(i);
    return out;
}

std::size_t DatasetManifest::count_of(Split s) const {
    return static_cast<std::size_t>(std::count(split.begin(), split.end(), s));
}

namespace {

// Positional 70/15/15 assignment over already-shuffled samples:
// train = floor(0.70 N), val = floor(0.15 N), test = remainder.
std::vector<Split> positional_splits(std::size_t n) {
    const std::size_t n_train = n * 70 / 100;
    const std::size_t n_val = n * 15 / 100;
    std::vector<Split> out(n, Split::Test);
    for (std::size_t i = 0; i < n_train; ++i) out[i] = Split::Train;
    for (std::size_t i = n_train; i < n_train + n_val; ++i) out[i] = Split::Val;
    return out;
}

std::pair<double, double> minmax_over(const std::vector<Sample>& samples) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& s : samples)
        for (float v : s.values.data()) {
            lo = std::min(lo, static_cast<double>(v));
            hi = std::max(hi, static_cast<double>(v));
        }
    return {lo, hi};
}

void map_minmax(std::vector<Sample>& samples, double lo, double hi) {
    const double range = hi - lo;
    for (auto& s : samples)
        for (float& v : s.values.data())
            v = static_cast<float>((static_cast<double>(v) - lo) / range);
}

} // namespace

std::pair<double, double> normalize_global_minmax(std::vector<Frame>& frames) {
    if (frames.empty()) throw InsufficientData("normalize: no frames");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& f : frames)
        for (float v : f.values.data()) {
            lo = std::min(lo, static_cast<double>(v));
            hi = std::max(hi, static_cast<double>(v));
        }
    if (!(hi > lo))
        throw DegenerateRange("normalize: global max " + format_g17(hi) +
                              " does not exceed global min " + format_g17(lo));
    const double range = hi - lo;
    for (auto& f : frames)
        for (float& v : f.values.data())
            v = static_cast<float>((static_cast<double>(v) - lo) / range);
    return {lo, hi};
}

void apply_minmax(DatasetManifest& manifest) {
    if (manifest.norm.mode == NormMode::MinMax) return;
    auto [lo, hi] = minmax_over(manifest.samples);
    if (!(hi > lo)) throw DegenerateRange("apply_minmax: constant dataset");
    map_minmax(manifest.samples, lo, hi);
    manifest.norm = {NormMode::MinMax, lo, hi};
}

DatasetManifest prepare_karman(const std::vector<Frame>& frames, int n_sims_selected,
                               std::uint64_t seed) {
    if (n_sims_selected < 1) throw BadParams("prepare_karman: n_sims_selected must be >= 1");

    std::map<std::int32_t, std::vector<const Frame*>> by_sim;
    for (const auto& f : frames) by_sim[f.sim_id].push_back(&f);
    if (static_cast<int>(by_sim.size()) < n_sims_selected)
        throw InsufficientData("prepare_karman: only " + std::to_string(by_sim.size()) +
                               " simulations available, " + std::to_string(n_sims_selected) +
                               " requested");

    std::vector<std::int32_t> sim_ids;
    for (const auto& [id, _] : by_sim) sim_ids.push_back(id);
    Rng sel_rng(mix_seed(seed, 0x73696d73ull)); // "sims"
    sel_rng.shuffle(sim_ids.begin(), sim_ids.end());
    sim_ids.resize(static_cast<std::size_t>(n_sims_selected));
    std::sort(sim_ids.begin(), sim_ids.end());

    DatasetManifest m;
    m.seed = seed;
    for (std::int32_t id : sim_ids) {
        auto sim_frames = by_sim[id];
        std::sort(sim_frames.begin(), sim_frames.end(),
                  [](const Frame* a, const Frame* b) { return a->t < b->t; });
        if (sim_frames.size() <= static_cast<std::size_t>(kKarmanDiscardSteps))
            throw InsufficientData("prepare_karman: simulation " + std::to_string(id) +
                                   " has only " + std::to_string(sim_frames.size()) +
                                   " time steps (need > " +
                                   std::to_string(kKarmanDiscardSteps) + ")");
        for (std::size_t i = kKarmanDiscardSteps; i < sim_frames.size(); ++i) {
            const Frame& f = *sim_frames[i];
            if (f.values.shape().rank() != 2)
                throw ShapeMismatch("prepare_karman: frame tensors must be rank 2");
            if (!m.samples.empty() && f.values.shape() != m.samples.front().values.shape())
                throw ShapeMismatch("prepare_karman: frame shapes differ across the ensemble");
            m.samples.push_back({f.sim_id, f.t, f.t, f.values});
        }
    }

    auto [lo, hi] = minmax_over(m.samples);
    if (!(hi > lo)) throw DegenerateRange("prepare_karman: constant dataset");
    map_minmax(m.samples, lo, hi);
    m.norm = {NormMode::MinMax, lo, hi};

    Rng shuf_rng(mix_seed(seed, 0x73687566ull)); // "shuf"
    shuf_rng.shuffle(m.samples.begin(), m.samples.end());
    m.split = positional_splits(m.samples.size());
    m.source = "karman2d(sims=" + std::to_string(n_sims_selected) + ")";
    return m;
}

DatasetManifest stack_temporal(const DatasetManifest& manifest) {
    std::map<std::int32_t, std::vector<const Sample*>> by_sim;
    for (const auto& s : manifest.samples) {
        if (s.values.shape().rank() != 2)
            throw ShapeMismatch("stack_temporal: expected rank-2 frames, got " +
                                s.values.shape().str());
        by_sim[s.sim_id].push_back(&s);
    }
    if (by_sim.empty()) throw InsufficientData("stack_temporal: empty manifest");

    DatasetManifest out;
    out.seed = manifest.seed;
    out.norm = manifest.norm;
    for (auto& [sim_id, frames] : by_sim) {
        std::sort(frames.begin(), frames.end(),
                  [](const Sample* a, const Sample* b) { return a->t_start < b->t_start; });
        if (frames.size() < 3)
            throw InsufficientData("stack_temporal: simulation " + std::to_string(sim_id) +
                                   " has fewer than 3 frames");
        // Disjoint triples over runs of consecutive time steps.
        std::size_t run_start = 0;
        for (std::size_t i = 1; i <= frames.size(); ++i) {
            const bool contiguous =
                i < frames.size() && frames[i]->t_start == frames[i - 1]->t_start + 1;
            if (contiguous) continue;
            for (std::size_t j = run_start; j + 3 <= i; j += 3) {
                const auto& fs = frames;
                const Shape& fshape = fs[j]->values.shape();
                Tensor<float> vol(Shape{3, fshape.extent(0), fshape.extent(1)});
                for (int d = 0; d < 3; ++d)
                    std::copy(fs[j + static_cast<std::size_t>(d)]->values.data().begin(),
                              fs[j + static_cast<std::size_t>(d)]->values.data().end(),
                              vol.raw() + static_cast<std::size_t>(d) * fshape.element_count());
                out.samples.push_back(
                    {sim_id, fs[j]->t_start, fs[j]->t_start + 2, std::move(vol)});
            }
            run_start = i;
        }
    }
    if (out.samples.empty()) throw InsufficientData("stack_temporal: no complete triples");

    Rng shuf_rng(mix_seed(manifest.seed, 0x7374636bull)); // "stck"
    shuf_rng.shuffle(out.samples.begin(), out.samples.end());
    out.split = positional_splits(out.samples.size());
    out.source = manifest.source + "+stack3";
    return out;
}

Tensor<float> mean_pool2(const Tensor<float>& volume) {
    if (volume.shape().rank() != 3)
        throw ShapeMismatch("mean_pool2: expected rank 3, got " + volume.shape().str());
    const std::int64_t D = volume.shape().extent(0), H = volume.shape().extent(1),
                       W = volume.shape().extent(2);
    if (D % 2 || H % 2 || W % 2)
        throw ShapeMismatch("mean_pool2: extents must be even, got " + volume.shape().str());
    Tensor<float> out(Shape{D / 2, H / 2, W / 2});
    const float* X = volume.raw();
    float* Y = out.raw();
    for (std::int64_t z = 0; z < D / 2; ++z)
        for (std::int64_t y = 0; y < H / 2; ++y)
            for (std::int64_t x = 0; x < W / 2; ++x) {
                double acc = 0;
                for (int dz = 0; dz < 2; ++dz)
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx)
                            acc += X[((2 * z + dz) * H + 2 * y + dy) * W + 2 * x + dx];
                Y[(z * (H / 2) + y) * (W / 2) + x] = static_cast<float>(acc / 8.0);
            }
    return out;
}

DatasetManifest prepare_droplet(const std::vector<Volume>& volumes, std::uint64_t seed) {
    if (volumes.empty()) throw InsufficientData("prepare_droplet: no volumes");
    std::vector<const Volume*> ordered;
    for (const auto& v : volumes) ordered.push_back(&v);
    std::sort(ordered.begin(), ordered.end(),
              [](const Volume* a, const Volume* b) { return a->t_start < b->t_start; });

    const std::size_t n_keep = ordered.size() * 3 / 5; // leading 60%
    if (n_keep == 0)
        throw InsufficientData("prepare_droplet: series too short (" +
                               std::to_string(ordered.size()) + " steps)");

    DatasetManifest m;
    m.seed = seed;
    for (std::size_t i = 0; i < n_keep; ++i) {
        const Volume& v = *ordered[i];
        m.samples.push_back({v.sim_id, v.t_start, v.t_end, mean_pool2(v.values)});
    }
    m.norm = {NormMode::BytePassthrough, 0.0, 255.0};

    Rng shuf_rng(mix_seed(seed, 0x73687566ull)); // "shuf"
    shuf_rng.shuffle(m.samples.begin(), m.samples.end());
    m.split = positional_splits(m.samples.size());
    m.source = "droplet(steps=" + std::to_string(n_keep) + ")";
    return m;
}

// ---------------------------------------------------------------------------
// Dataset file: text header (counts, normalization record, split table,
// provenance table) followed by one TNSR record per sample.
// ---------------------------------------------------------------------------

void write_dataset(const std::filesystem::path& path, const DatasetManifest& manifest) {
    if (manifest.split.size() != manifest.samples.size())
        throw ShapeMismatch("write_dataset: split table size mismatch");
    write_file_atomic(path, [&](std::ostream& os) {
        os << "DATASET 1\n";
        os << "samples = " << manifest.samples.size() << "\n";
        os << "normalization = "
           << (manifest.norm.mode == NormMode::MinMax ? "MINMAX" : "BYTE_PASSTHROUGH") << "\n";
        os << "global_min = " << format_g17(manifest.norm.global_min) << "\n";
        os << "global_max = " << format_g17(manifest.norm.global_max) << "\n";
        os << "source = " << manifest.source << "\n";
        os << "seed = " << manifest.seed << "\n";
        os << "splits:\n";
        for (std::size_t i = 0; i < manifest.split.size(); ++i)
            os << i << ',' << split_name(manifest.split[i]) << "\n";
        os << "provenance:\n";
        for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
            const auto& s = manifest.samples[i];
            os << i << ',' << s.sim_id << ',' << s.t_start << ',' << s.t_end << "\n";
        }
        os << "data:\n";
        for (const auto& s : manifest.samples) write_tnsr(os, s.values);
    });
}

namespace {

std::string header_value(std::istream& is, const std::string& key) {
    std::string line;
    if (!std::getline(is, line)) throw FormatError("dataset truncated before '" + key + "'");
    const std::string prefix = key + " = ";
    if (line.rfind(prefix, 0) != 0)
        throw FormatError("dataset: expected '" + key + " = ...', got '" + line + "'");
    return line.substr(prefix.size());
}

void expect_line(std::istream& is, const std::string& expected) {
    std::string line;
    if (!std::getline(is, line) || line != expected)
        throw FormatError("dataset: expected '" + expected + "' line");
}

} // namespace

DatasetManifest read_dataset(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoFailure("cannot open dataset " + path.string());

    std::string line;
    if (!std::getline(is, line) || line != "DATASET 1")
        throw FormatError("not a dataset file (bad magic line)");

    DatasetManifest m;
    std::size_t n = 0;
    try {
        n = std::stoull(header_value(is, "samples"));
    } catch (const std::exception&) {
        throw FormatError("dataset: bad samples count");
    }
    const std::string norm_token = header_value(is, "normalization");
    if (norm_token == "MINMAX")
        m.norm.mode = NormMode::MinMax;
    else if (norm_token == "BYTE_PASSTHROUGH")
        m.norm.mode = NormMode::BytePassthrough;
    else
        throw FormatError("dataset: unknown normalization '" + norm_token + "'");
    try {
        m.norm.global_min = std::stod(header_value(is, "global_min"));
        m.norm.global_max = std::stod(header_value(is, "global_max"));
        m.source = header_value(is, "source");
        m.seed = std::stoull(header_value(is, "seed"));
    } catch (const FormatError&) {
        throw;
    } catch (const std::exception&) {
        throw FormatError("dataset: bad header value");
    }

    expect_line(is, "splits:");
    m.split.resize(n);
    std::vector<std::array<std::int32_t, 3>> prov(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(is, line)) throw FormatError("dataset truncated in split table");
        const auto comma = line.find(',');
        if (comma == std::string::npos || std::stoull(line.substr(0, comma)) != i)
            throw FormatError("dataset: bad split table row '" + line + "'");
        m.split[i] = split_from_name(line.substr(comma + 1));
    }
    expect_line(is, "provenance:");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(is, line)) throw FormatError("dataset truncated in provenance table");
        std::istringstream ss(line);
        std::int64_t idx;
        char c1, c2, c3;
        std::int32_t sim, t0, t1;
        if (!(ss >> idx >> c1 >> sim >> c2 >> t0 >> c3 >> t1) || c1 != ',' || c2 != ',' ||
            c3 != ',' || idx != static_cast<std::int64_t>(i))
            throw FormatError("dataset: bad provenance row '" + line + "'");
        prov[i] = {sim, t0, t1};
    }
    expect_line(is, "data:");
    m.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Tensor<float> values = read_tnsr<float>(is);
        m.samples.push_back({prov[i][0], prov[i][1], prov[i][2], std::move(values)});
    }
    is.peek();
    if (!is.eof()) throw FormatError("dataset: trailing bytes after last record");
    return m;
}

} // namespace recon
