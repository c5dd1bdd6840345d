#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "recon/dataset.hpp"
#include "recon/errors.hpp"
#include "recon/rng.hpp"
#include "recon/synth.hpp"

using namespace recon;

namespace {

std::filesystem::path temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "recon_dataset_test";
    std::filesystem::create_directories(dir);
    return dir;
}

std::vector<Frame> grid_frames(int n_sims, int n_steps, const Shape& shape,
                               std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Frame> frames;
    for (int s = 0; s < n_sims; ++s)
        for (int t = 0; t < n_steps; ++t) {
            Tensor<float> v(shape);
            for (auto& x : v.data()) x = static_cast<float>(rng.uniform(0.0, 255.0));
            frames.push_back({s, t, std::move(v)});
        }
    return frames;
}

bool manifests_equal(const DatasetManifest& a, const DatasetManifest& b) {
    if (a.samples.size() != b.samples.size() || a.split != b.split) return false;
    if (a.norm.mode != b.norm.mode || a.norm.global_min != b.norm.global_min ||
        a.norm.global_max != b.norm.global_max)
        return false;
    if (a.source != b.source || a.seed != b.seed) return false;
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        const auto& sa = a.samples[i];
        const auto& sb = b.samples[i];
        if (sa.sim_id != sb.sim_id || sa.t_start != sb.t_start || sa.t_end != sb.t_end ||
            !(sa.values == sb.values))
            return false;
    }
    return true;
}

} // namespace

TEST_CASE("normalize_global_minmax maps extremes to 0 and 1") {
    std::vector<Frame> frames;
    frames.push_back({0, 0, Tensor<float>(Shape{3}, {5, 10, 15})});
    const auto [lo, hi] = normalize_global_minmax(frames);
    CHECK(lo == 5.0);
    CHECK(hi == 15.0);
    CHECK(frames[0].values[0] == 0.0f);
    CHECK(frames[0].values[1] == 0.5f);
    CHECK(frames[0].values[2] == 1.0f);

    // already-[0,1] data with observed extremes 0 and 1 is unchanged
    std::vector<Frame> unit;
    unit.push_back({0, 0, Tensor<float>(Shape{4}, {0.0f, 0.25f, 0.75f, 1.0f})});
    normalize_global_minmax(unit);
    CHECK(unit[0].values == Tensor<float>(Shape{4}, {0.0f, 0.25f, 0.75f, 1.0f}));

    std::vector<Frame> constant;
    constant.push_back({0, 0, Tensor<float>(Shape{3}, 7.0f)});
    CHECK_THROWS_AS(normalize_global_minmax(constant), DegenerateRange);
}

TEST_CASE("prepare_karman reproduces the paper-scale counts") {
    const auto frames = grid_frames(90, 54, Shape{16, 12}, 1);
    const auto m = prepare_karman(frames, 90, 42);
    CHECK(m.samples.size() == 3240); // 90 sims x 36 kept steps
    CHECK(m.count_of(Split::Train) == 2268);
    CHECK(m.count_of(Split::Val) == 486);
    CHECK(m.count_of(Split::Test) == 486);

    // min-max achieves exact extremes over the kept set
    float lo = 1e9f, hi = -1e9f;
    for (const auto& s : m.samples)
        for (float v : s.values.data()) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    CHECK(lo == 0.0f);
    CHECK(hi == 1.0f);
    CHECK(m.norm.mode == NormMode::MinMax);

    // the first 18 steps of every simulation are gone
    for (const auto& s : m.samples) CHECK(s.t_start >= kKarmanDiscardSteps);
}

TEST_CASE("prepare_karman boundary and determinism") {
    // a simulation of exactly 18 steps contributes nothing -> error if selected
    const auto short_frames = grid_frames(1, 18, Shape{4, 4}, 2);
    CHECK_THROWS_AS(prepare_karman(short_frames, 1, 1), InsufficientData);

    const auto frames = grid_frames(5, 24, Shape{4, 4}, 3);
    CHECK_THROWS_AS(prepare_karman(frames, 6, 1), InsufficientData);

    const auto a = prepare_karman(frames, 3, 99);
    const auto b = prepare_karman(frames, 3, 99);
    CHECK(manifests_equal(a, b));

    // the split is a partition obeying floor/floor/remainder
    const std::size_t n = a.samples.size();
    CHECK(a.count_of(Split::Train) == n * 70 / 100);
    CHECK(a.count_of(Split::Val) == n * 15 / 100);
    CHECK(a.count_of(Split::Test) == n - n * 70 / 100 - n * 15 / 100);
    CHECK(a.count_of(Split::None) == 0);
}

TEST_CASE("denormalize inverts the min-max map") {
    auto frames = grid_frames(1, 30, Shape{6, 6}, 4);
    std::vector<float> raw;
    for (const auto& f : frames)
        for (float v : f.values.data()) raw.push_back(v);
    const auto [lo, hi] = normalize_global_minmax(frames);
    NormalizationRecord norm{NormMode::MinMax, lo, hi};
    std::size_t k = 0;
    for (const auto& f : frames)
        for (float v : f.values.data()) {
            const double back = denormalize(norm, v);
            CHECK(back == doctest::Approx(raw[k]).epsilon(1e-6));
            ++k;
        }
}

TEST_CASE("stack_temporal forms disjoint triples per simulation") {
    const auto frames = grid_frames(2, 54, Shape{6, 4}, 5);
    const auto m2d = prepare_karman(frames, 2, 7);
    REQUIRE(m2d.samples.size() == 2 * 36);

    const auto m3d = stack_temporal(m2d);
    CHECK(m3d.samples.size() == 2 * 12); // 36 frames -> 12 volumes per sim
    for (const auto& v : m3d.samples) {
        CHECK(v.values.shape().rank() == 3);
        CHECK(v.values.shape().extent(0) == 3);
        CHECK(v.t_end == v.t_start + 2);
        CHECK((v.t_start - kKarmanDiscardSteps) % 3 == 0); // aligned windows
    }
    CHECK(m3d.norm.mode == m2d.norm.mode);
    CHECK(m3d.norm.global_min == m2d.norm.global_min);

    // depth slices preserve the frame order and contents exactly
    const auto& vol = m3d.samples.front();
    for (int d = 0; d < 3; ++d) {
        const Sample* frame = nullptr;
        for (const auto& s : m2d.samples)
            if (s.sim_id == vol.sim_id && s.t_start == vol.t_start + d) frame = &s;
        REQUIRE(frame != nullptr);
        const std::size_t plane = frame->values.size();
        for (std::size_t i = 0; i < plane; ++i)
            CHECK(vol.values[static_cast<std::size_t>(d) * plane + i] == frame->values[i]);
    }

    // never mixes simulations: provenance sim ids must exist with all 3 steps
    DatasetManifest two;
    two.samples.push_back({0, 18, 18, Tensor<float>(Shape{4, 4}, 0.1f)});
    two.samples.push_back({0, 19, 19, Tensor<float>(Shape{4, 4}, 0.2f)});
    two.split = {Split::Train, Split::Train};
    two.norm = {NormMode::MinMax, 0, 1};
    CHECK_THROWS_AS(stack_temporal(two), InsufficientData);
}

TEST_CASE("mean_pool2") {
    Tensor<float> block(Shape{2, 2, 2}, {0, 0, 0, 0, 255, 255, 255, 255});
    const auto pooled = mean_pool2(block);
    CHECK(pooled.shape() == Shape{1, 1, 1});
    CHECK(pooled[0] == 127.5f);

    const Tensor<float> c255(Shape{4, 4, 4}, 255.0f);
    const auto pc = mean_pool2(c255);
    for (std::size_t i = 0; i < pc.size(); ++i) CHECK(pc[i] == 255.0f);

    CHECK_THROWS_AS(mean_pool2(Tensor<float>(Shape{3, 4, 4})), ShapeMismatch);

    // pooling conserves total mass: sum(pooled) * 8 = sum(original)
    Rng rng(6);
    Tensor<float> v(Shape{8, 8, 8});
    for (auto& x : v.data()) x = static_cast<float>(rng.uniform(0.0, 255.0));
    double sum_orig = 0, sum_pooled = 0;
    for (float x : v.data()) sum_orig += x;
    const auto vp = mean_pool2(v);
    for (float x : vp.data()) sum_pooled += x;
    CHECK(sum_pooled * 8 == doctest::Approx(sum_orig).epsilon(1e-6));
}

TEST_CASE("prepare_droplet keeps the leading 60% and halves each axis") {
    DropletParams params;
    params.seed = 8;
    const auto volumes = gen_droplet_series(params, 50, 32);
    const auto m = prepare_droplet(volumes, 11);
    CHECK(m.samples.size() == 30); // floor(0.6 * 50)
    for (const auto& s : m.samples) {
        CHECK(s.values.shape() == Shape{16, 16, 16});
        CHECK(s.t_start < 30); // only leading steps retained
    }
    CHECK(m.norm.mode == NormMode::BytePassthrough);
    CHECK(m.count_of(Split::Train) == 21);
    CHECK(m.count_of(Split::Val) == 4);
    CHECK(m.count_of(Split::Test) == 5);

    std::vector<Volume> odd;
    for (int t = 0; t < 10; ++t)
        odd.push_back({0, t, t, Tensor<float>(Shape{15, 16, 16})});
    CHECK_THROWS_AS(prepare_droplet(odd, 1), ShapeMismatch);
    CHECK_THROWS_AS(prepare_droplet({}, 1), InsufficientData);
}

TEST_CASE("apply_minmax rescales a byte-range manifest to [0,1]") {
    DropletParams params;
    params.seed = 9;
    const auto volumes = gen_droplet_series(params, 20, 32);
    auto m = prepare_droplet(volumes, 12);
    apply_minmax(m);
    CHECK(m.norm.mode == NormMode::MinMax);
    float hi = -1e9f;
    for (const auto& s : m.samples)
        for (float v : s.values.data()) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
            hi = std::max(hi, v);
        }
    CHECK(hi == 1.0f);
}

TEST_CASE("dataset files round-trip bit-exactly") {
    const auto dir = temp_dir();
    const auto path = dir / "roundtrip.ds";

    const auto frames = grid_frames(3, 25, Shape{6, 5}, 13);
    const auto m = prepare_karman(frames, 3, 17);
    write_dataset(path, m);
    const auto back = read_dataset(path);
    CHECK(manifests_equal(m, back));

    // a second write is byte-identical
    const auto path2 = dir / "roundtrip2.ds";
    write_dataset(path2, back);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);

    // empty manifest round trip
    DatasetManifest empty;
    empty.norm = {NormMode::BytePassthrough, 0, 255};
    empty.source = "empty";
    const auto path3 = dir / "empty.ds";
    write_dataset(path3, empty);
    const auto eback = read_dataset(path3);
    CHECK(eback.samples.empty());

    // truncated file
    std::string cut = b1.substr(0, b1.size() / 2);
    const auto path4 = dir / "cut.ds";
    {
        std::ofstream os(path4, std::ios::binary);
        os << cut;
    }
    CHECK_THROWS_AS(read_dataset(path4), FormatError);

    CHECK_THROWS_AS(read_dataset(dir / "missing.ds"), IoFailure);
    std::filesystem::remove_all(dir);
}
