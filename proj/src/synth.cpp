#include "recon/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>

#include "recon/errors.hpp"
#include "recon/io_util.hpp"
#include "recon/rng.hpp"

namespace recon {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_vortex_params(const VortexParams& p) {
    if (p.inflow_speed <= 0)
        throw BadParams("vortex: inflow_speed must be > 0");
    if (p.shedding_wavelength < 4)
        throw BadParams("vortex: shedding_wavelength must be >= 4 cells");
    if (p.vortex_amplitude < 0 || p.vortex_amplitude > 125)
        throw BadParams("vortex: vortex_amplitude must be in [0, 125] so frames never clip");
    if (p.noise_level < 0) throw BadParams("vortex: noise_level must be >= 0");
}

} // namespace

std::vector<VortexParams> make_vortex_ensemble(int n_sims, const Shape& frame_shape,
                                               std::uint64_t seed) {
    if (n_sims < 1) throw BadParams("ensemble: n_sims must be >= 1");
    if (frame_shape.rank() != 2) throw BadParams("ensemble: frame shape must be rank 2");
    const double H = static_cast<double>(frame_shape.extent(0));
    std::vector<VortexParams> out;
    out.reserve(static_cast<std::size_t>(n_sims));
    for (int i = 0; i < n_sims; ++i) {
        Rng rng(mix_seed(seed, 0x706172616dull + static_cast<std::uint64_t>(i)));
        VortexParams p;
        p.sim_id = i;
        p.inflow_speed = rng.uniform(1.0, 2.5);
        p.shedding_wavelength = rng.uniform(10.0, 22.0);
        p.vortex_amplitude = rng.uniform(70.0, 110.0);
        p.obstacle_x = rng.uniform(4.0, 10.0);
        p.obstacle_y = (H - 1.0) / 2.0 + rng.uniform(-3.0, 3.0);
        p.noise_level = rng.uniform(0.5, 2.5);
        p.seed = mix_seed(seed, 0x66726d73ull + static_cast<std::uint64_t>(i));
        out.push_back(p);
    }
    return out;
}

namespace {

Tensor<float> render_vortex_frame(const VortexParams& p, int t, const Shape& frame_shape) {
    const std::int64_t H = frame_shape.extent(0), W = frame_shape.extent(1);
    std::vector<double> grid(static_cast<std::size_t>(H * W), kVortexBackground);

    const double half_wave = p.shedding_wavelength / 2.0;
    const double sigma = p.shedding_wavelength / 6.0;
    const double stagger = p.shedding_wavelength / 8.0;
    const double cut = 4.0 * sigma;
    const double vt = p.inflow_speed * static_cast<double>(t);

    // Blob positions expressed through the advection phase so that one full
    // period shifts blob indices by exactly two (same parity, same layout).
    const double q = std::floor(vt / half_wave);
    const double r = vt - q * half_wave; // in [0, half_wave)
    const auto parity_of = [&](std::int64_t j) {
        const std::int64_t k = j - static_cast<std::int64_t>(q);
        return static_cast<int>(((k % 2) + 2) % 2);
    };

    for (std::int64_t j = 0;; ++j) {
        const double cx = p.obstacle_x + r + static_cast<double>(j) * half_wave;
        if (cx - cut > static_cast<double>(W - 1)) break;
        const int parity = parity_of(j);
        const double sign = parity == 0 ? 1.0 : -1.0;
        const double cy = p.obstacle_y + sign * stagger;
        const std::int64_t x0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(cx - cut)));
        const std::int64_t x1 = std::min<std::int64_t>(W - 1, static_cast<std::int64_t>(std::floor(cx + cut)));
        const std::int64_t y0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(cy - cut)));
        const std::int64_t y1 = std::min<std::int64_t>(H - 1, static_cast<std::int64_t>(std::floor(cy + cut)));
        const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
        for (std::int64_t y = y0; y <= y1; ++y) {
            const double dy = static_cast<double>(y) - cy;
            double* row = grid.data() + y * W;
            for (std::int64_t x = x0; x <= x1; ++x) {
                const double dx = static_cast<double>(x) - cx;
                const double d2 = dx * dx + dy * dy;
                if (d2 > cut * cut) continue;
                row[x] += sign * p.vortex_amplitude * std::exp(-d2 * inv2s2);
            }
        }
    }

    Tensor<float> out(frame_shape);
    if (p.noise_level > 0) {
        Rng noise(mix_seed(p.seed, 0x6e6f6973ull + static_cast<std::uint64_t>(t)));
        for (std::size_t i = 0; i < grid.size(); ++i)
            grid[i] += p.noise_level * noise.normal();
    }
    for (std::size_t i = 0; i < grid.size(); ++i)
        out[i] = static_cast<float>(std::clamp(grid[i], 0.0, 255.0));
    return out;
}

} // namespace

std::vector<Frame> gen_vortex_ensemble(const std::vector<VortexParams>& params, int n_steps,
                                       const Shape& frame_shape) {
    if (frame_shape.rank() != 2) throw BadParams("vortex: frame shape must be rank 2");
    if (frame_shape.extent(0) < 8 || frame_shape.extent(1) < 8)
        throw BadParams("vortex: frame must be at least 8x8");
    if (n_steps < 21)
        throw BadParams("vortex: n_steps must be >= 21 (18 formation steps are discarded)");
    for (const auto& p : params) check_vortex_params(p);

    std::vector<Frame> frames;
    frames.reserve(params.size() * static_cast<std::size_t>(n_steps));
    for (const auto& p : params)
        for (int t = 0; t < n_steps; ++t)
            frames.push_back({p.sim_id, t, render_vortex_frame(p, t, frame_shape)});
    return frames;
}

// ---------------------------------------------------------------------------
// Droplet series
// ---------------------------------------------------------------------------

namespace {

// Compact C1 bump: g(d) = (1 - (d/r)^2)^2 for d < r, else 0. Deposits are
// normalized by the discrete kernel sum over the full support box, so the
// in-domain mass of a droplet whose support box lies inside the domain is
// exactly its nominal mass.
double bump(double d2, double r) {
    const double u = d2 / (r * r);
    if (u >= 1.0) return 0.0;
    const double s = 1.0 - u;
    return s * s;
}

double kernel_sum(const std::array<double, 3>& c, double r) {
    const std::int64_t reach = static_cast<std::int64_t>(std::ceil(r));
    double sum = 0.0;
    for (std::int64_t z = -reach; z <= reach; ++z)
        for (std::int64_t y = -reach; y <= reach; ++y)
            for (std::int64_t x = -reach; x <= reach; ++x) {
                const double dz = std::floor(c[0]) + static_cast<double>(z) - c[0];
                const double dy = std::floor(c[1]) + static_cast<double>(y) - c[1];
                const double dx = std::floor(c[2]) + static_cast<double>(x) - c[2];
                sum += bump(dz * dz + dy * dy + dx * dx, r);
            }
    return sum;
}

void deposit(std::vector<double>& grid, std::int64_t side, const std::array<double, 3>& c,
             double r, double mass) {
    const double s = kernel_sum(c, r);
    if (s <= 0) return;
    const double scale = mass / s;
    const std::int64_t reach = static_cast<std::int64_t>(std::ceil(r));
    const std::int64_t bz = static_cast<std::int64_t>(std::floor(c[0]));
    const std::int64_t by = static_cast<std::int64_t>(std::floor(c[1]));
    const std::int64_t bx = static_cast<std::int64_t>(std::floor(c[2]));
    for (std::int64_t z = bz - reach; z <= bz + reach; ++z) {
        if (z < 0 || z >= side) continue;
        for (std::int64_t y = by - reach; y <= by + reach; ++y) {
            if (y < 0 || y >= side) continue;
            for (std::int64_t x = bx - reach; x <= bx + reach; ++x) {
                if (x < 0 || x >= side) continue;
                const double dz = static_cast<double>(z) - c[0];
                const double dy = static_cast<double>(y) - c[1];
                const double dx = static_cast<double>(x) - c[2];
                grid[static_cast<std::size_t>((z * side + y) * side + x)] +=
                    scale * bump(dz * dz + dy * dy + dx * dx, r);
            }
        }
    }
}

} // namespace

std::vector<Volume> gen_droplet_series(const DropletParams& params, int n_steps, int side) {
    if (side < 16) throw BadParams("droplet: side must be >= 16");
    if (n_steps < 10) throw BadParams("droplet: n_steps must be >= 10");
    if (params.n_droplets_initial < 1) throw BadParams("droplet: need at least one droplet");
    if (params.initial_radius < 1.2) throw BadParams("droplet: initial_radius must be >= 1.2");
    if (params.dispersal_rate < 0) throw BadParams("droplet: dispersal_rate must be >= 0");

    const int t_exit = n_steps * 3 / 5; // drift starts after the leading 60%
    const auto radius_at = [&](int t) {
        return params.initial_radius * (1.0 + params.dispersal_rate * static_cast<double>(t));
    };
    const double r_conserved = radius_at(t_exit);
    const double r_final = radius_at(n_steps - 1);
    const std::int64_t margin = static_cast<std::int64_t>(std::ceil(r_conserved)) + 1;
    if (2 * margin + 2 >= side)
        throw BadParams("droplet: radius too large for the domain side");

    // Seeded placement on the integer lattice, pairwise separated so droplet
    // supports stay disjoint through the conserved phase.
    Rng rng(mix_seed(params.seed, 0x64726f70ull));
    std::vector<std::array<double, 3>> centers;
    const double min_sep = 2.0 * r_conserved + 1.0;
    for (int j = 0; j < params.n_droplets_initial; ++j) {
        bool placed = false;
        for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
            std::array<double, 3> c;
            for (int a = 0; a < 3; ++a)
                c[static_cast<std::size_t>(a)] = static_cast<double>(
                    margin + static_cast<std::int64_t>(
                                 rng.below(static_cast<std::uint64_t>(side - 2 * margin))));
            bool ok = true;
            for (const auto& other : centers) {
                const double dz = c[0] - other[0], dy = c[1] - other[1], dx = c[2] - other[2];
                if (std::sqrt(dz * dz + dy * dy + dx * dx) < min_sep) ok = false;
            }
            if (ok) {
                centers.push_back(c);
                placed = true;
            }
        }
        if (!placed)
            throw BadParams("droplet: cannot place " +
                            std::to_string(params.n_droplets_initial) +
                            " separated droplets in a side-" + std::to_string(side) + " domain");
    }

    // Per-droplet nominal mass; the auto choice makes the initial core peak
    // near the top of the byte range.
    const double peak_target = 250.0;
    double mass_per_droplet;
    if (params.total_mass > 0) {
        mass_per_droplet = params.total_mass / static_cast<double>(params.n_droplets_initial);
    } else {
        mass_per_droplet = peak_target * kernel_sum(centers.front(), params.initial_radius);
    }

    // Drift directions: toward each droplet's nearest domain face.
    std::vector<std::array<double, 3>> drift_dir(centers.size(), {0, 0, 0});
    std::vector<double> drift_speed(centers.size(), 0.0);
    const int n_exit_steps = std::max(1, n_steps - t_exit);
    for (std::size_t j = 0; j < centers.size(); ++j) {
        double best = std::numeric_limits<double>::infinity();
        for (int a = 0; a < 3; ++a) {
            const double lo_d = centers[j][static_cast<std::size_t>(a)];
            const double hi_d = static_cast<double>(side - 1) - centers[j][static_cast<std::size_t>(a)];
            if (lo_d < best) {
                best = lo_d;
                drift_dir[j] = {0, 0, 0};
                drift_dir[j][static_cast<std::size_t>(a)] = -1.0;
            }
            if (hi_d < best) {
                best = hi_d;
                drift_dir[j] = {0, 0, 0};
                drift_dir[j][static_cast<std::size_t>(a)] = 1.0;
            }
        }
        drift_speed[j] = 1.2 * (best + r_final) / static_cast<double>(n_exit_steps);
    }

    std::vector<Volume> out;
    out.reserve(static_cast<std::size_t>(n_steps));
    const std::int64_t s64 = side;
    for (int t = 0; t < n_steps; ++t) {
        std::vector<double> grid(static_cast<std::size_t>(s64 * s64 * s64), 0.0);
        const double r = radius_at(t);
        for (std::size_t j = 0; j < centers.size(); ++j) {
            std::array<double, 3> c = centers[j];
            if (t >= t_exit) {
                const double disp = drift_speed[j] * static_cast<double>(t - t_exit + 1);
                for (int a = 0; a < 3; ++a)
                    c[static_cast<std::size_t>(a)] += drift_dir[j][static_cast<std::size_t>(a)] * disp;
            }
            deposit(grid, s64, c, r, mass_per_droplet);
        }
        Tensor<float> values(Shape{s64, s64, s64});
        for (std::size_t i = 0; i < grid.size(); ++i)
            values[i] = static_cast<float>(std::clamp(grid[i], 0.0, 255.0));
        out.push_back({0, t, t, std::move(values)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Anomaly injection
// ---------------------------------------------------------------------------

std::string anomaly_kind_name(AnomalyKind kind) {
    switch (kind) {
        case AnomalyKind::MagnitudeInversion: return "MAGNITUDE_INVERSION";
        case AnomalyKind::TurbulenceBurst: return "TURBULENCE_BURST";
        case AnomalyKind::FrozenMotion: return "FROZEN_MOTION";
        case AnomalyKind::MassConcentration: return "MASS_CONCENTRATION";
    }
    return "?";
}

AnomalyKind anomaly_kind_from_name(const std::string& name) {
    if (name == "MAGNITUDE_INVERSION") return AnomalyKind::MagnitudeInversion;
    if (name == "TURBULENCE_BURST") return AnomalyKind::TurbulenceBurst;
    if (name == "FROZEN_MOTION") return AnomalyKind::FrozenMotion;
    if (name == "MASS_CONCENTRATION") return AnomalyKind::MassConcentration;
    throw FormatError("unknown anomaly kind '" + name + "'");
}

void inject_magnitude_inversion(Tensor<float>& values, double lo, double hi) {
    float fmin = values[0], fmax = values[0];
    for (float v : values.data()) {
        fmin = std::min(fmin, v);
        fmax = std::max(fmax, v);
    }
    if (!(fmax > fmin)) return;
    const double range = hi - lo;
    const double band_lo = lo + 0.02 * range;
    const double band_hi = lo + 0.25 * range;
    const double scale = (band_hi - band_lo) / (static_cast<double>(fmax) - fmin);
    for (float& v : values.data())
        v = static_cast<float>(band_lo + (static_cast<double>(v) - fmin) * scale);
}

void inject_turbulence_burst(Tensor<float>& values, double lo, double hi, std::uint64_t seed) {
    const std::size_t rank = values.shape().rank();
    Rng rng(mix_seed(seed, 0x62757273ull));
    std::vector<std::int64_t> b_lo(rank), b_hi(rank);
    std::vector<double> period(rank), phase(rank);
    for (std::size_t a = 0; a < rank; ++a) {
        const std::int64_t n = values.shape().extent(a);
        const std::int64_t half = std::max<std::int64_t>(1, n / 3);
        const std::int64_t jitter =
            n >= 8 ? static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n / 4))) -
                         n / 8
                   : 0;
        const std::int64_t center = std::clamp<std::int64_t>(n / 2 + jitter, 0, n - 1);
        b_lo[a] = std::max<std::int64_t>(0, center - half);
        b_hi[a] = std::min<std::int64_t>(n - 1, center + half);
        period[a] = rng.uniform(3.0, 6.0);
        phase[a] = rng.uniform(0.0, 2.0 * kPi);
    }
    const double amp = 0.35 * (hi - lo);

    // Walk the window; mask rises from 0 at the window edge to 1 at center.
    std::vector<std::int64_t> idx(rank);
    for (std::size_t a = 0; a < rank; ++a) idx[a] = b_lo[a];
    for (;;) {
        double pattern = amp, mask = 1.0;
        std::size_t off = 0;
        for (std::size_t a = 0; a < rank; ++a) {
            const double u = static_cast<double>(idx[a] - b_lo[a]) /
                             static_cast<double>(std::max<std::int64_t>(1, b_hi[a] - b_lo[a]));
            mask *= 0.5 * (1.0 - std::cos(2.0 * kPi * u));
            pattern *= std::sin(2.0 * kPi * static_cast<double>(idx[a]) / period[a] + phase[a]);
            off = off * static_cast<std::size_t>(values.shape().extent(a)) +
                  static_cast<std::size_t>(idx[a]);
        }
        values[off] = static_cast<float>(
            std::clamp(static_cast<double>(values[off]) + mask * pattern, lo, hi));
        std::size_t a = rank;
        for (;;) {
            if (a == 0) return;
            --a;
            if (++idx[a] <= b_hi[a]) break;
            idx[a] = b_lo[a];
        }
    }
}

void inject_mass_concentration(Tensor<float>& values, double hi) {
    if (values.shape().rank() != 3)
        throw BadLabel("MASS_CONCENTRATION requires a rank-3 volume");
    const std::int64_t side = values.shape().extent(0);
    double mass = 0.0;
    std::array<double, 3> centroid{0, 0, 0};
    {
        const std::int64_t H = values.shape().extent(1), W = values.shape().extent(2);
        for (std::int64_t z = 0; z < side; ++z)
            for (std::int64_t y = 0; y < H; ++y)
                for (std::int64_t x = 0; x < W; ++x) {
                    const double v = values.at(z, y, x);
                    mass += v;
                    centroid[0] += v * static_cast<double>(z);
                    centroid[1] += v * static_cast<double>(y);
                    centroid[2] += v * static_cast<double>(x);
                }
    }
    if (mass <= 0) throw BadLabel("MASS_CONCENTRATION: volume has no mass");
    for (auto& c : centroid) c /= mass;

    // Smallest radius whose discrete kernel sum spreads the mass thin enough
    // to peak just under the top of the value range.
    const double peak_target = 0.98 * hi;
    const double needed_sum = mass / peak_target;
    const std::int64_t min_extent =
        std::min({values.shape().extent(0), values.shape().extent(1), values.shape().extent(2)});
    // Bound so the support box (radius ceil(r) plus one cell of slack) always
    // fits inside the domain; mass stays exact.
    double r_lo = 1.05;
    double r_hi_bound = static_cast<double>(min_extent - 3) / 2.0 - 0.01;
    if (r_hi_bound <= r_lo) throw BadLabel("MASS_CONCENTRATION: volume too small");
    std::array<double, 3> origin_center{0.0, 0.0, 0.0};
    if (kernel_sum(origin_center, r_hi_bound) < needed_sum)
        throw BadLabel("MASS_CONCENTRATION: volume mass too large to concentrate");
    double r = r_hi_bound;
    if (kernel_sum(origin_center, r_lo) >= needed_sum) {
        r = r_lo;
    } else {
        double a = r_lo, b = r_hi_bound;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (a + b);
            if (kernel_sum(origin_center, mid) >= needed_sum)
                b = mid;
            else
                a = mid;
        }
        r = b;
    }

    std::array<double, 3> center;
    const std::int64_t reach = static_cast<std::int64_t>(std::ceil(r));
    for (int a = 0; a < 3; ++a) {
        const std::int64_t n = values.shape().extent(static_cast<std::size_t>(a));
        center[static_cast<std::size_t>(a)] = static_cast<double>(std::clamp<std::int64_t>(
            static_cast<std::int64_t>(std::llround(centroid[static_cast<std::size_t>(a)])),
            reach + 1, n - 2 - reach));
    }

    values.fill(0.0f);
    const std::int64_t H = values.shape().extent(1), W = values.shape().extent(2);
    const double s = kernel_sum(center, r);
    const double scale = mass / s;
    for (std::int64_t z = 0; z < side; ++z)
        for (std::int64_t y = 0; y < H; ++y)
            for (std::int64_t x = 0; x < W; ++x) {
                const double dz = static_cast<double>(z) - center[0];
                const double dy = static_cast<double>(y) - center[1];
                const double dx = static_cast<double>(x) - center[2];
                const double v = scale * bump(dz * dz + dy * dy + dx * dx, r);
                if (v > 0) values.at(z, y, x) = static_cast<float>(v);
            }
}

namespace {

template <typename Item>
std::map<std::int32_t, Item*> index_by_time(std::vector<Item>& items, std::int32_t sim_id) {
    std::map<std::int32_t, Item*> out;
    for (auto& it : items)
        if (it.sim_id == sim_id) {
            if constexpr (std::is_same_v<Item, Frame>)
                out[it.t] = &it;
            else
                out[it.t_start] = &it;
        }
    return out;
}

} // namespace

void inject_anomaly(std::vector<Frame>& frames, const AnomalyLabel& label, std::uint64_t seed) {
    if (label.t_end < label.t_start) throw BadLabel("anomaly: t_end < t_start");
    auto by_t = index_by_time(frames, label.sim_id);
    for (std::int32_t t = label.t_start; t <= label.t_end; ++t)
        if (!by_t.count(t))
            throw BadLabel("anomaly: no frame at sim " + std::to_string(label.sim_id) +
                           ", t " + std::to_string(t));

    switch (label.kind) {
        case AnomalyKind::MagnitudeInversion:
            for (std::int32_t t = label.t_start; t <= label.t_end; ++t)
                inject_magnitude_inversion(by_t[t]->values, 0.0, 255.0);
            break;
        case AnomalyKind::TurbulenceBurst:
            for (std::int32_t t = label.t_start; t <= label.t_end; ++t)
                inject_turbulence_burst(by_t[t]->values, 0.0, 255.0,
                                        mix_seed(seed, static_cast<std::uint64_t>(t)));
            break;
        case AnomalyKind::FrozenMotion:
            for (std::int32_t t = label.t_start + 1; t <= label.t_end; ++t)
                by_t[t]->values = by_t[label.t_start]->values;
            break;
        case AnomalyKind::MassConcentration:
            throw BadLabel("MASS_CONCENTRATION applies to volume data");
    }
}

void inject_anomaly(std::vector<Volume>& volumes, const AnomalyLabel& label,
                    std::uint64_t seed) {
    (void)seed;
    if (label.t_end < label.t_start) throw BadLabel("anomaly: t_end < t_start");
    auto by_t = index_by_time(volumes, label.sim_id);
    for (std::int32_t t = label.t_start; t <= label.t_end; ++t)
        if (!by_t.count(t))
            throw BadLabel("anomaly: no volume at sim " + std::to_string(label.sim_id) +
                           ", t " + std::to_string(t));

    switch (label.kind) {
        case AnomalyKind::MassConcentration:
            for (std::int32_t t = label.t_start; t <= label.t_end; ++t)
                inject_mass_concentration(by_t[t]->values, 255.0);
            break;
        case AnomalyKind::FrozenMotion:
            for (std::int32_t t = label.t_start + 1; t <= label.t_end; ++t)
                by_t[t]->values = by_t[label.t_start]->values;
            break;
        default:
            throw BadLabel(anomaly_kind_name(label.kind) + " applies to frame data");
    }
}

void inject_into_manifest(DatasetManifest& manifest, std::size_t sample_index, AnomalyKind kind,
                          std::uint64_t seed) {
    if (sample_index >= manifest.samples.size())
        throw UnknownSample("inject: sample index " + std::to_string(sample_index) +
                            " out of range");
    Tensor<float>& values = manifest.samples[sample_index].values;
    const double hi = scale_hi(manifest.norm);
    switch (kind) {
        case AnomalyKind::MagnitudeInversion:
            inject_magnitude_inversion(values, 0.0, hi);
            break;
        case AnomalyKind::TurbulenceBurst:
            inject_turbulence_burst(values, 0.0, hi, seed);
            break;
        case AnomalyKind::MassConcentration:
            inject_mass_concentration(values, hi);
            break;
        case AnomalyKind::FrozenMotion:
            throw BadLabel("FROZEN_MOTION is a sequence-level anomaly; inject it into the raw "
                           "frame series");
    }
}

void write_labels_csv(const std::filesystem::path& path,
                      const std::vector<AnomalyLabel>& labels) {
    write_file_atomic(path, [&](std::ostream& os) {
        os << "kind,sim_id,t_start,t_end\n";
        for (const auto& l : labels)
            os << anomaly_kind_name(l.kind) << ',' << l.sim_id << ',' << l.t_start << ','
               << l.t_end << "\n";
    });
}

} // namespace recon
