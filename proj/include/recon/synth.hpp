#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "recon/dataset.hpp"
#include "recon/tensor.hpp"

namespace recon {

/// One ensemble member of the synthetic vortex-street generator. Frames are
/// a uniform background plus alternating-sign Gaussian blobs shed at the
/// obstacle and advected downstream, staggered above/below the centerline
/// every half wavelength, plus seeded per-pixel noise. Values stay in
/// [0, 255]; clean frames (noise off) never clip.
struct VortexParams {
    std::int32_t sim_id = 0;
    double inflow_speed = 1.5;        // cells per time step
    double shedding_wavelength = 16.0; // cells, >= 4
    double vortex_amplitude = 90.0;    // intensity units, <= 125 so nothing clips
    double obstacle_x = 8.0;
    double obstacle_y = 23.5;
    double noise_level = 2.0; // intensity std-dev
    std::uint64_t seed = 0;
};

inline constexpr double kVortexBackground = 127.5;

/// Seeded per-member parameter variation around the defaults.
std::vector<VortexParams> make_vortex_ensemble(int n_sims, const Shape& frame_shape,
                                               std::uint64_t seed);

std::vector<Frame> gen_vortex_ensemble(const std::vector<VortexParams>& params, int n_steps,
                                       const Shape& frame_shape);

/// Synthetic droplet series: compact spheres with dense near-255 cores whose
/// radius grows and peak value falls at fixed total mass; during the final
/// 40% of steps the droplets drift toward the domain faces and partially
/// exit. Mass is conserved exactly until the drift phase.
struct DropletParams {
    int n_droplets_initial = 2;
    double initial_radius = 2.5;  // cells
    double dispersal_rate = 0.004; // relative radius growth per step
    double total_mass = 0.0;       // 0 = choose so initial cores peak near 255
    int domain_side = 32;
    std::uint64_t seed = 0;
};

std::vector<Volume> gen_droplet_series(const DropletParams& params, int n_steps, int side);

enum class AnomalyKind {
    MagnitudeInversion,
    TurbulenceBurst,
    FrozenMotion,
    MassConcentration,
};

std::string anomaly_kind_name(AnomalyKind kind);
AnomalyKind anomaly_kind_from_name(const std::string& name);

struct AnomalyLabel {
    AnomalyKind kind = AnomalyKind::MagnitudeInversion;
    std::int32_t sim_id = 0;
    std::int32_t t_start = 0;
    std::int32_t t_end = 0;
};

// Tensor-level injectors, parameterized by the active data range [lo, hi].

/// Rescales the field into the low intensity band while preserving spatial
/// structure exactly (affine map of the value range).
void inject_magnitude_inversion(Tensor<float>& values, double lo, double hi);

/// Superposes seeded high-frequency oscillations inside a centered window;
/// voxels outside the window are untouched.
void inject_turbulence_burst(Tensor<float>& values, double lo, double hi, std::uint64_t seed);

/// Replaces a dispersed volume with an equal-mass compact core peaking near
/// the top of the value range, centered at the original mass centroid.
void inject_mass_concentration(Tensor<float>& values, double hi);

/// Applies the label to raw byte-scale frames. FROZEN_MOTION copies frame
/// t_start over t_start+1..t_end; the other 2D kinds act frame-by-frame.
void inject_anomaly(std::vector<Frame>& frames, const AnomalyLabel& label, std::uint64_t seed);

/// Applies the label to raw byte-scale volumes (MASS_CONCENTRATION and
/// FROZEN_MOTION).
void inject_anomaly(std::vector<Volume>& volumes, const AnomalyLabel& label,
                    std::uint64_t seed);

/// Injects into one prepared sample, using the manifest's active data range.
void inject_into_manifest(DatasetManifest& manifest, std::size_t sample_index, AnomalyKind kind,
                          std::uint64_t seed);

void write_labels_csv(const std::filesystem::path& path,
                      const std::vector<AnomalyLabel>& labels);

} // namespace recon
