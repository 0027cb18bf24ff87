#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "vfq/core.hpp"
#include "vfq/detection.hpp"
#include "vfq/localization.hpp"

namespace vfq {

/**
 * Synthetic spine: box-shaped vertebral bodies stacked along a centerline
 * x(z) = center_x + amplitude * sin(2 pi (z - z_first) / wavelength + phase), y = center_y.
 * Body height varies linearly anterior -> middle -> posterior, so the planted
 * (h_a, h_m, h_p) are exactly the keypoint distances. Anterior is -y.
 */
struct PhantomConfig {
    Index3 shape{128, 128, 256};
    Vec3 spacing{1.0, 1.0, 1.5};
    Vec3 origin{0.0, 0.0, 0.0};

    std::size_t n_vertebrae = 12;
    double pitch = 28.0;  // mm between consecutive body centers along z
    double scoliosis_amplitude = 0.0;
    double scoliosis_wavelength = 400.0;
    double scoliosis_phase = 0.0;

    double body_width = 36.0;  // left-right
    double body_depth = 28.0;  // anterior-posterior
    double base_height = 22.0;
    double height_jitter = 1.0;

    /// Explicit (h_a, h_m, h_p) per vertebra; overrides the seeded draw when non-empty.
    std::vector<std::array<double, 3>> heights;
    /// Per-vertebra probabilities of a mild / moderate / severe fracture in the seeded draw.
    double p_mild = 0.15;
    double p_moderate = 0.15;
    double p_severe = 0.10;

    float body_intensity = 400.0f;
    float background_intensity = -1000.0f;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};

PhantomConfig phantom_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PhantomConfig& cfg);

struct Phantom {
    Volume3D volume;
    std::vector<VertebraKeypoints> annotations;
    std::vector<double> genant;
};

/// Throws InputError when bodies overlap or leave the volume.
Phantom generate_phantom(const PhantomConfig& cfg);

/// Planted (h_a, h_m, h_p) for each vertebra, deterministic in cfg.seed.
std::vector<std::array<double, 3>> planted_heights(const PhantomConfig& cfg);

/**
 * Step-1 stand-in: per-slice isotropic Gaussian (sigma in voxels) centered on the
 * centerline target, normalized to unit sum. Slices outside the annotated span are
 * uniform and flagged invalid.
 */
std::vector<SliceProbMap> oracle_heatmaps(const std::vector<VertebraKeypoints>& annotations, const Volume3D& grid,
                                          double sigma_voxels = 2.0);

/// Packs slice maps into a volume with the geometry of `grid`.
Volume3D heatmaps_to_volume(const std::vector<SliceProbMap>& maps, const Volume3D& grid);

/// Step-2 stand-in: objectness and regression equal to the assigned targets.
Predictions oracle_predictions(const std::vector<GroundTruth2D>& gt, const AnchorGrid& anchors,
                               const AssignOptions& opts = {});

}  // namespace vfq
