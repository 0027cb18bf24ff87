#pragma once

#include <cstddef>
#include <vector>

#include <json.hpp>

#include "vfq/core.hpp"
#include "vfq/localization.hpp"

namespace vfq {

/// Arc-length sample of the spine curve with its orthonormal frame {t, u, v}.
struct CurveSample {
    double s = 0.0;
    Vec3 position = Vec3::Zero();
    Vec3 tangent = Vec3::UnitZ();
    Vec3 u = Vec3::UnitX();  // in-plane, seeded with patient left-right
    Vec3 v = Vec3::UnitY();  // in-plane, anterior-posterior; v = t x u
};

struct SpineCurve {
    double step = 1.0;
    std::vector<CurveSample> samples;
};

struct SpineCurveOptions {
    double step = 1.0;        // mm between samples
    double smoothing = 10.0;  // mm^2, second-difference penalty
    /// Straight continuation beyond both curve ends along the end tangents, mm.
    double end_extension = 20.0;
};

/**
 * Smooths x(z), y(z), reparameterizes by arc length at a uniform step, and
 * transports rotation-minimizing frames (double reflection) from a seed u
 * aligned with the patient x axis. Needs at least four world-frame points.
 */
SpineCurve build_spine_curve(const CenterlinePolyline& polyline, const SpineCurveOptions& opts = {});

/// Sampling map of the straightened grid: row k sits at arc length rows[k].s.
struct StraightenTransform {
    double delta = 1.0;
    std::size_t half_i = 0;  // lateral half-width in voxels
    std::size_t half_j = 0;  // anterior-posterior half-width in voxels
    std::vector<CurveSample> rows;

    std::size_t columns() const { return 2 * half_j + 1; }
};

struct StraightenOptions {
    double delta = 1.0;
    Vec2 half_extent{60.0, 60.0};  // (lateral, anterior-posterior) mm
    float fill = kAirHU;
    unsigned threads = 1;
};

struct StraightenedVolume {
    Volume3D volume;  // (2*half_i+1, 2*half_j+1, rows); the curve is the i = half_i, j = half_j column
    StraightenTransform transform;
};

/// 2D mid-sagittal image: x = anterior-posterior column, y = arc-length row, both in pixels.
struct StraightenedImage {
    Volume3D image;  // shape (columns, rows, 1)
    StraightenTransform transform;
};

StraightenedVolume straighten_volume(const Volume3D& vol, const SpineCurve& curve, const StraightenOptions& opts = {});

/// The zero left-right offset plane; `average_halfwidth` > 0 averages that many planes on each side.
StraightenedImage mid_sagittal_slice(const StraightenedVolume& straightened, std::size_t average_halfwidth = 0);

/// Pixel (column, row) to world mm, interpolating the frame table between rows. Throws GeometryError out of bounds.
Vec3 to_world(const StraightenTransform& transform, const Vec2& px);

/// Projects a world point onto the mid-sagittal image (drops its left-right offset). Throws GeometryError when it
/// falls outside the curve's span.
Vec2 to_image(const StraightenTransform& transform, const Vec3& world);

nlohmann::json transform_to_json(const StraightenTransform& transform);
StraightenTransform transform_from_json(const nlohmann::json& j);

}  // namespace vfq
