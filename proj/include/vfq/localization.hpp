#pragma once

#include <cstddef>
#include <vector>

#include "vfq/core.hpp"

namespace vfq {

/// One axial slice of the step-1 heatmap stack, indexed (x, y) x-fastest.
struct SliceProbMap {
    std::size_t nx = 0;
    std::size_t ny = 0;
    std::vector<double> values;
    std::size_t slice = 0;
    /// False for slices that carry no localization signal; decoding skips them.
    bool valid = true;

    double at(std::size_t x, std::size_t y) const { return values[x + nx * y]; }
};

enum class SoftArgmaxMode { Probabilities, Logits };

struct SoftArgmaxOptions {
    SoftArgmaxMode mode = SoftArgmaxMode::Probabilities;
    double temperature = 1.0;
};

enum class CurveFrame { Voxel, World };

/// One point per axial slice, z strictly increasing. In the voxel frame z holds the slice index.
struct CenterlinePolyline {
    CurveFrame frame = CurveFrame::World;
    std::vector<Vec3> points;

    std::vector<double> zs() const;
};

/// Expected grid coordinate under the normalized map. Throws InputError on an all-zero or negative map.
Vec2 soft_argmax_2d(const SliceProbMap& map, const SoftArgmaxOptions& opts = {});

/// Soft-argmax per valid slice, in slice order. Errors carry the failing slice index.
CenterlinePolyline slicewise_centerline(const std::vector<SliceProbMap>& maps, const SoftArgmaxOptions& opts = {});

/// Splits a heatmap volume into per-slice maps; constant slices are marked invalid.
std::vector<SliceProbMap> slice_maps(const Volume3D& heatmaps);

/// Maps a voxel-frame polyline through the geometry of `grid`.
CenterlinePolyline to_world(const CenterlinePolyline& voxel_curve, const Volume3D& grid);

/**
 * Centerline regression target: the middle superior/inferior keypoints of all
 * vertebrae, sorted by z and interpolated (monotone cubic) in x(z), y(z).
 * Evaluated at each of `slice_z` within the annotated z span.
 */
CenterlinePolyline centerline_target(const std::vector<VertebraKeypoints>& annotations,
                                     const std::vector<double>& slice_z);

/// Mean over slices of the mean absolute x/y deviation, mm.
double centerline_mae(const CenterlinePolyline& pred, const CenterlinePolyline& target);

/// Linear interpolation of world (x, y) against z onto `fine_z` (points outside the coarse span are dropped).
CenterlinePolyline upsample_curve(const CenterlinePolyline& coarse, const std::vector<double>& fine_z);
CenterlinePolyline upsample_curve(const CenterlinePolyline& coarse, double fine_spacing);

/// World z of every slice of a volume.
std::vector<double> slice_positions(const Volume3D& vol);

}  // namespace vfq
