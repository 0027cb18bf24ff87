#include "vfq/localization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "vfq/interp.hpp"

namespace vfq {

namespace {

constexpr double kZTol = 1e-6;

void require_world(const CenterlinePolyline& c, const char* what) {
    if (c.frame != CurveFrame::World) {
        throw InputError(std::string(what) + ": expected a world-frame polyline");
    }
}

}  // namespace

std::vector<double> CenterlinePolyline::zs() const {
    std::vector<double> z;
    z.reserve(points.size());
    for (const auto& p : points) {
        z.push_back(p.z());
    }
    return z;
}

Vec2 soft_argmax_2d(const SliceProbMap& map, const SoftArgmaxOptions& opts) {
    if (map.nx == 0 || map.ny == 0 || map.values.size() != map.nx * map.ny) {
        throw InputError("probability map has inconsistent shape");
    }
    std::vector<double> w(map.values.size());
    if (opts.mode == SoftArgmaxMode::Probabilities) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double v = map.values[i];
            if (!std::isfinite(v) || v < 0.0) {
                throw InputError("probability map has negative or non-finite entries");
            }
            w[i] = v;
        }
    } else {
        double peak = -std::numeric_limits<double>::infinity();
        for (double v : map.values) {
            if (!std::isfinite(v)) {
                throw InputError("logit map has non-finite entries");
            }
            peak = std::max(peak, v);
        }
        for (std::size_t i = 0; i < w.size(); ++i) {
            w[i] = std::exp(opts.temperature * (map.values[i] - peak));
        }
    }
    double mass = 0.0;
    for (double v : w) mass += v;
    if (!(mass > 0.0)) {
        throw InputError("probability map has no mass");
    }
    // Normalise first so a single-voxel map lands exactly on its voxel.
    double sx = 0.0, sy = 0.0;
    for (std::size_t y = 0; y < map.ny; ++y) {
        for (std::size_t x = 0; x < map.nx; ++x) {
            const double p = w[x + map.nx * y] / mass;
            sx += p * static_cast<double>(x);
            sy += p * static_cast<double>(y);
        }
    }
    return {sx, sy};
}

CenterlinePolyline slicewise_centerline(const std::vector<SliceProbMap>& maps, const SoftArgmaxOptions& opts) {
    CenterlinePolyline out;
    out.frame = CurveFrame::Voxel;
    bool first = true;
    std::size_t last = 0;
    for (const auto& m : maps) {
        if (!first && m.slice <= last) {
            throw InputError("probability maps must be in strictly increasing slice order");
        }
        first = false;
        last = m.slice;
        if (!m.valid) {
            continue;
        }
        try {
            const Vec2 p = soft_argmax_2d(m, opts);
            out.points.emplace_back(p.x(), p.y(), static_cast<double>(m.slice));
        } catch (const InputError& e) {
            throw InputError("slice " + std::to_string(m.slice) + ": " + e.what());
        }
    }
    return out;
}

std::vector<SliceProbMap> slice_maps(const Volume3D& heatmaps) {
    const auto& n = heatmaps.shape();
    std::vector<SliceProbMap> maps(n[2]);
    for (std::size_t z = 0; z < n[2]; ++z) {
        auto& m = maps[z];
        m.nx = n[0];
        m.ny = n[1];
        m.slice = z;
        m.values.resize(n[0] * n[1]);
        const float* src = heatmaps.values().data() + heatmaps.linear(0, 0, z);
        std::copy(src, src + m.values.size(), m.values.begin());
        const auto [lo, hi] = std::minmax_element(m.values.begin(), m.values.end());
        m.valid = *hi > *lo;
    }
    return maps;
}

CenterlinePolyline to_world(const CenterlinePolyline& voxel_curve, const Volume3D& grid) {
    if (voxel_curve.frame != CurveFrame::Voxel) {
        throw InputError("to_world: expected a voxel-frame polyline");
    }
    CenterlinePolyline out;
    out.frame = CurveFrame::World;
    out.points.reserve(voxel_curve.points.size());
    for (const auto& p : voxel_curve.points) {
        out.points.push_back(grid.to_world(p));
    }
    return out;
}

CenterlinePolyline centerline_target(const std::vector<VertebraKeypoints>& annotations,
                                     const std::vector<double>& slice_z) {
    std::vector<Vec3> pts;
    for (const auto& v : annotations) {
        pts.push_back(v[Keypoint::MS]);
        pts.push_back(v[Keypoint::MI]);
    }
    std::sort(pts.begin(), pts.end(), [](const Vec3& a, const Vec3& b) { return a.z() < b.z(); });

    // Coincident z values collapse to their mean.
    std::vector<double> z, x, y;
    for (std::size_t i = 0; i < pts.size();) {
        std::size_t j = i;
        Vec3 acc = Vec3::Zero();
        while (j < pts.size() && pts[j].z() - pts[i].z() < 1e-9) {
            acc += pts[j];
            ++j;
        }
        acc /= static_cast<double>(j - i);
        z.push_back(acc.z());
        x.push_back(acc.x());
        y.push_back(acc.y());
        i = j;
    }
    if (z.size() < 2) {
        throw GeometryError("centerline target needs middle keypoints at two or more distinct z values");
    }
    const MonotoneCubic fx(z, x);
    const MonotoneCubic fy(z, y);

    CenterlinePolyline out;
    out.frame = CurveFrame::World;
    for (double sz : slice_z) {
        if (sz < z.front() - 1e-9 || sz > z.back() + 1e-9) {
            continue;
        }
        out.points.emplace_back(fx(sz), fy(sz), sz);
    }
    return out;
}

double centerline_mae(const CenterlinePolyline& pred, const CenterlinePolyline& target) {
    require_world(pred, "centerline_mae");
    require_world(target, "centerline_mae");
    if (pred.points.size() != target.points.size() || pred.points.empty()) {
        throw GeometryError("centerline_mae: slice ranges differ");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.points.size(); ++i) {
        const Vec3& a = pred.points[i];
        const Vec3& b = target.points[i];
        if (std::abs(a.z() - b.z()) > kZTol) {
            throw GeometryError("centerline_mae: slice positions differ at index " + std::to_string(i));
        }
        acc += 0.5 * (std::abs(a.x() - b.x()) + std::abs(a.y() - b.y()));
    }
    return acc / static_cast<double>(pred.points.size());
}

CenterlinePolyline upsample_curve(const CenterlinePolyline& coarse, const std::vector<double>& fine_z) {
    require_world(coarse, "upsample_curve");
    if (coarse.points.size() < 2) {
        throw GeometryError("upsample_curve: need at least two coarse slices");
    }
    std::vector<double> z, x, y;
    for (const auto& p : coarse.points) {
        if (!z.empty() && !(p.z() > z.back())) {
            throw GeometryError("upsample_curve: coarse z must be strictly increasing");
        }
        z.push_back(p.z());
        x.push_back(p.x());
        y.push_back(p.y());
    }
    CenterlinePolyline out;
    out.frame = CurveFrame::World;
    for (double fz : fine_z) {
        if (fz < z.front() - 1e-9 || fz > z.back() + 1e-9) {
            continue;
        }
        out.points.emplace_back(lerp_table(z, x, fz), lerp_table(z, y, fz), fz);
    }
    return out;
}

CenterlinePolyline upsample_curve(const CenterlinePolyline& coarse, double fine_spacing) {
    if (!(fine_spacing > 0.0) || coarse.points.size() < 2) {
        throw GeometryError("upsample_curve: need positive spacing and two or more slices");
    }
    const double z0 = coarse.points.front().z();
    const double z1 = coarse.points.back().z();
    std::vector<double> fine;
    const auto n = static_cast<std::size_t>(std::floor((z1 - z0) / fine_spacing + 1e-9));
    for (std::size_t k = 0; k <= n; ++k) {
        fine.push_back(z0 + static_cast<double>(k) * fine_spacing);
    }
    return upsample_curve(coarse, fine);
}

std::vector<double> slice_positions(const Volume3D& vol) {
    std::vector<double> z(vol.shape()[2]);
    for (std::size_t k = 0; k < z.size(); ++k) {
        z[k] = vol.slice_z(k);
    }
    return z;
}

}  // namespace vfq
