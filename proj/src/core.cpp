#include "vfq/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vfq {

namespace {

void check_geometry(const Index3& shape, const Vec3& spacing) {
    for (int a = 0; a < 3; ++a) {
        if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
            throw InputError("volume spacing must be positive and finite");
        }
        if (shape[a] == 0) {
            throw InputError("volume shape must be non-zero on every axis");
        }
    }
}

// Lattice tolerance in continuous voxel units; absorbs round-off of world/voxel conversion.
constexpr double kHullEps = 1e-9;

// Splits a continuous index into (base, fraction). Returns false outside the lattice hull.
bool locate(double c, std::size_t n, std::size_t& base, double& frac) {
    const double last = static_cast<double>(n - 1);
    if (!(c >= -kHullEps && c <= last + kHullEps)) {
        return false;
    }
    if (n == 1) {
        base = 0;
        frac = 0.0;
        return true;
    }
    c = std::clamp(c, 0.0, last);
    auto b = static_cast<std::size_t>(std::floor(c));
    if (b >= n - 1) {
        b = n - 2;
    }
    base = b;
    frac = c - static_cast<double>(b);
    return true;
}

}  // namespace

Volume3D::Volume3D(Index3 shape, Vec3 spacing, Vec3 origin, float value)
    : shape_(shape), spacing_(spacing), origin_(origin) {
    check_geometry(shape_, spacing_);
    values_.assign(shape_[0] * shape_[1] * shape_[2], value);
}

Volume3D::Volume3D(Index3 shape, Vec3 spacing, Vec3 origin, std::vector<float> values)
    : shape_(shape), spacing_(spacing), origin_(origin), values_(std::move(values)) {
    check_geometry(shape_, spacing_);
    if (values_.size() != shape_[0] * shape_[1] * shape_[2]) {
        throw InputError("volume data size does not match shape");
    }
}

Box2D::Box2D(Vec2 c, double w, double h) : center(std::move(c)), width(w), height(h) {
    if (!(w > 0.0) || !(h > 0.0)) {
        throw GeometryError("box width and height must be positive");
    }
}

double iou(const Box2D& a, const Box2D& b) {
    const double ix = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
    const double iy = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
    if (ix <= 0.0 || iy <= 0.0) {
        return 0.0;
    }
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return std::clamp(inter / uni, 0.0, 1.0);
}

Box2D bbox_from_keypoints(const std::array<Vec2, kNumKeypoints>& pts) {
    Vec2 lo = pts[0];
    Vec2 hi = pts[0];
    for (const auto& p : pts) {
        if (!p.allFinite()) {
            throw GeometryError("keypoint is not finite");
        }
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Vec2 extent = hi - lo;
    if (!(extent.x() > 0.0) || !(extent.y() > 0.0)) {
        throw GeometryError("degenerate keypoint set: zero extent along an axis");
    }
    return Box2D{0.5 * (lo + hi), extent.x(), extent.y()};
}

Vec3 body_center(const VertebraKeypoints& kps) {
    return 0.5 * (kps[Keypoint::MS] + kps[Keypoint::MI]);
}

float trilinear_sample(const Volume3D& vol, const Vec3& world, float fill) {
    const Vec3 c = vol.to_voxel(world);
    const auto& n = vol.shape();
    std::size_t bx, by, bz;
    double fx, fy, fz;
    if (!locate(c.x(), n[0], bx, fx) || !locate(c.y(), n[1], by, fy) || !locate(c.z(), n[2], bz, fz)) {
        return fill;
    }
    const std::size_t dx = n[0] > 1 ? 1 : 0;
    const std::size_t dy = n[1] > 1 ? n[0] : 0;
    const std::size_t dz = n[2] > 1 ? n[0] * n[1] : 0;
    const float* v = vol.values().data() + vol.linear(bx, by, bz);

    const double c00 = v[0] * (1.0 - fx) + v[dx] * fx;
    const double c10 = v[dy] * (1.0 - fx) + v[dy + dx] * fx;
    const double c01 = v[dz] * (1.0 - fx) + v[dz + dx] * fx;
    const double c11 = v[dz + dy] * (1.0 - fx) + v[dz + dy + dx] * fx;
    const double c0 = c00 * (1.0 - fy) + c10 * fy;
    const double c1 = c01 * (1.0 - fy) + c11 * fy;
    return static_cast<float>(c0 * (1.0 - fz) + c1 * fz);
}

Volume3D resample_volume(const Volume3D& vol, const Vec3& new_spacing, float fill) {
    Index3 shape{};
    for (int a = 0; a < 3; ++a) {
        if (!(new_spacing[a] > 0.0)) {
            throw InputError("resample spacing must be positive");
        }
        const double extent = static_cast<double>(vol.shape()[a] - 1) * vol.spacing()[a];
        // Small slack so an extent that is an exact multiple is not lost to round-off.
        shape[a] = static_cast<std::size_t>(std::floor(extent / new_spacing[a] + 1e-9)) + 1;
    }
    Volume3D out(shape, new_spacing, vol.origin());
    for (std::size_t z = 0; z < shape[2]; ++z) {
        for (std::size_t y = 0; y < shape[1]; ++y) {
            for (std::size_t x = 0; x < shape[0]; ++x) {
                const Vec3 w = out.to_world(Vec3(double(x), double(y), double(z)));
                out.at(x, y, z) = trilinear_sample(vol, w, fill);
            }
        }
    }
    return out;
}

}  // namespace vfq
