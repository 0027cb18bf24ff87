#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace vfq {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Index3 = std::array<std::size_t, 3>;

// Error categories map one-to-one onto CLI exit codes (2, 3, 4).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GeometryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UndefinedMetricError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Default fill for samples outside the voxel lattice (air).
inline constexpr float kAirHU = -1024.0f;

/**
 * Scalar voxel raster with anisotropic spacing.
 *
 * Voxel indices address voxel centers: world(v) = origin + v * spacing
 * (component-wise). Axis convention: x left-right, y anterior-posterior,
 * z cranio-caudal (increasing z is cranial). Storage is x-fastest.
 */
class Volume3D {
public:
    Volume3D() = default;
    Volume3D(Index3 shape, Vec3 spacing, Vec3 origin, float value = 0.0f);
    Volume3D(Index3 shape, Vec3 spacing, Vec3 origin, std::vector<float> values);

    const Index3& shape() const { return shape_; }
    const Vec3& spacing() const { return spacing_; }
    const Vec3& origin() const { return origin_; }
    std::size_t size() const { return values_.size(); }

    std::size_t linear(std::size_t x, std::size_t y, std::size_t z) const {
        return x + shape_[0] * (y + shape_[1] * z);
    }
    float at(std::size_t x, std::size_t y, std::size_t z) const { return values_[linear(x, y, z)]; }
    float& at(std::size_t x, std::size_t y, std::size_t z) { return values_[linear(x, y, z)]; }

    const std::vector<float>& values() const { return values_; }
    std::vector<float>& values() { return values_; }

    Vec3 to_world(const Vec3& voxel) const { return origin_ + voxel.cwiseProduct(spacing_); }
    Vec3 to_voxel(const Vec3& world) const { return (world - origin_).cwiseQuotient(spacing_); }

    /// World z of slice index k.
    double slice_z(std::size_t k) const { return origin_.z() + static_cast<double>(k) * spacing_.z(); }

private:
    Index3 shape_{0, 0, 0};
    Vec3 spacing_{1.0, 1.0, 1.0};
    Vec3 origin_{0.0, 0.0, 0.0};
    std::vector<float> values_;
};

/// Axis-aligned box; width along x, height along y.
struct Box2D {
    Vec2 center{0.0, 0.0};
    double width = 1.0;
    double height = 1.0;

    Box2D() = default;
    Box2D(Vec2 c, double w, double h);

    double x_min() const { return center.x() - 0.5 * width; }
    double x_max() const { return center.x() + 0.5 * width; }
    double y_min() const { return center.y() - 0.5 * height; }
    double y_max() const { return center.y() + 0.5 * height; }
    double area() const { return width * height; }
};

double iou(const Box2D& a, const Box2D& b);

/**
 * The six height keypoints of one vertebral body.
 * Order: anterior/middle/posterior, each superior then inferior.
 */
enum class Keypoint : std::size_t { AS = 0, AI, MS, MI, PS, PI };

inline constexpr std::size_t kNumKeypoints = 6;
inline constexpr std::array<const char*, kNumKeypoints> kKeypointKeys{"as", "ai", "ms", "mi", "ps", "pi"};

template <int Dim>
struct Keypoints {
    using Point = Eigen::Matrix<double, Dim, 1>;
    std::array<Point, kNumKeypoints> points;
    std::string label;

    const Point& operator[](Keypoint k) const { return points[static_cast<std::size_t>(k)]; }
    Point& operator[](Keypoint k) { return points[static_cast<std::size_t>(k)]; }
};

/// World-mm annotation of one vertebra.
using VertebraKeypoints = Keypoints<3>;
/// Keypoints on the straightened 2D image, in pixels.
using Keypoints2D = Keypoints<2>;

/// Tight axis-aligned box around six 2D points. Throws GeometryError on zero extent.
Box2D bbox_from_keypoints(const std::array<Vec2, kNumKeypoints>& pts);
inline Box2D bbox_from_keypoints(const Keypoints2D& kps) { return bbox_from_keypoints(kps.points); }

/// Vertebral-body center: midpoint of the middle superior/inferior keypoints.
Vec3 body_center(const VertebraKeypoints& kps);

float trilinear_sample(const Volume3D& vol, const Vec3& world, float fill = kAirHU);

/// Trilinear resample onto a grid of new_spacing covering the same world extent; origin is kept.
Volume3D resample_volume(const Volume3D& vol, const Vec3& new_spacing, float fill = kAirHU);

}  // namespace vfq
