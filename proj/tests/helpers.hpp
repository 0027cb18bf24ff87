#pragma once

#include <random>

#include "vfq/core.hpp"

namespace vfq::test {

inline double uni(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Box2D random_box(std::mt19937_64& rng) {
    return Box2D(Vec2(uni(rng, -50, 50), uni(rng, -50, 50)), uni(rng, 1, 40), uni(rng, 1, 40));
}

/// Upright vertebra: superior points at z0 + h, inferior at z0, anterior at y = yc - depth / 2.
inline VertebraKeypoints upright_vertebra(Vec3 center, double depth, double ha, double hm, double hp) {
    VertebraKeypoints k;
    const double ya = center.y() - 0.5 * depth, yp = center.y() + 0.5 * depth;
    const double x = center.x(), z = center.z();
    k[Keypoint::AS] = Vec3(x, ya, z + 0.5 * ha);
    k[Keypoint::AI] = Vec3(x, ya, z - 0.5 * ha);
    k[Keypoint::MS] = Vec3(x, center.y(), z + 0.5 * hm);
    k[Keypoint::MI] = Vec3(x, center.y(), z - 0.5 * hm);
    k[Keypoint::PS] = Vec3(x, yp, z + 0.5 * hp);
    k[Keypoint::PI] = Vec3(x, yp, z - 0.5 * hp);
    return k;
}

}  // namespace vfq::test
