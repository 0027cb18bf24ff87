#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "vfq/localization.hpp"

using namespace vfq;
using doctest::Approx;

namespace {

SliceProbMap blank(std::size_t nx, std::size_t ny) {
    SliceProbMap m;
    m.nx = nx;
    m.ny = ny;
    m.values.assign(nx * ny, 0.0);
    return m;
}

double& cell(SliceProbMap& m, std::size_t x, std::size_t y) { return m.values[x + m.nx * y]; }

}  // namespace

TEST_CASE("soft_argmax hand cases") {
    SliceProbMap m = blank(20, 15);
    cell(m, 12, 7) = 1.0;
    const Vec2 one_hot = soft_argmax_2d(m);
    CHECK(one_hot.x() == 12.0);
    CHECK(one_hot.y() == 7.0);

    SliceProbMap u = blank(9, 6);
    std::fill(u.values.begin(), u.values.end(), 1.0 / 54);
    const Vec2 c = soft_argmax_2d(u);
    CHECK(std::abs(c.x() - 4.0) < 1e-9);
    CHECK(std::abs(c.y() - 2.5) < 1e-9);

    SliceProbMap two = blank(16, 16);
    cell(two, 0, 0) = 0.5;
    cell(two, 10, 4) = 0.5;
    const Vec2 mid = soft_argmax_2d(two);
    CHECK(std::abs(mid.x() - 5.0) < 1e-9);
    CHECK(std::abs(mid.y() - 2.0) < 1e-9);
}

TEST_CASE("soft_argmax rejects all-zero maps") {
    CHECK_THROWS_AS(soft_argmax_2d(blank(4, 4)), InputError);
}

TEST_CASE("soft_argmax translation equivariance and scale invariance") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        SliceProbMap m = blank(64, 64);
        for (std::size_t y = 10; y < 20; ++y)
            for (std::size_t x = 10; x < 20; ++x) cell(m, x, y) = test::uni(rng, 0, 1);
        const Vec2 base = soft_argmax_2d(m);
        const std::size_t dx = rng() % 30, dy = rng() % 30;
        SliceProbMap s = blank(64, 64);
        for (std::size_t y = 10; y < 20; ++y)
            for (std::size_t x = 10; x < 20; ++x) cell(s, x + dx, y + dy) = cell(m, x, y);
        const Vec2 shifted = soft_argmax_2d(s);
        CHECK(std::abs(shifted.x() - base.x() - double(dx)) < 1e-9);
        CHECK(std::abs(shifted.y() - base.y() - double(dy)) < 1e-9);

        SliceProbMap scaled = m;
        for (double& v : scaled.values) v *= 37.5;
        CHECK((soft_argmax_2d(scaled) - base).norm() < 1e-9);

        // logits mode, with a background low enough to carry no weight
        SliceProbMap lm = m, ls = s;
        for (auto* x : {&lm, &ls})
            for (double& v : x->values) v = v == 0.0 ? -1e4 : 5.0 * v;
        const SoftArgmaxOptions lo{SoftArgmaxMode::Logits, 0.5};
        const Vec2 lb = soft_argmax_2d(lm, lo), lsh = soft_argmax_2d(ls, lo);
        CHECK(std::abs(lsh.x() - lb.x() - double(dx)) < 1e-9);
        CHECK(std::abs(lsh.y() - lb.y() - double(dy)) < 1e-9);
    }
}

TEST_CASE("slicewise_centerline") {
    std::vector<SliceProbMap> stack;
    for (std::size_t k = 0; k < 8; ++k) {
        SliceProbMap m = blank(10, 10);
        m.slice = k;
        cell(m, k, 9 - k) = 1.0;
        stack.push_back(m);
    }
    const CenterlinePolyline c = slicewise_centerline(stack);
    REQUIRE(c.points.size() == 8);
    CHECK(c.frame == CurveFrame::Voxel);
    for (std::size_t k = 0; k < 8; ++k) CHECK((c.points[k] - Vec3(double(k), 9.0 - k, double(k))).norm() == 0.0);

    std::vector<SliceProbMap> uniform;
    for (std::size_t k = 0; k < 5; ++k) {
        SliceProbMap m = blank(7, 5);
        m.slice = k;
        std::fill(m.values.begin(), m.values.end(), 0.2);
        uniform.push_back(m);
    }
    for (const Vec3& p : slicewise_centerline(uniform).points) {
        CHECK(p.x() == Approx(3.0));
        CHECK(p.y() == Approx(2.0));
    }

    stack[3].values.assign(100, 0.0);
    try {
        slicewise_centerline(stack);
        FAIL("expected InputError");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("3") != std::string::npos);
    }
    stack[3].valid = false;
    CHECK(slicewise_centerline(stack).points.size() == 7);
}

TEST_CASE("slice_maps flags constant slices") {
    Volume3D v({4, 4, 3}, Vec3(3, 3, 3), Vec3(0, 0, 0), 0.0f);
    v.at(1, 2, 1) = 1.0f;
    const auto maps = slice_maps(v);
    REQUIRE(maps.size() == 3);
    CHECK_FALSE(maps[0].valid);
    CHECK(maps[1].valid);
    CHECK_FALSE(maps[2].valid);
}

namespace {

VertebraKeypoints on_line(double z, double alpha, double beta, double gamma) {
    return test::upright_vertebra(Vec3(alpha * z + beta, gamma, z), 20, 10, 10, 10);
}

}  // namespace

TEST_CASE("centerline_target reproduces linear data") {
    // middle keypoints at z +- 5 lie on x = 0.3 z + 2 only if the vertebra x follows the line at each keypoint z;
    // build them directly instead
    std::vector<VertebraKeypoints> ann;
    for (double z : {10.0, 40.0, 70.0, 100.0}) {
        VertebraKeypoints k = on_line(z, 0, 0, 5);
        k[Keypoint::MS].x() = 0.3 * k[Keypoint::MS].z() + 2;
        k[Keypoint::MI].x() = 0.3 * k[Keypoint::MI].z() + 2;
        ann.push_back(k);
    }
    std::vector<double> zs;
    for (double z = 0; z <= 120; z += 1.5) zs.push_back(z);
    const CenterlinePolyline c = centerline_target(ann, zs);
    REQUIRE(!c.points.empty());
    for (const Vec3& p : c.points) {
        CHECK(p.x() == Approx(0.3 * p.z() + 2).epsilon(1e-12));
        CHECK(p.y() == Approx(5.0));
    }
    // only slices inside the annotated span are kept
    CHECK(c.points.front().z() >= 5.0);
    CHECK(c.points.back().z() <= 105.0);
}

TEST_CASE("centerline_target passes through the middle keypoints") {
    std::mt19937_64 rng(5);
    std::vector<VertebraKeypoints> ann;
    for (int i = 0; i < 6; ++i) {
        const double z = 20.0 + 30.0 * i;
        ann.push_back(test::upright_vertebra(Vec3(test::uni(rng, -10, 10), test::uni(rng, -5, 5), z), 20, 22, 22, 22));
    }
    std::vector<double> zs;
    for (const auto& a : ann) {
        zs.push_back(a[Keypoint::MI].z());
        zs.push_back(a[Keypoint::MS].z());
    }
    std::sort(zs.begin(), zs.end());
    const CenterlinePolyline c = centerline_target(ann, zs);
    REQUIRE(c.points.size() == zs.size());
    for (const auto& a : ann) {
        for (Keypoint k : {Keypoint::MS, Keypoint::MI}) {
            const Vec3& kp = a[k];
            const auto it = std::find_if(c.points.begin(), c.points.end(), [&](const Vec3& p) { return p.z() == kp.z(); });
            REQUIRE(it != c.points.end());
            CHECK(std::abs(it->x() - kp.x()) < 1e-6);
            CHECK(std::abs(it->y() - kp.y()) < 1e-6);
        }
    }
}

TEST_CASE("centerline_target with two endpoints is linear") {
    VertebraKeypoints k = test::upright_vertebra(Vec3(0, 0, 50), 20, 20, 20, 20);
    k[Keypoint::MI] = Vec3(0, 0, 40);
    k[Keypoint::MS] = Vec3(10, -4, 60);
    const CenterlinePolyline c = centerline_target({k}, {40, 45, 50, 55, 60});
    REQUIRE(c.points.size() == 5);
    CHECK(c.points[1].x() == Approx(2.5));
    CHECK(c.points[2].y() == Approx(-2.0));
}

TEST_CASE("centerline_mae") {
    CenterlinePolyline a, b;
    std::mt19937_64 rng(9);
    for (int k = 0; k < 30; ++k) {
        a.points.emplace_back(test::uni(rng, -5, 5), test::uni(rng, -5, 5), k * 3.0);
        b.points.push_back(a.points.back() + Vec3(1, 0, 0));
    }
    CHECK(centerline_mae(a, a) == 0.0);
    CHECK(centerline_mae(a, b) == Approx(0.5).epsilon(1e-14));

    CenterlinePolyline c = a;
    for (auto& p : c.points) p += Vec3(test::uni(rng, -2, 2), test::uni(rng, -2, 2), 0);
    double brute = 0.0;
    for (std::size_t k = 0; k < a.points.size(); ++k) {
        brute += 0.5 * (std::abs(a.points[k].x() - c.points[k].x()) + std::abs(a.points[k].y() - c.points[k].y()));
    }
    brute /= double(a.points.size());
    CHECK(centerline_mae(a, c) == Approx(brute).epsilon(1e-14));
    CHECK(centerline_mae(a, c) == centerline_mae(c, a));
    CHECK(centerline_mae(a, c) <= centerline_mae(a, b) + centerline_mae(b, c) + 1e-12);

    CenterlinePolyline shorter = a;
    shorter.points.pop_back();
    CHECK_THROWS_AS(centerline_mae(a, shorter), GeometryError);
}

TEST_CASE("upsample_curve") {
    CenterlinePolyline line;
    for (int k = 0; k < 5; ++k) line.points.emplace_back(2.0 * k, -1.0 * k, 3.0 * k);
    const CenterlinePolyline fine = upsample_curve(line, 1.0);
    REQUIRE(fine.points.size() == 13);
    for (const Vec3& p : fine.points) {
        CHECK(p.x() == Approx(2.0 * p.z() / 3.0));
        CHECK(p.y() == Approx(-p.z() / 3.0));
    }

    CenterlinePolyline seg;
    seg.points = {Vec3(1, 2, 0), Vec3(4, 8, 3)};
    const CenterlinePolyline sf = upsample_curve(seg, std::vector<double>{0, 1, 2, 3});
    CHECK(sf.points.front() == Vec3(1, 2, 0));
    CHECK(sf.points.back() == Vec3(4, 8, 3));

    CenterlinePolyline zig;
    for (int k = 0; k < 6; ++k) zig.points.emplace_back(k % 2 ? 5.0 : -5.0, 0.0, 3.0 * k);
    const CenterlinePolyline zf = upsample_curve(zig, 1.5);
    for (const Vec3& p : zf.points) {
        const double r = std::fmod(p.z(), 3.0);
        if (r == 0.0) CHECK(p.x() == (int(p.z() / 3.0) % 2 ? 5.0 : -5.0));
        else CHECK(p.x() == Approx(0.0));
    }
}
