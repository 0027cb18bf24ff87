#include <doctest.h>

#include "vfq/genant.hpp"
#include "vfq/localization.hpp"
#include "vfq/phantom.hpp"

using namespace vfq;
using doctest::Approx;

TEST_CASE("default phantom") {
    const Phantom p = generate_phantom({});
    CHECK(p.annotations.size() == 12);
    CHECK(p.volume.shape() == Index3{128, 128, 256});
    const Vec3 c0 = body_center(p.annotations.front());
    for (const auto& a : p.annotations) {
        const Vec3 c = body_center(a);
        CHECK(c.x() == Approx(c0.x()));
        CHECK(c.y() == Approx(c0.y()));
    }
    const auto planted = planted_heights({});
    for (std::size_t i = 0; i < planted.size(); ++i) {
        const Heights h = heights(p.annotations[i]);
        CHECK(h.anterior == Approx(planted[i][0]).epsilon(1e-12));
        CHECK(h.middle == Approx(planted[i][1]).epsilon(1e-12));
        CHECK(h.posterior == Approx(planted[i][2]).epsilon(1e-12));
        CHECK(genant_index(h) == Approx(p.genant[i]).epsilon(1e-12));
    }
}

TEST_CASE("planted heights produce the expected index") {
    PhantomConfig cfg;
    cfg.n_vertebrae = 3;
    cfg.heights = {{22, 22, 22}, {7.4 * 2.2, 22, 22}, {20, 21, 22}};
    const Phantom p = generate_phantom(cfg);
    CHECK(p.genant[1] == Approx(0.74).epsilon(1e-12));
    CHECK(grade(genant_index(heights(p.annotations[1]))) == Severity::Moderate);
}

TEST_CASE("phantom determinism") {
    PhantomConfig cfg;
    cfg.seed = 77;
    cfg.noise_sigma = 5.0;
    cfg.scoliosis_amplitude = 15.0;
    const Phantom a = generate_phantom(cfg), b = generate_phantom(cfg);
    CHECK(a.volume.values() == b.volume.values());
    CHECK(a.genant == b.genant);
    cfg.seed = 78;
    CHECK(generate_phantom(cfg).volume.values() != a.volume.values());
}

TEST_CASE("phantom rejects overlapping or escaping bodies") {
    PhantomConfig cfg;
    cfg.pitch = 15.0;
    CHECK_THROWS_AS(generate_phantom(cfg), InputError);
    PhantomConfig big;
    big.n_vertebrae = 20;
    CHECK_THROWS_AS(generate_phantom(big), InputError);
}

TEST_CASE("phantom config JSON round trip") {
    PhantomConfig cfg;
    cfg.seed = 5;
    cfg.scoliosis_amplitude = 30;
    const PhantomConfig back = phantom_config_from_json(to_json(cfg));
    CHECK(to_json(back) == to_json(cfg));
    CHECK_THROWS_AS(phantom_config_from_json(nlohmann::json{{"n_vertebrae", "twelve"}}), InputError);
}

TEST_CASE("oracle heatmaps") {
    PhantomConfig cfg;
    cfg.scoliosis_amplitude = 15.0;
    const Phantom p = generate_phantom(cfg);
    const Volume3D grid = resample_volume(p.volume, Vec3(3, 3, 3));
    const auto maps = oracle_heatmaps(p.annotations, grid);
    const CenterlinePolyline got = to_world(slicewise_centerline(maps), grid);
    const CenterlinePolyline want = centerline_target(p.annotations, got.zs());
    REQUIRE(got.points.size() == want.points.size());
    double sq = 0.0;
    for (std::size_t k = 0; k < got.points.size(); ++k) {
        const Vec3 d = (got.points[k] - want.points[k]).cwiseQuotient(grid.spacing());
        CHECK(std::abs(d.x()) < 0.25);
        CHECK(std::abs(d.y()) < 0.25);
        sq += d.head<2>().squaredNorm();
    }
    CHECK(std::sqrt(sq / double(got.points.size())) < 0.25);

    // sigma -> 0 concentrates the map on the rounded centerline voxel
    const auto sharp = oracle_heatmaps(p.annotations, grid, 0.05);
    for (const auto& m : sharp) {
        if (!m.valid) continue;
        const CenterlinePolyline at = centerline_target(p.annotations, {grid.slice_z(m.slice)});
        REQUIRE(at.points.size() == 1);
        const Vec3 vox = grid.to_voxel(at.points[0]);
        const auto i = std::size_t(std::max_element(m.values.begin(), m.values.end()) - m.values.begin());
        CHECK(i % m.nx == std::size_t(std::lround(vox.x())));
        CHECK(i / m.nx == std::size_t(std::lround(vox.y())));
    }

    const Phantom straight = generate_phantom({});
    const Volume3D sg = resample_volume(straight.volume, Vec3(3, 3, 3));
    std::optional<std::size_t> arg;
    for (const auto& m : oracle_heatmaps(straight.annotations, sg)) {
        if (!m.valid) continue;
        const auto i = std::size_t(std::max_element(m.values.begin(), m.values.end()) - m.values.begin());
        if (!arg) arg = i;
        CHECK(i == *arg);
    }
}

TEST_CASE("oracle predictions with no annotations detect nothing") {
    const AnchorGrid grid = generate_anchors(20, 30, 1.0);
    const Predictions p = oracle_predictions({}, grid);
    CHECK(std::all_of(p.objectness.begin(), p.objectness.end(), [](double o) { return o == 0.0; }));
    CHECK(detect(p, grid).empty());
}
