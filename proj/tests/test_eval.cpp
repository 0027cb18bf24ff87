#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "vfq/eval.hpp"

using namespace vfq;
using doctest::Approx;

namespace {

double pairwise_auc(const std::vector<double>& s, const std::vector<bool>& l) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (!l[i] || l[j]) continue;
            den += 1.0;
            num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
    return num / den;
}

Detection det_at(double score, Vec2 c, double w, double h, std::size_t anchor) {
    Detection d;
    d.score = score;
    d.box = Box2D(c, w, h);
    d.anchor = anchor;
    return d;
}

}  // namespace

TEST_CASE("roc_auc hand cases") {
    CHECK(roc_auc({0.1, 0.2, 0.8, 0.9}, {false, false, true, true}) == 1.0);
    CHECK(roc_auc({0.5, 0.5, 0.5, 0.5}, {false, true, false, true}) == 0.5);
    CHECK_THROWS_AS(roc_auc({0.1, 0.2}, {true, true}), UndefinedMetricError);
    CHECK_THROWS_AS(roc_auc({0.1}, {true, false}), InputError);
}

TEST_CASE("roc_auc equals the pairwise count, ties included") {
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 400; ++trial) {
        const std::size_t n = 2 + rng() % 199;
        std::vector<double> s(n);
        std::vector<bool> l(n);
        const int levels = 1 + int(rng() % 12);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = double(rng() % std::uint64_t(levels)) / levels;
            l[i] = rng() & 1;
        }
        l[0] = true;
        l[1] = false;
        const double auc = roc_auc(s, l);
        CHECK(auc == pairwise_auc(s, l));

        std::vector<bool> flipped(n);
        for (std::size_t i = 0; i < n; ++i) flipped[i] = !l[i];
        CHECK(auc + roc_auc(s, flipped) == Approx(1.0).epsilon(1e-14));

        std::vector<double> mono(n);
        for (std::size_t i = 0; i < n; ++i) mono[i] = std::exp(3.0 * s[i]) - 7.0;
        CHECK(roc_auc(mono, l) == auc);
    }
}

TEST_CASE("classification_report") {
    const std::vector<double> g{0.95, 0.9, 0.78, 0.7, 0.5, 0.85};
    const BinaryMetrics m = classification_report(g, g, 0.74);
    CHECK(m.roc_auc == 1.0);
    CHECK(m.sensitivity == 1.0);
    CHECK(m.specificity == 1.0);
    CHECK(m.positives == 2);
    CHECK(m.negatives == 4);

    const BinaryMetrics flat = classification_report(std::vector<double>(6, 0.9), g, 0.8);
    CHECK(flat.roc_auc == 0.5);

    const BinaryMetrics one_class = classification_report(g, std::vector<double>(6, 0.95), 0.74);
    CHECK_FALSE(one_class.roc_auc.has_value());
    CHECK_FALSE(one_class.sensitivity.has_value());
    CHECK(one_class.specificity.has_value());
    CHECK_THROWS_AS(classification_report({}, {}, 0.8), UndefinedMetricError);
}

TEST_CASE("localization_error") {
    std::vector<VertebraKeypoints> gt{test::upright_vertebra(Vec3(0, 0, 0), 20, 10, 10, 10),
                                      test::upright_vertebra(Vec3(0, 0, 30), 20, 10, 10, 10)};
    auto e = localization_error({Vec3(0, 0, 0), Vec3(0, 0, 30)}, gt);
    CHECK(e == std::vector<double>{0.0, 0.0});
    e = localization_error({Vec3(0, 3, 30)}, gt);
    CHECK(e[0] == Approx(3.0));

    std::mt19937_64 rng(62);
    std::vector<VertebraKeypoints> many;
    for (int i = 0; i < 10; ++i) {
        many.push_back(test::upright_vertebra(Vec3(test::uni(rng, -50, 50), test::uni(rng, -50, 50), test::uni(rng, 0, 300)),
                                              20, 10, 10, 10));
    }
    std::vector<Vec3> preds;
    for (int i = 0; i < 25; ++i) preds.emplace_back(test::uni(rng, -50, 50), test::uni(rng, -50, 50), test::uni(rng, 0, 300));
    const auto got = localization_error(preds, many);
    auto shuffled = many;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(localization_error(preds, shuffled) == got);
    for (std::size_t p = 0; p < preds.size(); ++p) {
        double best = 1e300;
        for (const auto& g : many) best = std::min(best, (preds[p] - body_center(g)).norm());
        CHECK(got[p] == Approx(best).epsilon(1e-14));
    }
    CHECK_THROWS_AS(localization_error(preds, {}), InputError);
}

TEST_CASE("match_detections") {
    std::vector<Box2D> gt{Box2D(Vec2(10, 10), 10, 10), Box2D(Vec2(10, 40), 10, 10), Box2D(Vec2(10, 70), 10, 10)};
    std::vector<Detection> perfect;
    for (std::size_t i = 0; i < gt.size(); ++i) perfect.push_back(det_at(0.9, gt[i].center, 10, 10, i));
    Matching m = match_detections(perfect, gt);
    CHECK(m.tp == 3);
    CHECK(m.fp == 0);
    CHECK(m.fn == 0);

    perfect.push_back(det_at(0.6, Vec2(10, 11), 10, 10, 99));
    m = match_detections(perfect, gt);
    CHECK(m.tp == 3);
    CHECK(m.fp == 1);
    CHECK(m.pred_to_gt[3] == -1);

    std::mt19937_64 rng(63);
    std::vector<Detection> noisy;
    for (std::size_t i = 0; i < 12; ++i) {
        noisy.push_back(det_at(double(rng() % 4) / 4, Vec2(test::uni(rng, 5, 15), test::uni(rng, 0, 80)), 10, 10, i));
    }
    const Matching base = match_detections(noisy, gt);
    for (int t = 0; t < 20; ++t) {
        auto sh = noisy;
        std::shuffle(sh.begin(), sh.end(), rng);
        const Matching x = match_detections(sh, gt);
        CHECK(x.tp == base.tp);
        for (std::size_t g = 0; g < gt.size(); ++g) {
            const int a = base.gt_to_pred[g], b = x.gt_to_pred[g];
            CHECK((a < 0) == (b < 0));
            if (a >= 0 && b >= 0) CHECK(noisy[std::size_t(a)].anchor == sh[std::size_t(b)].anchor);
        }
    }
}

namespace {

EvalCase make_case(const std::vector<double>& gt_g, const std::vector<double>& pred_g) {
    EvalCase c;
    for (std::size_t i = 0; i < gt_g.size(); ++i) {
        const double z = 30.0 * double(i);
        c.gt_world.push_back(test::upright_vertebra(Vec3(0, 0, z), 28, 20 * gt_g[i], 20, 20));
        Keypoints2D px;
        for (std::size_t k = 0; k < 6; ++k) {
            px.points[k] = Vec2(c.gt_world.back().points[k].y() + 60, 400 - c.gt_world.back().points[k].z());
        }
        c.gt_px.push_back(px);
        if (i < pred_g.size()) {
            ScoredVertebra v;
            v.score = 0.9;
            v.anchor = i;
            v.keypoints_px = px;
            v.keypoints_world = c.gt_world.back();
            v.genant = pred_g[i];
            c.predictions.push_back(v);
        }
    }
    return c;
}

}  // namespace

TEST_CASE("evaluate") {
    SUBCASE("detections equal ground truth") {
        const std::vector<double> g{1.0, 0.9, 0.7, 0.78, 0.55};
        const EvalReport r = evaluate({make_case(g, g), make_case({0.95, 0.9}, {0.95, 0.9})});
        CHECK(r.complete());
        CHECK(*r.precision == 1.0);
        CHECK(*r.recall == 1.0);
        CHECK(*r.recall_fractured == 1.0);
        CHECK(*r.localization_mean_mm == Approx(0.0));
        for (const auto& t : r.classification) {
            CHECK(*t.vertebra.roc_auc == 1.0);
            REQUIRE(t.patient.has_value());
        }
        CHECK(r.tp + r.fn == 7);
        CHECK(r.fractured_gt == 2);
    }
    SUBCASE("counts are consistent with the ratios") {
        const EvalReport r = evaluate({make_case({1.0, 0.7, 0.9, 0.6}, {1.0, 0.7})});
        CHECK(r.tp == 2);
        CHECK(r.fn == 2);
        CHECK(*r.recall == double(r.tp) / double(r.tp + r.fn));
        CHECK(*r.precision == double(r.tp) / double(r.tp + r.fp));
        CHECK(*r.recall_fractured == 0.5);
        CHECK_FALSE(r.classification[0].patient.has_value());
    }
    SUBCASE("no fracture anywhere leaves the AUC undefined") {
        const EvalReport r = evaluate({make_case({1.0, 0.95}, {1.0, 0.95})});
        CHECK_FALSE(r.complete());
        CHECK_FALSE(r.classification[0].vertebra.roc_auc.has_value());
        const auto j = to_json(r);
        CHECK(j["classification"][0]["vertebra"]["roc_auc"].is_null());
        CHECK(j["recall_fractured"].is_null());
        CHECK(format_table(r).find("n/a") != std::string::npos);
    }
}
