#include "vfq/detection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vfq {

namespace {

constexpr std::size_t kCoords = 2 * kNumKeypoints;

void check_sizes(const Predictions& pred, const DetectionTargets& t) {
    const std::size_t n = t.objectness.size();
    if (pred.objectness.size() != n || pred.regression.size() != n || t.encoded.size() != n ||
        t.genant.size() != n) {
        throw GeometryError("loss: prediction and target sizes differ");
    }
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

Vec2 anchor_size_mm(double scale, double ratio) {
    const double r = std::sqrt(ratio);
    return {scale / r, scale * r};
}

AnchorGrid generate_anchors(std::size_t columns, std::size_t rows, double pixel_spacing, const AnchorConfig& config) {
    if (!(pixel_spacing > 0.0)) {
        throw InputError("generate_anchors: pixel spacing must be positive");
    }
    for (double s : config.scales) {
        if (!(s > 0.0)) throw InputError("generate_anchors: scales must be positive");
    }
    for (double r : config.ratios) {
        if (!(r > 0.0)) throw InputError("generate_anchors: ratios must be positive");
    }
    AnchorGrid grid;
    grid.columns = columns;
    grid.rows = rows;
    grid.pixel_spacing = pixel_spacing;
    grid.config = config;

    std::vector<Vec2> sizes;
    for (double s : config.scales) {
        for (double r : config.ratios) {
            sizes.push_back(anchor_size_mm(s, r) / pixel_spacing);
        }
    }
    grid.anchors.reserve(columns * rows * sizes.size());
    for (std::size_t y = 0; y < rows; ++y) {
        for (std::size_t x = 0; x < columns; ++x) {
            const Vec2 c(static_cast<double>(x), static_cast<double>(y));
            for (const auto& wh : sizes) {
                grid.anchors.emplace_back(c, wh.x(), wh.y());
            }
        }
    }
    return grid;
}

EncodedKeypoints encode_keypoints(const std::array<Vec2, kNumKeypoints>& g, const Box2D& anchor) {
    EncodedKeypoints e;
    for (std::size_t k = 0; k < kNumKeypoints; ++k) {
        e[k] = Vec2((g[k].x() - anchor.center.x()) / anchor.width, (g[k].y() - anchor.center.y()) / anchor.height);
    }
    return e;
}

std::array<Vec2, kNumKeypoints> decode_keypoints(const EncodedKeypoints& e, const Box2D& anchor) {
    std::array<Vec2, kNumKeypoints> g;
    for (std::size_t k = 0; k < kNumKeypoints; ++k) {
        g[k] = Vec2(e[k].x() * anchor.width + anchor.center.x(), e[k].y() * anchor.height + anchor.center.y());
    }
    return g;
}

std::size_t DetectionTargets::positives() const {
    return static_cast<std::size_t>(std::count(objectness.begin(), objectness.end(), std::uint8_t{1}));
}

DetectionTargets assign_targets(const AnchorGrid& anchors, const std::vector<GroundTruth2D>& gt,
                                const AssignOptions& opts) {
    const std::size_t n = anchors.size();
    DetectionTargets t;
    t.objectness.assign(n, 0);
    t.encoded.assign(n, EncodedKeypoints{});
    for (auto& e : t.encoded) {
        e.fill(Vec2::Zero());
    }
    t.genant.assign(n, 0.0);
    t.matched.assign(n, -1);
    if (gt.empty()) {
        return t;
    }
    std::vector<Box2D> boxes;
    for (const auto& g : gt) {
        if (!(g.genant > 0.0 && g.genant <= 1.0)) {
            throw InputError("assign_targets: Genant index must lie in (0, 1]");
        }
        boxes.push_back(bbox_from_keypoints(g.keypoints));
    }

    std::vector<double> best_iou_for_gt(gt.size(), -1.0);
    std::vector<std::size_t> best_anchor_for_gt(gt.size(), 0);
    for (std::size_t a = 0; a < n; ++a) {
        double best = 0.0;
        int best_g = -1;
        for (std::size_t g = 0; g < gt.size(); ++g) {
            const double v = iou(anchors.anchors[a], boxes[g]);
            if (v > best) {
                best = v;
                best_g = static_cast<int>(g);
            }
            if (v > best_iou_for_gt[g]) {
                best_iou_for_gt[g] = v;
                best_anchor_for_gt[g] = a;
            }
        }
        if (best_g >= 0 && best > opts.positive_iou) {
            t.objectness[a] = 1;
            t.matched[a] = best_g;
        }
    }

    if (opts.force_best_anchor) {
        std::vector<std::uint8_t> forced(n, 0);
        for (std::size_t g = 0; g < gt.size(); ++g) {
            std::size_t a = best_anchor_for_gt[g];
            if (forced[a]) {
                // Another ground truth already claimed this anchor; take the best free one.
                double best = -1.0;
                for (std::size_t b = 0; b < n; ++b) {
                    if (forced[b]) continue;
                    const double v = iou(anchors.anchors[b], boxes[g]);
                    if (v > best) {
                        best = v;
                        a = b;
                    }
                }
            }
            forced[a] = 1;
            t.objectness[a] = 1;
            t.matched[a] = static_cast<int>(g);
        }
    }

    for (std::size_t a = 0; a < n; ++a) {
        if (!t.objectness[a]) continue;
        const auto& g = gt[static_cast<std::size_t>(t.matched[a])];
        t.encoded[a] = encode_keypoints(g.keypoints.points, anchors.anchors[a]);
        t.genant[a] = g.genant;
    }
    return t;
}

LossValue detection_loss(const Predictions& pred, const DetectionTargets& t, const LossOptions& opts) {
    check_sizes(pred, t);
    const std::size_t n = t.objectness.size();
    LossValue out;
    if (n == 0) {
        return out;
    }
    double bce = 0.0;
    double reg = 0.0;
    std::size_t positives = 0;
    for (std::size_t a = 0; a < n; ++a) {
        const double p = std::clamp(pred.objectness[a], opts.clip_eps, 1.0 - opts.clip_eps);
        bce -= t.objectness[a] ? std::log(p) : std::log1p(-p);
        if (!t.objectness[a]) continue;
        if (!(t.genant[a] > 0.0)) {
            throw InputError("loss: positive anchor without a valid Genant weight");
        }
        ++positives;
        double mae = 0.0;
        for (std::size_t k = 0; k < kNumKeypoints; ++k) {
            mae += std::abs(pred.regression[a][k].x() - t.encoded[a][k].x());
            mae += std::abs(pred.regression[a][k].y() - t.encoded[a][k].y());
        }
        reg += (mae / static_cast<double>(kCoords)) / t.genant[a];
    }
    out.bce = bce / static_cast<double>(n);
    out.regression = positives ? reg / static_cast<double>(positives) : 0.0;
    return out;
}

LossGradient detection_loss_grad(const Predictions& pred, const DetectionTargets& t, const LossOptions& opts) {
    check_sizes(pred, t);
    const std::size_t n = t.objectness.size();
    const std::size_t positives = t.positives();
    LossGradient g;
    g.objectness.assign(n, 0.0);
    g.objectness_logit.assign(n, 0.0);
    g.regression.assign(n, EncodedKeypoints{});
    for (auto& e : g.regression) {
        e.fill(Vec2::Zero());
    }
    const double inv_n = n ? 1.0 / static_cast<double>(n) : 0.0;
    for (std::size_t a = 0; a < n; ++a) {
        const double p = pred.objectness[a];
        if (p > opts.clip_eps && p < 1.0 - opts.clip_eps) {
            const double o = t.objectness[a] ? 1.0 : 0.0;
            g.objectness[a] = (t.objectness[a] ? -1.0 / p : 1.0 / (1.0 - p)) * inv_n;
            g.objectness_logit[a] = (p - o) * inv_n;
        }
        if (!t.objectness[a]) continue;
        if (!(t.genant[a] > 0.0)) {
            throw InputError("loss: positive anchor without a valid Genant weight");
        }
        const double w = 1.0 / (static_cast<double>(kCoords) * static_cast<double>(positives) * t.genant[a]);
        for (std::size_t k = 0; k < kNumKeypoints; ++k) {
            g.regression[a][k] = Vec2(w * sign(pred.regression[a][k].x() - t.encoded[a][k].x()),
                                      w * sign(pred.regression[a][k].y() - t.encoded[a][k].y()));
        }
    }
    return g;
}

std::vector<Detection> nms(std::vector<Detection> candidates, double iou_threshold) {
    std::sort(candidates.begin(), candidates.end(), [](const Detection& a, const Detection& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.anchor < b.anchor;
    });
    std::vector<Detection> kept;
    for (auto& c : candidates) {
        const bool suppressed = std::any_of(kept.begin(), kept.end(),
                                            [&](const Detection& k) { return iou(k.box, c.box) > iou_threshold; });
        if (!suppressed) {
            kept.push_back(std::move(c));
        }
    }
    return kept;
}

std::vector<Detection> detect(const Predictions& pred, const AnchorGrid& anchors, const DetectOptions& opts) {
    if (pred.objectness.size() != anchors.size() || pred.regression.size() != anchors.size()) {
        throw GeometryError("detect: prediction maps do not match the anchor grid");
    }
    std::vector<Detection> candidates;
    for (std::size_t a = 0; a < anchors.size(); ++a) {
        const double score = pred.objectness[a];
        if (!std::isfinite(score)) {
            throw InputError("detect: non-finite objectness");
        }
        if (score < opts.objectness_threshold) continue;
        Detection d;
        d.score = score;
        d.anchor = a;
        d.keypoints.points = decode_keypoints(pred.regression[a], anchors.anchors[a]);
        try {
            d.box = bbox_from_keypoints(d.keypoints);
        } catch (const GeometryError&) {
            continue;  // decoded keypoints collapse; no usable box
        }
        candidates.push_back(std::move(d));
    }
    return nms(std::move(candidates), opts.nms_iou);
}

Predictions predictions_from_targets(const DetectionTargets& targets) {
    Predictions p;
    p.objectness.assign(targets.objectness.begin(), targets.objectness.end());
    p.regression = targets.encoded;
    return p;
}

Volume3D predictions_to_raster(const Predictions& pred, const AnchorGrid& anchors) {
    const std::size_t na = anchors.per_position();
    if (pred.objectness.size() != anchors.size() || pred.regression.size() != anchors.size()) {
        throw GeometryError("raster: prediction size does not match the anchor grid");
    }
    Volume3D out({anchors.columns, anchors.rows, na * (1 + kCoords)},
                 Vec3(anchors.pixel_spacing, anchors.pixel_spacing, 1.0), Vec3::Zero());
    for (std::size_t y = 0; y < anchors.rows; ++y) {
        for (std::size_t x = 0; x < anchors.columns; ++x) {
            const std::size_t base = (y * anchors.columns + x) * na;
            for (std::size_t a = 0; a < na; ++a) {
                out.at(x, y, a) = static_cast<float>(pred.objectness[base + a]);
                for (std::size_t k = 0; k < kNumKeypoints; ++k) {
                    const std::size_t plane = na + kCoords * a + 2 * k;
                    out.at(x, y, plane) = static_cast<float>(pred.regression[base + a][k].x());
                    out.at(x, y, plane + 1) = static_cast<float>(pred.regression[base + a][k].y());
                }
            }
        }
    }
    return out;
}

Predictions predictions_from_raster(const Volume3D& raster, const AnchorGrid& anchors) {
    const std::size_t na = anchors.per_position();
    const auto& s = raster.shape();
    if (s[0] != anchors.columns || s[1] != anchors.rows || s[2] != na * (1 + kCoords)) {
        throw GeometryError("prediction raster shape does not match the anchor grid");
    }
    Predictions p;
    p.objectness.resize(anchors.size());
    p.regression.resize(anchors.size());
    for (std::size_t y = 0; y < anchors.rows; ++y) {
        for (std::size_t x = 0; x < anchors.columns; ++x) {
            const std::size_t base = (y * anchors.columns + x) * na;
            for (std::size_t a = 0; a < na; ++a) {
                p.objectness[base + a] = raster.at(x, y, a);
                for (std::size_t k = 0; k < kNumKeypoints; ++k) {
                    const std::size_t plane = na + kCoords * a + 2 * k;
                    p.regression[base + a][k] = Vec2(raster.at(x, y, plane), raster.at(x, y, plane + 1));
                }
            }
        }
    }
    return p;
}

Volume3D weights_to_raster(const DetectionTargets& targets, const AnchorGrid& anchors) {
    const std::size_t na = anchors.per_position();
    if (targets.genant.size() != anchors.size()) {
        throw GeometryError("raster: target size does not match the anchor grid");
    }
    Volume3D out({anchors.columns, anchors.rows, na}, Vec3(anchors.pixel_spacing, anchors.pixel_spacing, 1.0),
                 Vec3::Zero());
    for (std::size_t y = 0; y < anchors.rows; ++y) {
        for (std::size_t x = 0; x < anchors.columns; ++x) {
            const std::size_t base = (y * anchors.columns + x) * na;
            for (std::size_t a = 0; a < na; ++a) {
                out.at(x, y, a) = static_cast<float>(targets.genant[base + a]);
            }
        }
    }
    return out;
}

}  // namespace vfq
