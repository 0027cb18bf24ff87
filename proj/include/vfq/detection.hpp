#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "vfq/core.hpp"

namespace vfq {

struct AnchorConfig {
    std::vector<double> scales{17.0, 23.0, 28.0, 35.0};  // mm, sqrt(w * h)
    std::vector<double> ratios{0.8, 1.1, 1.3, 2.0};      // height / width
};

/**
 * Anchors at every pixel center of a (columns x rows) image, stride 1 px.
 * Flat index = (row * columns + column) * per_position() + scale_index * ratios + ratio_index.
 */
struct AnchorGrid {
    std::size_t columns = 0;
    std::size_t rows = 0;
    double pixel_spacing = 1.0;
    AnchorConfig config;
    std::vector<Box2D> anchors;

    std::size_t per_position() const { return config.scales.size() * config.ratios.size(); }
    std::size_t size() const { return anchors.size(); }
};

AnchorGrid generate_anchors(std::size_t columns, std::size_t rows, double pixel_spacing,
                            const AnchorConfig& config = {});

/// Anchor width/height in mm for one (scale, ratio) pair.
Vec2 anchor_size_mm(double scale, double ratio);

using EncodedKeypoints = std::array<Vec2, kNumKeypoints>;

/// e = ((g.x - a.x) / a.w, (g.y - a.y) / a.h) per keypoint.
EncodedKeypoints encode_keypoints(const std::array<Vec2, kNumKeypoints>& g, const Box2D& anchor);
std::array<Vec2, kNumKeypoints> decode_keypoints(const EncodedKeypoints& e, const Box2D& anchor);

struct GroundTruth2D {
    Keypoints2D keypoints;
    double genant = 1.0;
};

struct DetectionTargets {
    std::vector<std::uint8_t> objectness;
    std::vector<EncodedKeypoints> encoded;  // zero for negatives
    std::vector<double> genant;             // 0 for negatives
    std::vector<int> matched;               // ground-truth index, -1 for negatives

    std::size_t positives() const;
};

struct AssignOptions {
    double positive_iou = 0.5;
    bool force_best_anchor = true;
};

DetectionTargets assign_targets(const AnchorGrid& anchors, const std::vector<GroundTruth2D>& gt,
                                const AssignOptions& opts = {});

/// Network outputs per anchor: objectness probability and encoded keypoints.
struct Predictions {
    std::vector<double> objectness;
    std::vector<EncodedKeypoints> regression;
};

struct LossOptions {
    double clip_eps = 1e-7;
};

struct LossValue {
    double bce = 0.0;
    double regression = 0.0;
    double total() const { return bce + regression; }
};

struct LossGradient {
    std::vector<double> objectness;          // dL / d(objectness probability)
    std::vector<double> objectness_logit;    // dL / d(logit) when the probability is a sigmoid output
    std::vector<EncodedKeypoints> regression;
};

/**
 * Mean binary cross-entropy over all anchors plus the Genant-weighted keypoint term
 * (1 / N+) * sum over positives of MAE(e_hat, e) / G. The regression term is 0 when N+ = 0.
 */
LossValue detection_loss(const Predictions& pred, const DetectionTargets& targets, const LossOptions& opts = {});
LossGradient detection_loss_grad(const Predictions& pred, const DetectionTargets& targets,
                                 const LossOptions& opts = {});

struct Detection {
    double score = 0.0;
    Box2D box;
    Keypoints2D keypoints;
    std::size_t anchor = 0;
};

/// Greedy suppression in (score desc, anchor asc) order of boxes with IoU > threshold against a kept box.
std::vector<Detection> nms(std::vector<Detection> candidates, double iou_threshold = 0.45);

struct DetectOptions {
    double objectness_threshold = 0.5;
    double nms_iou = 0.45;
};

std::vector<Detection> detect(const Predictions& pred, const AnchorGrid& anchors, const DetectOptions& opts = {});

/// Perfect predictions reproducing the targets exactly.
Predictions predictions_from_targets(const DetectionTargets& targets);

/**
 * Raster layout: a (columns, rows, 13 * A) volume. Planes [0, A) hold objectness per anchor type,
 * planes A + 12 * a + 2 * k + {0, 1} hold (e.x, e.y) of keypoint k for anchor type a.
 */
Volume3D predictions_to_raster(const Predictions& pred, const AnchorGrid& anchors);
Predictions predictions_from_raster(const Volume3D& raster, const AnchorGrid& anchors);
/// Per-anchor Genant weights (0 for negatives) as a (columns, rows, A) volume.
Volume3D weights_to_raster(const DetectionTargets& targets, const AnchorGrid& anchors);

}  // namespace vfq
