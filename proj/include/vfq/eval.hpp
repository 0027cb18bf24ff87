#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vfq/core.hpp"
#include "vfq/detection.hpp"

namespace vfq {

/// Distance from each predicted center to the nearest ground-truth body center, mm.
std::vector<double> localization_error(const std::vector<Vec3>& pred_centers,
                                       const std::vector<VertebraKeypoints>& gt);

struct Matching {
    std::vector<int> pred_to_gt;  // -1 when unmatched
    std::vector<int> gt_to_pred;  // -1 when missed
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
};

struct MatchOptions {
    double min_iou = 0.5;
};

/**
 * Greedy one-to-one matching: detections in (score desc, anchor asc, box) order each claim
 * the unclaimed ground truth with the highest IoU above the threshold.
 */
Matching match_detections(const std::vector<Detection>& preds, const std::vector<Box2D>& gt,
                          const MatchOptions& opts = {});

/// Probability that a positive outranks a negative, ties count one half. Throws UndefinedMetricError
/// when only one class is present.
double roc_auc(const std::vector<double>& scores, const std::vector<bool>& labels);

struct BinaryMetrics {
    std::size_t positives = 0;
    std::size_t negatives = 0;
    std::optional<double> roc_auc;
    std::optional<double> sensitivity;
    std::optional<double> specificity;
};

/// Ground truth positive iff gt G <= threshold; prediction scored by 1 - G and called positive iff pred G <= threshold.
BinaryMetrics classification_report(const std::vector<double>& pred_genant, const std::vector<double>& gt_genant,
                                    double threshold);

/// One predicted vertebra as the scorer emits it.
struct ScoredVertebra {
    double score = 1.0;
    std::size_t anchor = 0;
    Keypoints2D keypoints_px;
    VertebraKeypoints keypoints_world;
    double genant = 1.0;
};

/// One patient: predictions plus ground truth in image pixels and world mm (same order).
struct EvalCase {
    std::vector<ScoredVertebra> predictions;
    std::vector<Keypoints2D> gt_px;
    std::vector<VertebraKeypoints> gt_world;
};

struct EvalOptions {
    MatchOptions match;
    std::vector<double> thresholds{0.80, 0.74};
    double fracture_cut = 0.74;  // recall subset
};

struct ThresholdReport {
    double threshold = 0.0;
    BinaryMetrics vertebra;
    std::optional<BinaryMetrics> patient;  // only with two or more cases
};

struct EvalReport {
    std::size_t cases = 0;
    std::optional<double> localization_mean_mm;
    std::optional<double> localization_std_mm;
    std::size_t tp = 0, fp = 0, fn = 0;
    double fracture_cut = 0.74;
    std::size_t fractured_gt = 0, fractured_tp = 0;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> recall_fractured;
    std::vector<ThresholdReport> classification;

    /// True when every requested metric is defined.
    bool complete() const;
};

EvalReport evaluate(const std::vector<EvalCase>& cases, const EvalOptions& opts = {});

nlohmann::json to_json(const EvalReport& report);
/// Plain-text table laid out as localization/detection then per-grade classification rows.
std::string format_table(const EvalReport& report);

}  // namespace vfq
