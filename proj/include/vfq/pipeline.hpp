#pragma once

#include <optional>
#include <vector>

#include <json.hpp>

#include "vfq/core.hpp"
#include "vfq/detection.hpp"
#include "vfq/eval.hpp"
#include "vfq/genant.hpp"
#include "vfq/localization.hpp"
#include "vfq/straighten.hpp"

namespace vfq {

/// Every tunable of the two-step pipeline, echoed into each JSON output.
struct PipelineConfig {
    double working_spacing = 3.0;
    double delta = 1.0;
    Vec2 half_extent{60.0, 60.0};
    double smoothing = 10.0;
    double end_extension = 20.0;
    std::size_t sagittal_average = 0;
    float fill = kAirHU;
    unsigned threads = 1;

    SoftArgmaxMode soft_argmax_mode = SoftArgmaxMode::Probabilities;
    double temperature = 1.0;

    AnchorConfig anchors;
    double positive_iou = 0.5;
    double bce_eps = 1e-7;
    double objectness_threshold = 0.5;
    double nms_iou = 0.45;
    double match_iou = 0.5;
    GradeThresholds grades;
};

nlohmann::json to_json(const PipelineConfig& cfg);
/// Starts from defaults and overrides the keys present. Accepts either the config object itself
/// or any JSON output carrying it under "config".
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

struct StraightenRun {
    CenterlinePolyline coarse;  // working-resolution centerline, world mm
    CenterlinePolyline fine;    // at the original slice positions
    SpineCurve curve;
    StraightenedVolume straightened;
    StraightenedImage sagittal;
};

/// Working grid -> centerline (heatmaps or annotation target) -> upsample -> curve -> straighten -> sagittal plane.
/// Exactly one of `heatmaps` / `annotations` must be given.
StraightenRun run_straighten(const Volume3D& volume, const Volume3D* heatmaps,
                             const std::vector<VertebraKeypoints>* annotations, const PipelineConfig& cfg);

AnchorGrid anchors_for(const StraightenedImage& sagittal, const PipelineConfig& cfg);
AnchorGrid anchors_for(const StraightenTransform& transform, const PipelineConfig& cfg);

/// World annotations projected onto the straightened image, with their world-space Genant index.
std::vector<GroundTruth2D> project_annotations(const std::vector<VertebraKeypoints>& annotations,
                                               const StraightenTransform& transform);

/// Maps detections back to world mm and measures heights there. Detections whose world keypoints
/// are not a valid vertebra are dropped; their count is returned through `rejected`.
std::vector<ScoredVertebra> score_detections(const std::vector<Detection>& detections,
                                             const StraightenTransform& transform, std::size_t* rejected = nullptr);

/// Bypass: annotated keypoints scored directly.
std::vector<ScoredVertebra> score_annotations(const std::vector<VertebraKeypoints>& annotations,
                                              const StraightenTransform& transform);

nlohmann::json detections_json(const std::vector<ScoredVertebra>& vertebrae, const GradeThresholds& grades);
std::vector<ScoredVertebra> detections_from_json(const nlohmann::json& j);

}  // namespace vfq
