#include "vfq/pipeline.hpp"

#include <algorithm>

namespace vfq {

using nlohmann::json;

json to_json(const PipelineConfig& c) {
    return {{"working_spacing", c.working_spacing},
            {"delta", c.delta},
            {"half_extent", {c.half_extent.x(), c.half_extent.y()}},
            {"smoothing", c.smoothing},
            {"end_extension", c.end_extension},
            {"sagittal_average", c.sagittal_average},
            {"fill", c.fill},
            {"threads", c.threads},
            {"soft_argmax_mode", c.soft_argmax_mode == SoftArgmaxMode::Logits ? "logits" : "probabilities"},
            {"temperature", c.temperature},
            {"anchor_scales", c.anchors.scales},
            {"anchor_ratios", c.anchors.ratios},
            {"positive_iou", c.positive_iou},
            {"bce_eps", c.bce_eps},
            {"objectness_threshold", c.objectness_threshold},
            {"nms_iou", c.nms_iou},
            {"match_iou", c.match_iou},
            {"mild_cut", c.grades.mild},
            {"moderate_cut", c.grades.moderate},
            {"severe_cut", c.grades.severe}};
}

PipelineConfig pipeline_config_from_json(const json& in) {
    const json& j = (in.is_object() && in.contains("config") && in["config"].is_object()) ? in["config"] : in;
    if (!j.is_object()) {
        throw InputError("pipeline config must be a JSON object");
    }
    PipelineConfig c;
    try {
        c.working_spacing = j.value("working_spacing", c.working_spacing);
        c.delta = j.value("delta", c.delta);
        if (j.contains("half_extent")) {
            const auto h = j.at("half_extent").get<std::array<double, 2>>();
            c.half_extent = Vec2(h[0], h[1]);
        }
        c.smoothing = j.value("smoothing", c.smoothing);
        c.end_extension = j.value("end_extension", c.end_extension);
        c.sagittal_average = j.value("sagittal_average", c.sagittal_average);
        c.fill = j.value("fill", c.fill);
        c.threads = j.value("threads", c.threads);
        const std::string mode = j.value("soft_argmax_mode", std::string("probabilities"));
        if (mode == "logits") {
            c.soft_argmax_mode = SoftArgmaxMode::Logits;
        } else if (mode != "probabilities") {
            throw InputError("pipeline config: soft_argmax_mode must be 'probabilities' or 'logits'");
        }
        c.temperature = j.value("temperature", c.temperature);
        if (j.contains("anchor_scales")) c.anchors.scales = j.at("anchor_scales").get<std::vector<double>>();
        if (j.contains("anchor_ratios")) c.anchors.ratios = j.at("anchor_ratios").get<std::vector<double>>();
        c.positive_iou = j.value("positive_iou", c.positive_iou);
        c.bce_eps = j.value("bce_eps", c.bce_eps);
        c.objectness_threshold = j.value("objectness_threshold", c.objectness_threshold);
        c.nms_iou = j.value("nms_iou", c.nms_iou);
        c.match_iou = j.value("match_iou", c.match_iou);
        c.grades.mild = j.value("mild_cut", c.grades.mild);
        c.grades.moderate = j.value("moderate_cut", c.grades.moderate);
        c.grades.severe = j.value("severe_cut", c.grades.severe);
    } catch (const json::exception& e) {
        throw InputError(std::string("pipeline config: ") + e.what());
    }
    if (!(c.working_spacing > 0.0) || !(c.delta > 0.0) || c.anchors.scales.empty() || c.anchors.ratios.empty()) {
        throw InputError("pipeline config: spacings must be positive and anchors non-empty");
    }
    return c;
}

StraightenRun run_straighten(const Volume3D& volume, const Volume3D* heatmaps,
                             const std::vector<VertebraKeypoints>* annotations, const PipelineConfig& cfg) {
    if ((heatmaps == nullptr) == (annotations == nullptr)) {
        throw InputError("straighten: give either heatmaps or annotations");
    }
    StraightenRun run;
    const Volume3D working = resample_volume(volume, Vec3::Constant(cfg.working_spacing), cfg.fill);
    if (heatmaps) {
        if (heatmaps->shape() != working.shape()) {
            throw GeometryError("straighten: heatmap shape does not match the working grid");
        }
        const SoftArgmaxOptions opts{cfg.soft_argmax_mode, cfg.temperature};
        run.coarse = to_world(slicewise_centerline(slice_maps(*heatmaps), opts), *heatmaps);
    } else {
        run.coarse = centerline_target(*annotations, slice_positions(working));
    }
    if (run.coarse.points.size() < 2) {
        throw GeometryError("straighten: centerline covers fewer than two working slices");
    }
    run.fine = upsample_curve(run.coarse, slice_positions(volume));
    run.curve = build_spine_curve(run.fine, {cfg.delta, cfg.smoothing, cfg.end_extension});
    run.straightened =
        straighten_volume(volume, run.curve, {cfg.delta, cfg.half_extent, cfg.fill, std::max(1u, cfg.threads)});
    run.sagittal = mid_sagittal_slice(run.straightened, cfg.sagittal_average);
    return run;
}

AnchorGrid anchors_for(const StraightenTransform& transform, const PipelineConfig& cfg) {
    return generate_anchors(transform.columns(), transform.rows.size(), transform.delta, cfg.anchors);
}

AnchorGrid anchors_for(const StraightenedImage& sagittal, const PipelineConfig& cfg) {
    return anchors_for(sagittal.transform, cfg);
}

std::vector<GroundTruth2D> project_annotations(const std::vector<VertebraKeypoints>& annotations,
                                               const StraightenTransform& transform) {
    std::vector<GroundTruth2D> out;
    for (const auto& a : annotations) {
        GroundTruth2D g;
        g.keypoints.label = a.label;
        for (std::size_t k = 0; k < kNumKeypoints; ++k) {
            g.keypoints.points[k] = to_image(transform, a.points[k]);
        }
        g.genant = genant_index(heights(a));
        out.push_back(g);
    }
    return out;
}

std::vector<ScoredVertebra> score_detections(const std::vector<Detection>& detections,
                                             const StraightenTransform& transform, std::size_t* rejected) {
    std::vector<ScoredVertebra> out;
    std::size_t dropped = 0;
    for (const auto& d : detections) {
        ScoredVertebra v;
        v.score = d.score;
        v.anchor = d.anchor;
        v.keypoints_px = d.keypoints;
        try {
            for (std::size_t k = 0; k < kNumKeypoints; ++k) {
                v.keypoints_world.points[k] = to_world(transform, d.keypoints.points[k]);
            }
            v.genant = genant_index(heights(v.keypoints_world));
        } catch (const GeometryError&) {
            ++dropped;
            continue;
        }
        out.push_back(v);
    }
    // Cranio-caudal order for stable output: increasing arc length of the middle keypoints.
    std::stable_sort(out.begin(), out.end(), [](const ScoredVertebra& a, const ScoredVertebra& b) {
        return a.keypoints_px[Keypoint::MS].y() + a.keypoints_px[Keypoint::MI].y() <
               b.keypoints_px[Keypoint::MS].y() + b.keypoints_px[Keypoint::MI].y();
    });
    if (rejected) *rejected = dropped;
    return out;
}

std::vector<ScoredVertebra> score_annotations(const std::vector<VertebraKeypoints>& annotations,
                                              const StraightenTransform& transform) {
    std::vector<ScoredVertebra> out;
    for (const auto& a : annotations) {
        ScoredVertebra v;
        v.keypoints_world = a;
        v.keypoints_px.label = a.label;
        for (std::size_t k = 0; k < kNumKeypoints; ++k) {
            v.keypoints_px.points[k] = to_image(transform, a.points[k]);
        }
        v.genant = genant_index(heights(a));
        out.push_back(v);
    }
    return out;
}

json detections_json(const std::vector<ScoredVertebra>& vertebrae, const GradeThresholds& grades) {
    json arr = json::array();
    std::vector<double> gs;
    for (const auto& v : vertebrae) {
        json px = json::array();
        json world = json::array();
        for (std::size_t k = 0; k < kNumKeypoints; ++k) {
            px.push_back({v.keypoints_px.points[k].x(), v.keypoints_px.points[k].y()});
            const auto& w = v.keypoints_world.points[k];
            world.push_back({w.x(), w.y(), w.z()});
        }
        const Heights h = heights(v.keypoints_world);
        json item{{"score", v.score},
                  {"anchor", v.anchor},
                  {"keypoints", px},
                  {"keypoints_world", world},
                  {"heights_mm", {h.anterior, h.middle, h.posterior}},
                  {"G", v.genant},
                  {"grade", to_string(grade(v.genant, grades))}};
        if (!v.keypoints_world.label.empty()) item["label"] = v.keypoints_world.label;
        arr.push_back(item);
        gs.push_back(v.genant);
    }
    json patient = nullptr;
    if (!gs.empty()) {
        const PatientScore p = patient_score(gs, grades);
        patient = {{"G", p.index}, {"grade", to_string(p.grade)}};
    }
    return {{"vertebrae", arr}, {"patient", patient}};
}

std::vector<ScoredVertebra> detections_from_json(const json& j) {
    std::vector<ScoredVertebra> out;
    try {
        for (const auto& item : j.at("vertebrae")) {
            ScoredVertebra v;
            v.score = item.at("score").get<double>();
            v.anchor = item.value("anchor", std::size_t{0});
            const auto& px = item.at("keypoints");
            const auto& world = item.at("keypoints_world");
            if (px.size() != kNumKeypoints || world.size() != kNumKeypoints) {
                throw InputError("detections: each vertebra needs six keypoints");
            }
            for (std::size_t k = 0; k < kNumKeypoints; ++k) {
                v.keypoints_px.points[k] = Vec2(px[k].at(0).get<double>(), px[k].at(1).get<double>());
                v.keypoints_world.points[k] =
                    Vec3(world[k].at(0).get<double>(), world[k].at(1).get<double>(), world[k].at(2).get<double>());
            }
            v.genant = item.at("G").get<double>();
            out.push_back(v);
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("detections: malformed: ") + e.what());
    }
    return out;
}

}  // namespace vfq
