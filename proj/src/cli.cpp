#include "vfq/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "vfq/io.hpp"
#include "vfq/phantom.hpp"
#include "vfq/pipeline.hpp"

namespace vfq {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Overrides {
    std::string config_path;
    std::optional<double> spacing, delta, objectness, nms_iou, mild, moderate, severe, temperature;
    std::optional<unsigned> threads;
    std::optional<std::string> soft_argmax;
    std::string output = ".";
};

PipelineConfig resolve_config(const Overrides& o) {
    PipelineConfig c;
    if (!o.config_path.empty()) c = pipeline_config_from_json(io::read_json(o.config_path));
    if (o.spacing) c.working_spacing = *o.spacing;
    if (o.delta) c.delta = *o.delta;
    if (o.objectness) c.objectness_threshold = *o.objectness;
    if (o.nms_iou) c.nms_iou = *o.nms_iou;
    if (o.mild) c.grades.mild = *o.mild;
    if (o.moderate) c.grades.moderate = *o.moderate;
    if (o.severe) c.grades.severe = *o.severe;
    if (o.temperature) c.temperature = *o.temperature;
    if (o.threads) c.threads = *o.threads;
    if (o.soft_argmax) {
        if (*o.soft_argmax == "logits") {
            c.soft_argmax_mode = SoftArgmaxMode::Logits;
        } else if (*o.soft_argmax == "probabilities") {
            c.soft_argmax_mode = SoftArgmaxMode::Probabilities;
        } else {
            throw InputError("--soft-argmax must be 'probabilities' or 'logits'");
        }
    }
    // Round trip through JSON so every command sees exactly what it echoes.
    return pipeline_config_from_json(to_json(c));
}

fs::path output_dir(const Overrides& o) {
    const fs::path dir(o.output);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory " + dir.string() + ": " + ec.message());
    return dir;
}

StraightenTransform read_transform(const fs::path& path) {
    const json j = io::read_json(path);
    return transform_from_json(j.contains("transform") ? j.at("transform") : j);
}

void check_matches(const StraightenedImage& img, const char* what) {
    const Index3 s = img.image.shape();
    if (s[0] != img.transform.columns() || s[1] != img.transform.rows.size() || s[2] != 1) {
        throw GeometryError(std::string(what) + ": sagittal image does not match the transform");
    }
}

StraightenedImage read_sagittal(const std::string& image, const std::string& transform) {
    StraightenedImage img{io::read_vg1(image), read_transform(transform)};
    check_matches(img, "sagittal");
    return img;
}

std::string abs_string(const fs::path& p) { return fs::absolute(p).lexically_normal().string(); }

int cmd_phantom(const std::string& config_path, std::optional<std::uint64_t> seed, const Overrides& o,
                std::ostream& out) {
    const PipelineConfig cfg = resolve_config(o);
    PhantomConfig pc;
    if (!config_path.empty()) pc = phantom_config_from_json(io::read_json(config_path));
    if (seed) pc.seed = *seed;
    const Phantom ph = generate_phantom(pc);
    const fs::path dir = output_dir(o);

    const Volume3D working = resample_volume(ph.volume, Vec3::Constant(cfg.working_spacing), cfg.fill);
    const Volume3D heat = heatmaps_to_volume(oracle_heatmaps(ph.annotations, working), working);

    io::write_vg1(dir / "volume.vg1", ph.volume);
    io::write_va1(dir / "gt.va1", ph.annotations);
    io::write_vg1(dir / "heatmaps.vg1", heat);
    io::write_json(dir / "phantom.json", {{"config", to_json(cfg)}, {"phantom", to_json(pc)}, {"genant", ph.genant}});
    out << "phantom: " << ph.annotations.size() << " vertebrae, seed " << pc.seed << " -> " << dir.string() << '\n';
    return kExitOk;
}

int cmd_straighten(const std::string& volume_path, const std::string& heatmaps_path,
                   const std::string& annotations_path, const Overrides& o, std::ostream& out) {
    if (heatmaps_path.empty() == annotations_path.empty()) {
        throw InputError("straighten: give exactly one of --heatmaps or --annotations");
    }
    const PipelineConfig cfg = resolve_config(o);
    const Volume3D volume = io::read_vg1(volume_path);
    StraightenRun run;
    if (!heatmaps_path.empty()) {
        const Volume3D heat = io::read_vg1(heatmaps_path);
        run = run_straighten(volume, &heat, nullptr, cfg);
    } else {
        const auto ann = io::read_va1(annotations_path);
        run = run_straighten(volume, nullptr, &ann, cfg);
    }
    const fs::path dir = output_dir(o);
    io::write_vg1(dir / "straightened.vg1", run.straightened.volume);
    io::write_vg1(dir / "sagittal.vg1", run.sagittal.image);
    io::write_json(dir / "transform.json", {{"config", to_json(cfg)},
                                            {"curve_length_mm", (run.curve.samples.back().s - run.curve.samples.front().s)},
                                            {"transform", transform_to_json(run.sagittal.transform)}});
    const Index3 s = run.sagittal.image.shape();
    out << "straighten: curve " << std::fixed << std::setprecision(2) << (run.curve.samples.back().s - run.curve.samples.front().s) << " mm, sagittal "
        << s[0] << "x" << s[1] << " -> " << dir.string() << '\n';
    return kExitOk;
}

int cmd_targets(const std::string& sagittal_path, const std::string& transform_path, const std::string& gt_path,
                bool loss, const std::string& predictions_path, double weight_scale, const Overrides& o,
                std::ostream& out) {
    if (loss && predictions_path.empty()) throw InputError("targets: --loss needs --predictions");
    if (!(weight_scale > 0.0)) throw InputError("targets: --weight-scale must be positive");
    const PipelineConfig cfg = resolve_config(o);
    const StraightenedImage img = read_sagittal(sagittal_path, transform_path);
    const auto gt = project_annotations(io::read_va1(gt_path), img.transform);
    const AnchorGrid anchors = anchors_for(img, cfg);
    DetectionTargets targets = assign_targets(anchors, gt, {cfg.positive_iou, true});
    for (std::size_t i = 0; i < targets.genant.size(); ++i) {
        if (targets.matched[i] >= 0) targets.genant[i] *= weight_scale;
    }
    const fs::path dir = output_dir(o);
    io::write_vg1(dir / "targets.vg1", predictions_to_raster(predictions_from_targets(targets), anchors));
    io::write_vg1(dir / "weights.vg1", weights_to_raster(targets, anchors));
    json gt_json = json::array();
    for (const auto& g : gt) {
        json px = json::array();
        for (const auto& p : g.keypoints.points) px.push_back({p.x(), p.y()});
        gt_json.push_back({{"keypoints", px}, {"G", g.genant}});
    }
    io::write_json(dir / "targets.json", {{"config", to_json(cfg)},
                                          {"anchors", anchors.size()},
                                          {"anchors_per_position", anchors.per_position()},
                                          {"positives", targets.positives()},
                                          {"weight_scale", weight_scale},
                                          {"ground_truth", gt_json}});
    out << "targets: " << gt.size() << " vertebrae, " << targets.positives() << " positive anchors of "
        << anchors.size() << '\n';

    if (loss) {
        const Predictions pred = predictions_from_raster(io::read_vg1(predictions_path), anchors);
        const LossOptions lo{cfg.bce_eps};
        const LossValue v = detection_loss(pred, targets, lo);
        const LossGradient g = detection_loss_grad(pred, targets, lo);
        io::write_vg1(dir / "grad.vg1", predictions_to_raster({g.objectness, g.regression}, anchors));
        io::write_vg1(dir / "grad_logit.vg1", predictions_to_raster({g.objectness_logit, g.regression}, anchors));
        io::write_json(dir / "loss.json", {{"config", to_json(cfg)},
                                           {"bce", v.bce},
                                           {"regression", v.regression},
                                           {"total", v.total()}});
        out << std::setprecision(17) << "loss: bce " << v.bce << " regression " << v.regression << " total "
            << v.total() << '\n';
    }
    return kExitOk;
}

int cmd_score(const std::string& sagittal_path, const std::string& transform_path,
              const std::string& predictions_path, const std::string& annotations_path, const Overrides& o,
              std::ostream& out) {
    if (predictions_path.empty() == annotations_path.empty()) {
        throw InputError("score: give exactly one of --predictions or --annotations");
    }
    const PipelineConfig cfg = resolve_config(o);
    const StraightenedImage img = read_sagittal(sagittal_path, transform_path);
    std::vector<ScoredVertebra> scored;
    std::size_t rejected = 0;
    if (!predictions_path.empty()) {
        const AnchorGrid anchors = anchors_for(img, cfg);
        const Predictions pred = predictions_from_raster(io::read_vg1(predictions_path), anchors);
        const auto dets = detect(pred, anchors, {cfg.objectness_threshold, cfg.nms_iou});
        scored = score_detections(dets, img.transform, &rejected);
    } else {
        scored = score_annotations(io::read_va1(annotations_path), img.transform);
    }
    json j = detections_json(scored, cfg.grades);
    j["config"] = to_json(cfg);
    j["transform"] = abs_string(transform_path);
    j["rejected"] = rejected;
    const fs::path dir = output_dir(o);
    io::write_json(dir / "detections.json", j);
    out << "score: " << scored.size() << " vertebrae";
    if (!j["patient"].is_null()) {
        out << ", patient G " << std::fixed << std::setprecision(3) << j["patient"]["G"].get<double>() << " ("
            << j["patient"]["grade"].get<std::string>() << ")";
    }
    out << '\n';
    return kExitOk;
}

int cmd_evaluate(const std::vector<std::string>& pairs, const std::string& transform_override, const Overrides& o,
                 std::ostream& out) {
    if (pairs.empty() || pairs.size() % 2 != 0) {
        throw InputError("evaluate: expects detections.json gt.va1 pairs");
    }
    const PipelineConfig cfg = resolve_config(o);
    std::vector<EvalCase> cases;
    for (std::size_t i = 0; i < pairs.size(); i += 2) {
        const json det = io::read_json(pairs[i]);
        fs::path tr_path = transform_override;
        if (tr_path.empty()) {
            if (!det.contains("transform") || !det["transform"].is_string()) {
                throw InputError(pairs[i] + ": no transform path; pass --transform");
            }
            tr_path = det["transform"].get<std::string>();
        }
        const StraightenTransform tr = read_transform(tr_path);
        EvalCase c;
        c.predictions = detections_from_json(det);
        c.gt_world = io::read_va1(pairs[i + 1]);
        for (const auto& g : project_annotations(c.gt_world, tr)) c.gt_px.push_back(g.keypoints);
        cases.push_back(std::move(c));
    }
    EvalOptions eo;
    eo.match.min_iou = cfg.match_iou;
    eo.thresholds = {cfg.grades.mild, cfg.grades.moderate};
    eo.fracture_cut = cfg.grades.moderate;
    const EvalReport report = evaluate(cases, eo);
    const fs::path dir = output_dir(o);
    json j = to_json(report);
    j["config"] = to_json(cfg);
    io::write_json(dir / "report.json", j);
    const std::string table = format_table(report);
    {
        std::ofstream f(dir / "report.txt", std::ios::binary);
        f << table;
        if (!f) throw InputError("cannot write " + (dir / "report.txt").string());
    }
    out << table;
    return report.complete() ? kExitOk : kExitUndefinedMetric;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Vertebral fracture quantification pipeline"};
    app.require_subcommand(1);
    app.fallthrough();

    Overrides o;
    app.add_option("--config", o.config_path, "Pipeline config JSON (or any output echoing one)");
    app.add_option("--spacing", o.spacing, "Working grid spacing, mm");
    app.add_option("--delta", o.delta, "Straightened grid spacing, mm");
    app.add_option("--objectness-thresh", o.objectness, "Detection objectness threshold");
    app.add_option("--nms-iou", o.nms_iou, "NMS IoU threshold");
    app.add_option("--mild-cut", o.mild, "Genant mild cut");
    app.add_option("--moderate-cut", o.moderate, "Genant moderate cut");
    app.add_option("--severe-cut", o.severe, "Genant severe cut");
    app.add_option("--soft-argmax", o.soft_argmax, "probabilities | logits");
    app.add_option("--temperature", o.temperature, "Soft-argmax temperature (logits mode)");
    app.add_option("--threads", o.threads, "Straightening threads");
    app.add_option("--output,-o", o.output, "Output directory");

    std::string a1, a2, a3, heatmaps, annotations, predictions, transform;
    std::optional<std::uint64_t> seed;
    bool loss = false;
    double weight_scale = 1.0;
    std::vector<std::string> pairs;

    auto* phantom = app.add_subcommand("phantom", "Generate a synthetic spine with ground truth and oracle heatmaps");
    phantom->add_option("config", a1, "PhantomConfig JSON");
    phantom->add_option("--seed", seed, "Phantom seed");

    auto* straighten = app.add_subcommand("straighten", "Centerline, straightening and mid-sagittal extraction");
    straighten->add_option("volume", a1)->required();
    straighten->add_option("--heatmaps", heatmaps, "Centerline heatmaps on the working grid");
    straighten->add_option("--annotations", annotations, "VA1 annotations (centerline from keypoints)");

    auto* targets = app.add_subcommand("targets", "Anchor targets in the prediction raster layout");
    targets->add_option("sagittal", a1)->required();
    targets->add_option("transform", a2)->required();
    targets->add_option("gt", a3)->required();
    targets->add_flag("--loss", loss, "Evaluate the detection loss against --predictions");
    targets->add_option("--predictions", predictions, "Prediction raster");
    targets->add_option("--weight-scale", weight_scale, "Multiply the Genant weights");

    auto* score = app.add_subcommand("score", "Detect, map back and grade");
    score->add_option("sagittal", a1)->required();
    score->add_option("transform", a2)->required();
    score->add_option("--predictions", predictions, "Prediction raster");
    score->add_option("--annotations", annotations, "Score annotated keypoints directly");

    auto* evaluate_cmd = app.add_subcommand("evaluate", "Metrics over detections/ground-truth pairs");
    evaluate_cmd->add_option("pairs", pairs, "detections.json gt.va1 [...]")->required();
    evaluate_cmd->add_option("--transform", transform, "Transform for every pair");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (*phantom) return cmd_phantom(a1, seed, o, out);
        if (*straighten) return cmd_straighten(a1, heatmaps, annotations, o, out);
        if (*targets) return cmd_targets(a1, a2, a3, loss, predictions, weight_scale, o, out);
        if (*score) return cmd_score(a1, a2, predictions, annotations, o, out);
        if (*evaluate_cmd) return cmd_evaluate(pairs, transform, o, out);
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const GeometryError& e) {
        err << "geometry error: " << e.what() << '\n';
        return kExitGeometry;
    } catch (const UndefinedMetricError& e) {
        err << "undefined metric: " << e.what() << '\n';
        return kExitUndefinedMetric;
    }
    return kExitInput;
}

}  // namespace vfq
