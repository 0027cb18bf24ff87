#include "vfq/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "vfq/genant.hpp"

namespace vfq {

using nlohmann::json;

std::vector<double> localization_error(const std::vector<Vec3>& pred_centers,
                                       const std::vector<VertebraKeypoints>& gt) {
    if (gt.empty()) {
        throw InputError("localization_error: no ground-truth vertebrae");
    }
    std::vector<Vec3> centers;
    centers.reserve(gt.size());
    for (const auto& g : gt) {
        centers.push_back(body_center(g));
    }
    std::vector<double> out;
    out.reserve(pred_centers.size());
    for (const auto& p : pred_centers) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& c : centers) {
            best = std::min(best, (p - c).norm());
        }
        out.push_back(best);
    }
    return out;
}

Matching match_detections(const std::vector<Detection>& preds, const std::vector<Box2D>& gt,
                          const MatchOptions& opts) {
    Matching m;
    m.pred_to_gt.assign(preds.size(), -1);
    m.gt_to_pred.assign(gt.size(), -1);
    std::vector<std::size_t> order(preds.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const Detection& da = preds[a];
        const Detection& db = preds[b];
        if (da.score != db.score) return da.score > db.score;
        if (da.anchor != db.anchor) return da.anchor < db.anchor;
        if (da.box.center.y() != db.box.center.y()) return da.box.center.y() < db.box.center.y();
        if (da.box.center.x() != db.box.center.x()) return da.box.center.x() < db.box.center.x();
        return a < b;
    });
    for (std::size_t p : order) {
        double best = opts.min_iou;
        int best_g = -1;
        for (std::size_t g = 0; g < gt.size(); ++g) {
            if (m.gt_to_pred[g] >= 0) continue;
            const double v = iou(preds[p].box, gt[g]);
            if (v > best) {
                best = v;
                best_g = static_cast<int>(g);
            }
        }
        if (best_g >= 0) {
            m.pred_to_gt[p] = best_g;
            m.gt_to_pred[static_cast<std::size_t>(best_g)] = static_cast<int>(p);
            ++m.tp;
        } else {
            ++m.fp;
        }
    }
    m.fn = gt.size() - m.tp;
    return m;
}

double roc_auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
    if (scores.size() != labels.size()) {
        throw InputError("roc_auc: scores and labels differ in length");
    }
    const auto n = scores.size();
    const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw UndefinedMetricError("roc_auc: both classes must be present");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of 1-based average ranks of the positives.
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]]) rank_sum += avg_rank;
        }
        i = j;
    }
    const double np = static_cast<double>(n_pos);
    const double u = rank_sum - 0.5 * np * (np + 1.0);
    return u / (np * static_cast<double>(n_neg));
}

BinaryMetrics classification_report(const std::vector<double>& pred_genant, const std::vector<double>& gt_genant,
                                    double threshold) {
    if (pred_genant.size() != gt_genant.size()) {
        throw InputError("classification_report: prediction and ground-truth counts differ");
    }
    if (pred_genant.empty()) {
        throw UndefinedMetricError("classification_report: no matched vertebrae");
    }
    BinaryMetrics m;
    std::vector<double> severity;
    std::vector<bool> labels;
    std::size_t tp = 0, tn = 0;
    for (std::size_t i = 0; i < pred_genant.size(); ++i) {
        const bool truth = gt_genant[i] <= threshold;
        const bool called = pred_genant[i] <= threshold;
        severity.push_back(1.0 - pred_genant[i]);
        labels.push_back(truth);
        if (truth) {
            ++m.positives;
            tp += called;
        } else {
            ++m.negatives;
            tn += !called;
        }
    }
    if (m.positives) m.sensitivity = static_cast<double>(tp) / static_cast<double>(m.positives);
    if (m.negatives) m.specificity = static_cast<double>(tn) / static_cast<double>(m.negatives);
    if (m.positives && m.negatives) m.roc_auc = roc_auc(severity, labels);
    return m;
}

bool EvalReport::complete() const {
    if (!localization_mean_mm || !precision || !recall || !recall_fractured) return false;
    for (const auto& c : classification) {
        if (!c.vertebra.roc_auc || !c.vertebra.sensitivity || !c.vertebra.specificity) return false;
        if (c.patient && (!c.patient->roc_auc || !c.patient->sensitivity || !c.patient->specificity)) return false;
    }
    return true;
}

EvalReport evaluate(const std::vector<EvalCase>& cases, const EvalOptions& opts) {
    EvalReport r;
    r.cases = cases.size();
    r.fracture_cut = opts.fracture_cut;
    std::vector<double> loc;
    std::vector<double> pred_g, gt_g;
    std::vector<double> patient_pred, patient_gt;
    std::size_t total_gt = 0;
    for (const auto& c : cases) {
        if (c.gt_px.size() != c.gt_world.size()) {
            throw InputError("evaluate: ground truth pixel/world lists differ");
        }
        std::vector<double> case_gt_g;
        for (const auto& g : c.gt_world) {
            case_gt_g.push_back(genant_index(heights(g)));
        }
        if (!c.gt_world.empty() && !c.predictions.empty()) {
            std::vector<Vec3> centers;
            for (const auto& p : c.predictions) centers.push_back(body_center(p.keypoints_world));
            const auto e = localization_error(centers, c.gt_world);
            loc.insert(loc.end(), e.begin(), e.end());
        }
        std::vector<Detection> dets;
        for (const auto& p : c.predictions) {
            Detection d;
            d.score = p.score;
            d.anchor = p.anchor;
            d.keypoints = p.keypoints_px;
            d.box = bbox_from_keypoints(p.keypoints_px);
            dets.push_back(d);
        }
        std::vector<Box2D> gt_boxes;
        for (const auto& g : c.gt_px) gt_boxes.push_back(bbox_from_keypoints(g));
        const Matching m = match_detections(dets, gt_boxes, opts.match);
        r.tp += m.tp;
        r.fp += m.fp;
        r.fn += m.fn;
        total_gt += gt_boxes.size();
        for (std::size_t g = 0; g < gt_boxes.size(); ++g) {
            const bool fractured = case_gt_g[g] <= opts.fracture_cut;
            r.fractured_gt += fractured;
            if (m.gt_to_pred[g] >= 0) {
                r.fractured_tp += fractured;
                pred_g.push_back(c.predictions[static_cast<std::size_t>(m.gt_to_pred[g])].genant);
                gt_g.push_back(case_gt_g[g]);
            }
        }
        if (!case_gt_g.empty()) {
            double pmin = 1.0;
            for (const auto& p : c.predictions) pmin = std::min(pmin, p.genant);
            patient_pred.push_back(pmin);
            patient_gt.push_back(*std::min_element(case_gt_g.begin(), case_gt_g.end()));
        }
    }
    if (!loc.empty()) {
        const double n = static_cast<double>(loc.size());
        const double mean = std::accumulate(loc.begin(), loc.end(), 0.0) / n;
        double var = 0.0;
        for (double e : loc) var += (e - mean) * (e - mean);
        r.localization_mean_mm = mean;
        r.localization_std_mm = std::sqrt(var / n);
    }
    if (r.tp + r.fp > 0) r.precision = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
    if (total_gt > 0) r.recall = static_cast<double>(r.tp) / static_cast<double>(total_gt);
    if (r.fractured_gt > 0) {
        r.recall_fractured = static_cast<double>(r.fractured_tp) / static_cast<double>(r.fractured_gt);
    }
    for (double thr : opts.thresholds) {
        ThresholdReport t;
        t.threshold = thr;
        if (!pred_g.empty()) t.vertebra = classification_report(pred_g, gt_g, thr);
        if (cases.size() >= 2 && !patient_pred.empty()) {
            t.patient = classification_report(patient_pred, patient_gt, thr);
        }
        r.classification.push_back(t);
    }
    return r;
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json metrics_json(const BinaryMetrics& m) {
    return {{"positives", m.positives},
            {"negatives", m.negatives},
            {"roc_auc", opt(m.roc_auc)},
            {"sensitivity", opt(m.sensitivity)},
            {"specificity", opt(m.specificity)}};
}

std::string cell(const std::optional<double>& v, int precision = 3) {
    if (!v) return "n/a";
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << *v;
    return os.str();
}

}  // namespace

json to_json(const EvalReport& r) {
    json cls = json::array();
    for (const auto& c : r.classification) {
        cls.push_back({{"threshold", c.threshold},
                       {"vertebra", metrics_json(c.vertebra)},
                       {"patient", c.patient ? metrics_json(*c.patient) : json(nullptr)}});
    }
    return {{"cases", r.cases},
            {"localization_mean_mm", opt(r.localization_mean_mm)},
            {"localization_std_mm", opt(r.localization_std_mm)},
            {"counts", {{"tp", r.tp}, {"fp", r.fp}, {"fn", r.fn}, {"fractured_gt", r.fractured_gt},
                        {"fractured_tp", r.fractured_tp}}},
            {"precision", opt(r.precision)},
            {"recall", opt(r.recall)},
            {"recall_fractured", opt(r.recall_fractured)},
            {"fracture_cut", r.fracture_cut},
            {"classification", cls}};
}

std::string format_table(const EvalReport& r) {
    std::ostringstream os;
    os << std::left;
    os << "Localization, mm     " << std::setw(18)
       << (cell(r.localization_mean_mm, 2) + " (" + cell(r.localization_std_mm, 2) + ")") << '\n';
    os << "Recall (all)         " << cell(r.recall) << '\n';
    os << "Recall (G <= " << cell(std::optional<double>(r.fracture_cut), 2) << ")    " << cell(r.recall_fractured) << '\n';
    os << "Precision (all)      " << cell(r.precision) << '\n';
    os << "Counts               TP " << r.tp << "  FP " << r.fp << "  FN " << r.fn << '\n';
    os << '\n';
    os << std::setw(12) << "Grade" << std::setw(10) << "Level" << std::setw(10) << "ROC AUC" << std::setw(13)
       << "Specificity" << std::setw(12) << "Sensitivity" << '\n';
    for (const auto& c : r.classification) {
        const std::string grade = "G <= " + cell(std::optional<double>(c.threshold), 2);
        auto row = [&](const char* level, const BinaryMetrics& m) {
            os << std::setw(12) << grade << std::setw(10) << level << std::setw(10) << cell(m.roc_auc)
               << std::setw(13) << cell(m.specificity) << std::setw(12) << cell(m.sensitivity) << '\n';
        };
        row("vertebra", c.vertebra);
        if (c.patient) row("patient", *c.patient);
    }
    return os.str();
}

}  // namespace vfq
