#include "vfq/genant.hpp"

#include <algorithm>
#include <cmath>

namespace vfq {

std::string to_string(Severity s) {
    switch (s) {
        case Severity::Normal: return "normal";
        case Severity::Mild: return "mild";
        case Severity::Moderate: return "moderate";
        case Severity::Severe: return "severe";
    }
    return "unknown";
}

Heights heights(const VertebraKeypoints& kps) {
    auto pair_height = [&](Keypoint sup, Keypoint inf, const char* name) {
        const Vec3& s = kps[sup];
        const Vec3& i = kps[inf];
        if (!s.allFinite() || !i.allFinite()) {
            throw GeometryError(std::string(name) + " keypoints are not finite");
        }
        if (!(s.z() > i.z())) {
            throw GeometryError(std::string(name) + " superior keypoint is not above the inferior one");
        }
        const double h = (s - i).norm();
        if (!(h > 0.0)) {
            throw GeometryError(std::string(name) + " height is zero");
        }
        return h;
    };
    return {pair_height(Keypoint::AS, Keypoint::AI, "anterior"), pair_height(Keypoint::MS, Keypoint::MI, "middle"),
            pair_height(Keypoint::PS, Keypoint::PI, "posterior")};
}

double genant_index(double h_a, double h_m, double h_p) {
    if (!(h_a > 0.0) || !(h_m > 0.0) || !(h_p > 0.0) || !std::isfinite(h_a) || !std::isfinite(h_m) ||
        !std::isfinite(h_p)) {
        throw InputError("genant_index: heights must be positive and finite");
    }
    return std::min({h_a, h_m, h_p}) / std::max({h_a, h_m, h_p});
}

Severity grade(double genant, const GradeThresholds& t) {
    if (genant <= t.severe) return Severity::Severe;
    if (genant <= t.moderate) return Severity::Moderate;
    if (genant <= t.mild) return Severity::Mild;
    return Severity::Normal;
}

GenantMeasurement measure(const VertebraKeypoints& kps, const GradeThresholds& thresholds) {
    GenantMeasurement m;
    m.heights = heights(kps);
    m.index = genant_index(m.heights);
    m.grade = grade(m.index, thresholds);
    return m;
}

PatientScore patient_score(const std::vector<double>& genant, const GradeThresholds& thresholds) {
    if (genant.empty()) {
        throw InputError("patient_score: no vertebrae");
    }
    const double g = *std::min_element(genant.begin(), genant.end());
    return {g, grade(g, thresholds)};
}

}  // namespace vfq
