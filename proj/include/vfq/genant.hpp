#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vfq/core.hpp"

namespace vfq {

enum class Severity { Normal, Mild, Moderate, Severe };

std::string to_string(Severity s);

/// Upper-inclusive cut points: G <= mild -> at least mild, and so on.
struct GradeThresholds {
    double mild = 0.80;
    double moderate = 0.74;
    double severe = 0.60;
};

struct Heights {
    double anterior = 0.0;
    double middle = 0.0;
    double posterior = 0.0;
};

struct GenantMeasurement {
    Heights heights;
    double index = 1.0;
    Severity grade = Severity::Normal;
};

/// Superior-to-inferior Euclidean distances. Throws GeometryError on a zero-length pair
/// or a superior point not above its inferior partner.
Heights heights(const VertebraKeypoints& kps);

/// min / max of the three heights. Throws InputError on a non-positive height.
double genant_index(double h_a, double h_m, double h_p);
inline double genant_index(const Heights& h) { return genant_index(h.anterior, h.middle, h.posterior); }

Severity grade(double genant, const GradeThresholds& thresholds = {});

GenantMeasurement measure(const VertebraKeypoints& kps, const GradeThresholds& thresholds = {});

struct PatientScore {
    double index = 1.0;
    Severity grade = Severity::Normal;
};

/// Most severe vertebra (minimum G). Throws InputError on an empty list.
PatientScore patient_score(const std::vector<double>& genant, const GradeThresholds& thresholds = {});

}  // namespace vfq
