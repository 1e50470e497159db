#pragma once

#include "leafid/model.hpp"

namespace leafid {

struct GradCheckResult {
    double head_max_rel = 0.0;      // calibration weights + bias
    double backbone_max_rel = 0.0;  // conv blocks + dense projection
    double max_rel() const { return std::max(head_max_rel, backbone_max_rel); }
};

// Compares analytic parameter gradients of the pair loss against central
// finite differences, evaluated in double precision. Intended for small
// model configurations (e.g. the tiny2 backbone).
GradCheckResult gradient_check(const SiameseModel& model, const Image& left, const Image& right,
                               int label, double epsilon);

}  // namespace leafid
