#pragma once

#include "aal/autodiff.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace aal {

struct GradCheckCase {
    std::string name;
    ad::FdReport report;
};

struct GradCheckSettings {
    std::uint64_t seed = 0;
    double h = 1e-5;
    double tol = 1e-4;
};

/// Finite-difference check of every tape operator and of the three losses
/// (dynamic classifier, source classifier, weighted adversarial value) and
/// their composite through G, F, F* and D. Inputs are drawn in [−2, 2].
std::vector<GradCheckCase> run_gradcheck_suite(const GradCheckSettings& settings = {});

} // namespace aal
