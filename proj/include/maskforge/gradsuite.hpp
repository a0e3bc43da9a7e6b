#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace maskforge {

// Finite-difference verification of every differentiable op and loss, run in
// double precision with central differences (h = 1e-4).

struct GradCaseResult {
    std::string name;
    int instances = 0;
    int64_t checked = 0;      // individual partial derivatives compared
    double max_rel_err = 0.0;
};

struct GradSuiteReport {
    std::vector<GradCaseResult> cases;

    double worst() const;
    bool passed(double threshold) const;
};

GradSuiteReport run_gradient_suite(uint64_t seed, int instances_per_case);

// One line per case plus a verdict; suitable for terminal output.
std::string format_gradient_report(const GradSuiteReport& report, double threshold);

}  // namespace maskforge
