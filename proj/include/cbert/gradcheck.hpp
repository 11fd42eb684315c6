// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cbert/params.hpp"

namespace cbert {

struct GradCheckOptions {
    double eps = 1e-5;  // central-difference step; must lie in [1e-6, 1e-4]
    // 0 = check every component; otherwise a deterministic sample per tensor.
    int max_components_per_tensor = 0;
    uint64_t sample_seed = 0;
    // Fault-injection hook: adds corrupt_amount to component 0 of the named
    // parameter's analytic gradient before comparing.
    std::string corrupt_param;
    double corrupt_amount = 0.5;
};

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    int64_t worst_index = -1;
    double analytic = 0.0;
    double numeric = 0.0;
    int64_t checked = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_err = 0.0;
    std::string worst_param;

    bool passes(double tol) const { return max_rel_err < tol; }
};

using LossBuilder = std::function<Value(Tape&, const BoundParams&)>;

// Compares tape gradients of build(...) against central differences
// (f(p+eps) - f(p-eps)) / 2eps component-wise. Relative error uses
// max(|analytic|, |numeric|, 1e-8) as denominator. `build` must be
// deterministic in the parameters.
GradCheckReport grad_check(ParamStore& params, const LossBuilder& build,
                           const GradCheckOptions& opts = {});

}  // namespace cbert
