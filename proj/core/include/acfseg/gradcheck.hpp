#pragma once

#include <functional>

#include "acfseg/graph.hpp"

namespace acfseg {

// Compares analytic gradients of `build()` (which must return a scalar
// node recomputed from the leaves' current values) against central finite
// differences at every element of every leaf. Returns the max relative
// error |analytic - numeric| / max(|analytic|, |numeric|, 1).
double gradcheck_max_rel_error(const std::function<NodePtr()>& build,
                               const std::vector<NodePtr>& leaves, float step = 1e-3f);

struct GradCheckCase {
    std::string name;
    std::function<double(uint64_t seed)> run;  // max relative error for one seed
};

// One case per differentiable op plus the composed ACF path.
const std::vector<GradCheckCase>& gradcheck_suite();

// Worst error over `seeds` seeds; pass threshold for the suite is 1e-2.
double run_gradcheck_case(const GradCheckCase& c, int seeds = 5);

}  // namespace acfseg
