#pragma once

#include <functional>
#include <string>

#include "mrn/adam.hpp"

namespace mrn {

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst_param;
    long worst_index = -1;
};

// Compares reverse-mode gradients of a deterministic scalar-valued function
// against central finite differences. `loss_fn` must rebuild the loss from
// the current parameter values on every call. Relative error per coordinate
// is |analytic - numeric| / max(1, |analytic|, |numeric|).
GradCheckResult finite_diff_check(const std::function<Tensor()>& loss_fn, ParamList& params,
                                  double h = 1e-5);

}  // namespace mrn
