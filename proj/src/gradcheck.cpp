#include "mrn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace mrn {

GradCheckResult finite_diff_check(const std::function<Tensor()>& loss_fn, ParamList& params, double h) {
    if (h <= 0.0) throw UsageError("finite_diff_check: h must be positive");

    for (auto& [name, p] : params) {
        (void)name;
        p.zero_grad();
    }
    Tensor loss = loss_fn();
    loss.backward();

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (auto& [name, p] : params) {
        (void)name;
        analytic.push_back(p.grad());
    }

    GradCheckResult result;
    NoGradGuard no_grad;  // probe evaluations need values only
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& values = params[pi].second.mutable_data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + h;
            const double f_plus = loss_fn().item();
            values[i] = saved - h;
            const double f_minus = loss_fn().item();
            values[i] = saved;
            const double numeric = (f_plus - f_minus) / (2.0 * h);
            const double a = analytic[pi][i];
            const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            if (err > result.max_rel_err) {
                result.max_rel_err = err;
                result.worst_param = params[pi].first;
                result.worst_index = static_cast<long>(i);
            }
        }
    }
    return result;
}

}  // namespace mrn
