#include "mrn/adam.hpp"

#include <cmath>

namespace mrn {

void adam_step(ParamList& params, AdamState& state) {
    if (state.lr <= 0.0) throw UsageError("adam_step: lr must be positive");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (auto& [name, param] : params) {
        if (!param.requires_grad()) continue;
        detail::TensorImpl& impl = *param.impl();
        if (impl.grad.size() != impl.data.size()) {
            throw UsageError("adam_step: missing gradient for parameter '" + name + "'");
        }
        auto& m = state.m[name];
        auto& v = state.v[name];
        if (m.empty()) m.assign(impl.data.size(), 0.0);
        if (v.empty()) v.assign(impl.data.size(), 0.0);
        if (m.size() != impl.data.size()) {
            throw UsageError("adam_step: state shape mismatch for parameter '" + name + "'");
        }
        for (std::size_t i = 0; i < impl.data.size(); ++i) {
            impl.data[i] *= 1.0 - state.lr * state.weight_decay;
            const double g = impl.grad[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            impl.data[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
        check_finite(impl.data, "adam_step");
    }
}

}  // namespace mrn
