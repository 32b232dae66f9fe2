#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mrn/tensor.hpp"

namespace mrn {

// Named trainable leaves, in a stable order (checkpoint + optimizer walk it).
using ParamList = std::vector<std::pair<std::string, Tensor>>;

// Adam with decoupled weight decay. Moments are keyed by parameter name and
// allocated lazily on the first step.
struct AdamState {
    long step = 0;
    double lr = 0.001;
    double weight_decay = 1e-6;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::unordered_map<std::string, std::vector<double>> m;
    std::unordered_map<std::string, std::vector<double>> v;
};

// One update over all params. Weight decay is applied to the parameter value
// before the moment update; the moment update then uses the raw gradient.
// Throws UsageError if a parameter has no accumulated gradient.
void adam_step(ParamList& params, AdamState& state);

}  // namespace mrn
