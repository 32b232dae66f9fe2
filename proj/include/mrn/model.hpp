#pragma once

#include "mrn/config.hpp"

namespace mrn {

// Trainable state: embedding function plus the shared relation metric.
struct Model {
    EncoderParams encoder;
    RelationParams relation;

    static Model create(const RunConfig& config);

    ParamList parameters();
    // non-trainable named arrays that still persist (batchnorm running stats)
    std::vector<std::pair<std::string, std::vector<double>*>> buffers();

    void zero_grads();
};

}  // namespace mrn
