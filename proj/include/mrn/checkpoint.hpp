#pragma once

#include <string>

#include "mrn/model.hpp"

namespace mrn {

// Checkpoint layout, little-endian throughout:
//   magic "MRNC", version u32,
//   config_len u32 + UTF-8 flat key=value config text,
//   param_count u32,
//   per entry: name_len u32, name bytes, rank u32, extents u32[rank],
//              f64 payload (row-major).
// Trainable parameters and batchnorm running statistics are both stored.
void save_checkpoint(const std::string& path, Model& model, const RunConfig& config);

struct Checkpoint {
    RunConfig config;
    Model model;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace mrn
