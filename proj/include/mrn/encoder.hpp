#pragma once

#include <string>
#include <vector>

#include "mrn/relation.hpp"

namespace mrn {

enum class EncoderKind { conv4, mlp, identity };

EncoderKind parse_encoder_kind(const std::string& name);
std::string encoder_kind_name(EncoderKind kind);

struct EncoderConfig {
    EncoderKind kind = EncoderKind::mlp;
    Shape input_shape = {16};       // per-sample shape (no batch dim)
    Dim channels = 64;              // conv4 filters per block
    std::vector<Dim> mlp_dims = {32, 16};  // layer widths after the input

    void validate() const;
    // flattened embedding length produced by encode()
    Dim out_dim() const;
    // conv4 feature-map shape (C x h x w); empty for flat encoders
    Shape feature_map_shape() const;
};

// Embedding function parameters. conv4 stacks four conv/bn/relu/pool blocks;
// mlp is a plain ReLU net; identity passes flat inputs through.
struct EncoderParams {
    EncoderConfig config;
    std::vector<ConvBlock> blocks;
    std::vector<LinearLayer> layers;

    static EncoderParams create(const EncoderConfig& config, Rng& rng);
    void collect(const std::string& prefix, ParamList& out);

    // batch: (B, input_shape...) -> (B, out_dim) flattened embeddings
    Tensor encode(const Tensor& batch, bool training);
};

}  // namespace mrn
