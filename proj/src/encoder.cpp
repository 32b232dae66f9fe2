#include "mrn/encoder.hpp"

namespace mrn {

EncoderKind parse_encoder_kind(const std::string& name) {
    if (name == "conv4") return EncoderKind::conv4;
    if (name == "mlp") return EncoderKind::mlp;
    if (name == "identity") return EncoderKind::identity;
    throw ConfigError("unknown encoder kind '" + name + "'");
}

std::string encoder_kind_name(EncoderKind kind) {
    switch (kind) {
        case EncoderKind::conv4: return "conv4";
        case EncoderKind::mlp: return "mlp";
        case EncoderKind::identity: return "identity";
    }
    return "?";
}

void EncoderConfig::validate() const {
    if (input_shape.empty()) throw ConfigError("encoder: input_shape must not be empty");
    for (Dim d : input_shape) {
        if (d < 1) throw ConfigError("encoder: non-positive input extent");
    }
    switch (kind) {
        case EncoderKind::conv4: {
            if (input_shape.size() != 3) {
                throw ConfigError("encoder: conv4 needs C x H x W input, got " + shape_str(input_shape));
            }
            Dim h = input_shape[1], w = input_shape[2];
            for (int i = 0; i < 4; ++i) {
                h /= 2;
                w /= 2;
            }
            if (h < 1 || w < 1) {
                throw ConfigError("encoder: conv4 input " + shape_str(input_shape) +
                                  " too small for four pooling stages");
            }
            if (channels < 1) throw ConfigError("encoder: channels must be positive");
            break;
        }
        case EncoderKind::mlp:
            if (input_shape.size() != 1) {
                throw ConfigError("encoder: mlp needs flat input, got " + shape_str(input_shape));
            }
            if (mlp_dims.empty()) throw ConfigError("encoder: mlp_dims must not be empty");
            for (Dim d : mlp_dims) {
                if (d < 1) throw ConfigError("encoder: non-positive mlp width");
            }
            break;
        case EncoderKind::identity:
            if (input_shape.size() != 1) {
                throw ConfigError("encoder: identity needs flat input, got " + shape_str(input_shape));
            }
            break;
    }
}

Dim EncoderConfig::out_dim() const {
    switch (kind) {
        case EncoderKind::conv4: return shape_size(feature_map_shape());
        case EncoderKind::mlp: return mlp_dims.back();
        case EncoderKind::identity: return input_shape[0];
    }
    return 0;
}

Shape EncoderConfig::feature_map_shape() const {
    if (kind != EncoderKind::conv4) return {};
    Dim h = input_shape[1], w = input_shape[2];
    for (int i = 0; i < 4; ++i) {
        h /= 2;
        w /= 2;
    }
    return Shape{channels, h, w};
}

EncoderParams EncoderParams::create(const EncoderConfig& config, Rng& rng) {
    config.validate();
    EncoderParams params;
    params.config = config;
    switch (config.kind) {
        case EncoderKind::conv4: {
            Dim in = config.input_shape[0];
            for (int i = 0; i < 4; ++i) {
                params.blocks.push_back(ConvBlock::create(in, config.channels, rng));
                in = config.channels;
            }
            break;
        }
        case EncoderKind::mlp: {
            Dim in = config.input_shape[0];
            for (Dim width : config.mlp_dims) {
                params.layers.push_back(LinearLayer::create(in, width, rng));
                in = width;
            }
            break;
        }
        case EncoderKind::identity: break;
    }
    return params;
}

void EncoderParams::collect(const std::string& prefix, ParamList& out) {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const std::string base = prefix + ".block" + std::to_string(i);
        out.emplace_back(base + ".conv.w", blocks[i].w);
        out.emplace_back(base + ".conv.b", blocks[i].b);
        out.emplace_back(base + ".bn.gamma", blocks[i].gamma);
        out.emplace_back(base + ".bn.beta", blocks[i].beta);
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string base = prefix + ".fc" + std::to_string(i);
        out.emplace_back(base + ".w", layers[i].w);
        out.emplace_back(base + ".b", layers[i].b);
    }
}

Tensor EncoderParams::encode(const Tensor& batch, bool training) {
    Shape expected = config.input_shape;
    expected.insert(expected.begin(), batch.dim(0));
    if (batch.shape() != expected) {
        throw UsageError("encode: batch " + shape_str(batch.shape()) + " does not match input shape " +
                         shape_str(config.input_shape) + " with a leading batch extent");
    }
    switch (config.kind) {
        case EncoderKind::conv4: {
            Tensor h = batch;
            for (auto& block : blocks) h = block.forward(h, training);
            return ops::flatten(h);
        }
        case EncoderKind::mlp: {
            Tensor h = batch;
            for (std::size_t i = 0; i < layers.size(); ++i) {
                h = layers[i].forward(h);
                if (i + 1 < layers.size()) h = ops::relu(h);
            }
            return h;
        }
        case EncoderKind::identity: return batch;
    }
    throw UsageError("encode: unknown encoder kind");
}

}  // namespace mrn
