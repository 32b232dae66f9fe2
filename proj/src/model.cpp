#include "mrn/model.hpp"

namespace mrn {

namespace {
constexpr std::uint64_t kParamStream = 0x9A5A;
}

Model Model::create(const RunConfig& config) {
    config.encoder.validate();
    Rng rng(derive_seed(config.seed, kParamStream));
    Model model;
    model.encoder = EncoderParams::create(config.encoder, rng);
    if (config.encoder.kind == EncoderKind::conv4) {
        model.relation = RelationParams::create_conv(config.encoder.feature_map_shape(), 64, rng);
    } else {
        model.relation = RelationParams::create_vector(config.encoder.out_dim(), rng);
    }
    model.relation.softplus_output = !config.relation_raw_linear;
    return model;
}

ParamList Model::parameters() {
    ParamList out;
    encoder.collect("encoder", out);
    relation.collect("relation", out);
    return out;
}

std::vector<std::pair<std::string, std::vector<double>*>> Model::buffers() {
    std::vector<std::pair<std::string, std::vector<double>*>> out;
    for (std::size_t i = 0; i < encoder.blocks.size(); ++i) {
        const std::string base = "encoder.block" + std::to_string(i) + ".bn";
        out.emplace_back(base + ".running_mean", &encoder.blocks[i].bn.running_mean);
        out.emplace_back(base + ".running_var", &encoder.blocks[i].bn.running_var);
    }
    if (relation.conv_variant) {
        out.emplace_back("relation.block1.bn.running_mean", &relation.block1.bn.running_mean);
        out.emplace_back("relation.block1.bn.running_var", &relation.block1.bn.running_var);
        out.emplace_back("relation.block2.bn.running_mean", &relation.block2.bn.running_mean);
        out.emplace_back("relation.block2.bn.running_var", &relation.block2.bn.running_var);
    }
    return out;
}

void Model::zero_grads() {
    for (auto& [name, p] : parameters()) {
        (void)name;
        p.zero_grad();
    }
}

}  // namespace mrn
