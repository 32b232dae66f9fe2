#include "doctest.h"
#include "test_helpers.hpp"

using namespace mrn;

TEST_SUITE("encoder") {

TEST_CASE("conv4 maps 3x84x84 input to 64 x 5 x 5 feature maps") {
    EncoderConfig cfg;
    cfg.kind = EncoderKind::conv4;
    cfg.input_shape = {3, 84, 84};
    cfg.channels = 64;
    CHECK(cfg.feature_map_shape() == Shape{64, 5, 5});  // 84 -> 42 -> 21 -> 10 -> 5
    CHECK(cfg.out_dim() == 1600);

    Rng rng(201);
    EncoderParams params = EncoderParams::create(cfg, rng);
    Tensor batch = Tensor::randn(Shape{2, 3, 84, 84}, rng);
    Tensor out = params.encode(batch, true);
    CHECK(out.shape() == Shape{2, 1600});
}

TEST_CASE("conv4 rejects inputs too small for four pooling stages") {
    EncoderConfig cfg;
    cfg.kind = EncoderKind::conv4;
    cfg.input_shape = {3, 8, 8};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("identity encoder passes flat vectors through unchanged") {
    EncoderConfig cfg;
    cfg.kind = EncoderKind::identity;
    cfg.input_shape = {16};
    Rng rng(203);
    EncoderParams params = EncoderParams::create(cfg, rng);
    Tensor batch = Tensor::randn(Shape{3, 16}, rng);
    Tensor out = params.encode(batch, false);
    CHECK(out.data() == batch.data());
    CHECK(params.blocks.empty());
    CHECK(params.layers.empty());
}

TEST_CASE("mlp with zero biases maps zero input to zero output") {
    EncoderConfig cfg;
    cfg.kind = EncoderKind::mlp;
    cfg.input_shape = {16};
    cfg.mlp_dims = {32, 16};
    Rng rng(207);
    EncoderParams params = EncoderParams::create(cfg, rng);  // biases init to zero
    Tensor out = params.encode(Tensor::zeros(Shape{4, 16}), false);
    for (double v : out.data()) CHECK(v == 0.0);
    CHECK(out.shape() == Shape{4, 16});
}

TEST_CASE("identical inputs give identical embeddings in eval mode") {
    EncoderConfig cfg;
    cfg.kind = EncoderKind::conv4;
    cfg.input_shape = {1, 16, 16};
    cfg.channels = 4;
    Rng rng(211);
    EncoderParams params = EncoderParams::create(cfg, rng);
    Tensor one = Tensor::randn(Shape{1, 1, 16, 16}, rng);
    std::vector<double> two_rows(one.data());
    two_rows.insert(two_rows.end(), one.data().begin(), one.data().end());
    Tensor pair(Shape{2, 1, 16, 16}, two_rows);
    // warm the running stats, then evaluate
    (void)params.encode(pair, true);
    Tensor out = params.encode(pair, false);
    const std::size_t half = static_cast<std::size_t>(out.size() / 2);
    for (std::size_t i = 0; i < half; ++i) CHECK(out.data()[i] == out.data()[half + i]);
}

TEST_CASE("batch shape must match the configured input shape") {
    EncoderConfig cfg;
    cfg.kind = EncoderKind::mlp;
    cfg.input_shape = {8};
    cfg.mlp_dims = {4};
    Rng rng(213);
    EncoderParams params = EncoderParams::create(cfg, rng);
    CHECK_THROWS_AS(params.encode(Tensor::zeros(Shape{2, 9}), false), UsageError);
}

TEST_CASE("variant consistency: encoders of mrn and mrn_euclid runs are identical pre-propagation") {
    RunConfig cfg;
    cfg.encoder.kind = EncoderKind::mlp;
    cfg.encoder.input_shape = {8};
    cfg.encoder.mlp_dims = {16, 8};
    cfg.seed = 31;
    cfg.variant = "mrn";
    Model a = Model::create(cfg);
    cfg.variant = "mrn_euclid";
    Model b = Model::create(cfg.resolved());

    Rng rng(217);
    Tensor batch = Tensor::randn(Shape{5, 8}, rng);
    CHECK(a.encoder.encode(batch, false).data() == b.encoder.encode(batch, false).data());
}

}  // TEST_SUITE
