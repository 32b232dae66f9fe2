#pragma once

#include <string>

#include "mrn/adam.hpp"
#include "mrn/ops.hpp"
#include "mrn/rng.hpp"

namespace mrn {

enum class MetricKind { learned_relation, squared_euclidean };

MetricKind parse_metric(const std::string& name);
std::string metric_name(MetricKind kind);

// Simple linear layer; weight is in x out so `matmul(x, w)` applies it.
struct LinearLayer {
    Tensor w;
    Tensor b;

    static LinearLayer create(Dim in, Dim out, Rng& rng);
    Tensor forward(const Tensor& x) const;  // x: n x in
};

struct ConvBlock {
    Tensor w;      // filters x in x 3 x 3
    Tensor b;      // filters
    Tensor gamma;  // filters
    Tensor beta;   // filters
    ops::BatchNormState bn;

    static ConvBlock create(Dim in_channels, Dim filters, Rng& rng);
    // conv(pad 1) -> batchnorm -> relu -> 2x2 maxpool
    Tensor forward(const Tensor& x, bool training);
};

// Learnable distance head g applied to the elementwise difference of two
// embeddings. Flat embeddings go through the fc-only stack (d -> 8 -> 1);
// feature maps go through two conv blocks first. The final softplus keeps
// the output non-negative so exp(-d) behaves like a similarity kernel; the
// raw_linear switch drops it for comparison runs.
struct RelationParams {
    bool conv_variant = false;
    Shape map_shape;  // C x H x W when conv_variant
    ConvBlock block1;
    ConvBlock block2;
    LinearLayer fc1;
    LinearLayer fc2;
    bool softplus_output = true;

    static constexpr Dim kFcHidden = 8;

    static RelationParams create_vector(Dim embed_dim, Rng& rng);
    static RelationParams create_conv(const Shape& map_shape, Dim filters, Rng& rng);

    void collect(const std::string& prefix, ParamList& out);

    // pairs: n x d flat differences (rows reshaped to maps for the conv
    // variant); returns n x 1 non-negative distances
    Tensor forward(const Tensor& diff, bool training);
};

// Elementwise difference preprocessing applied before pairwise comparison.
Tensor preprocess_diff(const Tensor& fi, const Tensor& fj);

// Distance between one pair of embeddings (1 x d rows or flat vectors).
Tensor relation_distance(const Tensor& fi, const Tensor& fj, RelationParams& params, bool training = false);

double squared_euclidean(const Tensor& fi, const Tensor& fj);

// n x n matrix of D(f_i, f_j) over rows of `features`. The learned metric
// may produce an asymmetric matrix; the diagonal is computed but callers
// never select it as a neighbor.
Tensor pairwise_matrix(const Tensor& features, MetricKind metric, RelationParams* params,
                       bool training = false);

// Rectangular variant: rows of `a` against rows of `b`, |a| x |b|.
Tensor distance_matrix(const Tensor& a, const Tensor& b, MetricKind metric, RelationParams* params,
                       bool training = false);

}  // namespace mrn
