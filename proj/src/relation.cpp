#include "mrn/relation.hpp"

#include <cmath>

namespace mrn {

MetricKind parse_metric(const std::string& name) {
    if (name == "learned" || name == "learned_relation") return MetricKind::learned_relation;
    if (name == "euclid" || name == "squared_euclidean") return MetricKind::squared_euclidean;
    throw ConfigError("unknown metric '" + name + "' (expected learned|euclid)");
}

std::string metric_name(MetricKind kind) {
    return kind == MetricKind::learned_relation ? "learned" : "euclid";
}

LinearLayer LinearLayer::create(Dim in, Dim out, Rng& rng) {
    // He-normal fan-in init, zero bias
    const double stddev = std::sqrt(2.0 / static_cast<double>(in));
    LinearLayer layer;
    layer.w = Tensor::randn(Shape{in, out}, rng, stddev, true);
    layer.b = Tensor::zeros(Shape{out}, true);
    return layer;
}

Tensor LinearLayer::forward(const Tensor& x) const { return ops::add_rowvec(ops::matmul(x, w), b); }

ConvBlock ConvBlock::create(Dim in_channels, Dim filters, Rng& rng) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(in_channels * 9));
    ConvBlock block;
    block.w = Tensor::randn(Shape{filters, in_channels, 3, 3}, rng, stddev, true);
    block.b = Tensor::zeros(Shape{filters}, true);
    block.gamma = Tensor::full(Shape{filters}, 1.0, true);
    block.beta = Tensor::zeros(Shape{filters}, true);
    return block;
}

Tensor ConvBlock::forward(const Tensor& x, bool training) {
    Tensor y = ops::conv2d(x, w, b, 1);
    y = ops::batchnorm(y, gamma, beta, bn, training);
    y = ops::relu(y);
    return ops::maxpool2x2(y);
}

RelationParams RelationParams::create_vector(Dim embed_dim, Rng& rng) {
    RelationParams p;
    p.conv_variant = false;
    p.fc1 = LinearLayer::create(embed_dim, kFcHidden, rng);
    p.fc2 = LinearLayer::create(kFcHidden, 1, rng);
    return p;
}

RelationParams RelationParams::create_conv(const Shape& map_shape, Dim filters, Rng& rng) {
    if (map_shape.size() != 3) throw UsageError("RelationParams: map_shape must be C x H x W");
    RelationParams p;
    p.conv_variant = true;
    p.map_shape = map_shape;
    p.block1 = ConvBlock::create(map_shape[0], filters, rng);
    p.block2 = ConvBlock::create(filters, filters, rng);
    const Dim h = map_shape[1] / 2 / 2;
    const Dim w = map_shape[2] / 2 / 2;
    if (h < 1 || w < 1) throw UsageError("RelationParams: map too small for two pooling stages");
    p.fc1 = LinearLayer::create(filters * h * w, kFcHidden, rng);
    p.fc2 = LinearLayer::create(kFcHidden, 1, rng);
    return p;
}

void RelationParams::collect(const std::string& prefix, ParamList& out) {
    if (conv_variant) {
        out.emplace_back(prefix + ".block1.conv.w", block1.w);
        out.emplace_back(prefix + ".block1.conv.b", block1.b);
        out.emplace_back(prefix + ".block1.bn.gamma", block1.gamma);
        out.emplace_back(prefix + ".block1.bn.beta", block1.beta);
        out.emplace_back(prefix + ".block2.conv.w", block2.w);
        out.emplace_back(prefix + ".block2.conv.b", block2.b);
        out.emplace_back(prefix + ".block2.bn.gamma", block2.gamma);
        out.emplace_back(prefix + ".block2.bn.beta", block2.beta);
    }
    out.emplace_back(prefix + ".fc1.w", fc1.w);
    out.emplace_back(prefix + ".fc1.b", fc1.b);
    out.emplace_back(prefix + ".fc2.w", fc2.w);
    out.emplace_back(prefix + ".fc2.b", fc2.b);
}

Tensor RelationParams::forward(const Tensor& diff, bool training) {
    if (diff.rank() != 2) throw ShapeError("relation: expected n x d differences, got " + shape_str(diff.shape()));
    Tensor h = diff;
    if (conv_variant) {
        const Dim n = diff.dim(0);
        if (diff.dim(1) != shape_size(map_shape)) {
            throw ShapeError("relation: rows of " + shape_str(diff.shape()) + " do not fold into maps " +
                             shape_str(map_shape));
        }
        h = ops::reshape(h, Shape{n, map_shape[0], map_shape[1], map_shape[2]});
        h = block1.forward(h, training);
        h = block2.forward(h, training);
        h = ops::flatten(h);
    }
    h = ops::relu(fc1.forward(h));
    h = fc2.forward(h);
    return softplus_output ? ops::softplus(h) : h;
}

Tensor preprocess_diff(const Tensor& fi, const Tensor& fj) {
    if (fi.shape() != fj.shape()) {
        throw ShapeError("preprocess_diff: shape mismatch " + shape_str(fi.shape()) + " vs " +
                         shape_str(fj.shape()));
    }
    return ops::sub(fi, fj);
}

namespace {

Tensor as_row(const Tensor& f) {
    if (f.rank() == 1) return ops::reshape(f, Shape{1, f.dim(0)});
    if (f.rank() == 2 && f.dim(0) == 1) return f;
    return ops::reshape(f, Shape{1, f.size()});
}

}  // namespace

Tensor relation_distance(const Tensor& fi, const Tensor& fj, RelationParams& params, bool training) {
    if (fi.shape() != fj.shape()) {
        throw ShapeError("relation_distance: shape mismatch " + shape_str(fi.shape()) + " vs " +
                         shape_str(fj.shape()));
    }
    Tensor diff = preprocess_diff(as_row(fi), as_row(fj));
    return params.forward(diff, training);
}

double squared_euclidean(const Tensor& fi, const Tensor& fj) {
    if (fi.shape() != fj.shape()) {
        throw ShapeError("squared_euclidean: shape mismatch " + shape_str(fi.shape()) + " vs " +
                         shape_str(fj.shape()));
    }
    const auto& a = fi.data();
    const auto& b = fj.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

Tensor distance_matrix(const Tensor& a, const Tensor& b, MetricKind metric, RelationParams* params,
                       bool training) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw ShapeError("distance_matrix: expected 2-D feature matrices");
    }
    const Dim n = a.dim(0), c = b.dim(0);
    Tensor diff = ops::pairwise_diff(a, b);
    Tensor flat;
    if (metric == MetricKind::squared_euclidean) {
        flat = ops::row_sum(ops::mul(diff, diff));
    } else {
        if (!params) throw UsageError("distance_matrix: learned metric needs relation params");
        flat = params->forward(diff, training);
    }
    return ops::reshape(flat, Shape{n, c});
}

Tensor pairwise_matrix(const Tensor& features, MetricKind metric, RelationParams* params, bool training) {
    if (features.dim(0) < 1) throw UsageError("pairwise_matrix: need at least one row");
    return distance_matrix(features, features, metric, params, training);
}

}  // namespace mrn
