#include "doctest.h"
#include "test_helpers.hpp"

using namespace mrn;
using namespace mrn::testing;

TEST_SUITE("relation") {

TEST_CASE("difference preprocessing") {
    Tensor x(Shape{2}, {3.0, 1.0});
    Tensor y(Shape{2}, {1.0, 2.0});
    CHECK(preprocess_diff(x, x).data() == std::vector<double>{0.0, 0.0});
    CHECK(preprocess_diff(x, y).data() == std::vector<double>{2.0, -1.0});

    Rng rng(41);
    for (int i = 0; i < 20; ++i) {
        Tensor a = Tensor::randn(Shape{5}, rng);
        Tensor b = Tensor::randn(Shape{5}, rng);
        const auto ab = preprocess_diff(a, b).data();
        const auto ba = preprocess_diff(b, a).data();
        for (std::size_t j = 0; j < 5; ++j) CHECK(ab[j] == -ba[j]);
    }
    Tensor bad(Shape{3}, {0.0, 0.0, 0.0});
    CHECK_THROWS_AS(preprocess_diff(x, bad), ShapeError);
}

TEST_CASE("identical inputs through zero-bias parameters give softplus(0) = ln 2") {
    Rng rng(43);
    RelationParams params = RelationParams::create_vector(6, rng);  // biases start at zero
    Tensor f = Tensor::randn(Shape{1, 6}, rng);
    Tensor d = relation_distance(f, f, params);
    CHECK(d.item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("learned distance is non-negative for random pairs") {
    Rng rng(47);
    RelationParams params = RelationParams::create_vector(8, rng);
    // random biases too, so softplus does the work
    for (auto* b : {&params.fc1.b, &params.fc2.b}) {
        for (double& v : b->mutable_data()) v = rng.normal(0.0, 1.0);
    }
    for (int i = 0; i < 1000; ++i) {
        Tensor a = Tensor::randn(Shape{1, 8}, rng, 2.0);
        Tensor b = Tensor::randn(Shape{1, 8}, rng, 2.0);
        CHECK(relation_distance(a, b, params).item() >= 0.0);
    }
}

TEST_CASE("relation gradients match finite differences") {
    Rng rng(53);
    RelationParams rel = RelationParams::create_vector(5, rng);
    Tensor a = Tensor::randn(Shape{3, 5}, rng);
    Tensor b = Tensor::randn(Shape{3, 5}, rng);
    ParamList params;
    rel.collect("relation", params);
    auto loss_fn = [&]() { return ops::mean_all(rel.forward(preprocess_diff(a, b), false)); };
    CHECK(finite_diff_check(loss_fn, params, 1e-5).max_rel_err < 1e-4);
}

TEST_CASE("squared euclidean basics") {
    Tensor x(Shape{2}, {0.0, 0.0});
    Tensor y(Shape{2}, {3.0, 4.0});
    CHECK(squared_euclidean(x, x) == 0.0);
    CHECK(squared_euclidean(x, y) == doctest::Approx(25.0));
    Rng rng(59);
    for (int i = 0; i < 50; ++i) {
        Tensor a = Tensor::randn(Shape{7}, rng);
        Tensor b = Tensor::randn(Shape{7}, rng);
        CHECK(squared_euclidean(a, b) == doctest::Approx(squared_euclidean(b, a)).epsilon(1e-15));
        CHECK(squared_euclidean(a, b) >= 0.0);
    }
}

TEST_CASE("pairwise matrix on [0], [1], [4] under squared euclidean") {
    Tensor f(Shape{3, 1}, {0.0, 1.0, 4.0});
    Tensor d = pairwise_matrix(f, MetricKind::squared_euclidean, nullptr);
    const std::vector<double> expected{0, 1, 16, 1, 0, 9, 16, 9, 0};
    CHECK(d.data() == expected);
}

TEST_CASE("learned pairwise matrix is non-negative and matches per-pair calls bit-exactly") {
    Rng rng(61);
    RelationParams params = RelationParams::create_vector(4, rng);
    for (double& v : params.fc1.b.mutable_data()) v = rng.normal(0.0, 0.5);
    Tensor f = Tensor::randn(Shape{5, 4}, rng);
    Tensor matrix = pairwise_matrix(f, MetricKind::learned_relation, &params);
    CHECK(matrix.shape() == Shape{5, 5});
    for (double v : matrix.data()) CHECK(v >= 0.0);

    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
            Tensor fi = ops::gather_rows(f, {i});
            Tensor fj = ops::gather_rows(f, {j});
            const double scalar = relation_distance(fi, fj, params).item();
            CHECK(matrix.data()[static_cast<std::size_t>(i * 5 + j)] == scalar);
        }
    }
}

TEST_CASE("learned pairwise matrix matches the scalar loop oracle") {
    Rng rng(67);
    RelationParams params = RelationParams::create_vector(6, rng);
    Tensor f = Tensor::randn(Shape{7, 6}, rng);
    const ScalarRelation oracle = ScalarRelation::from(params);
    const Matrix rows = slots_to_matrix(f);
    Tensor matrix = pairwise_matrix(f, MetricKind::learned_relation, &params);
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 0; j < 7; ++j) {
            CHECK(rel_err(matrix.data()[i * 7 + j], oracle.distance(rows[i], rows[j])) < 1e-12);
        }
}

TEST_CASE("translation invariance: D(f+c, g+c) = D(f, g)") {
    Rng rng(71);
    RelationParams params = RelationParams::create_vector(6, rng);
    Tensor f = Tensor::randn(Shape{4, 6}, rng);
    Tensor g = Tensor::randn(Shape{4, 6}, rng);
    Tensor c = Tensor::full(Shape{4, 6}, 3.0);
    Tensor base = distance_matrix(f, g, MetricKind::learned_relation, &params);
    Tensor shifted = distance_matrix(ops::add(f, c), ops::add(g, c), MetricKind::learned_relation, &params);
    for (std::size_t i = 0; i < base.data().size(); ++i) {
        CHECK(rel_err(base.data()[i], shifted.data()[i]) < 1e-12);
    }
}

TEST_CASE("conv-variant relation accepts feature-map differences") {
    Rng rng(73);
    RelationParams params = RelationParams::create_conv(Shape{4, 5, 5}, 4, rng);
    Tensor f = Tensor::randn(Shape{3, 100}, rng);  // 3 samples, 4*5*5 flattened
    Tensor matrix = pairwise_matrix(f, MetricKind::learned_relation, &params, false);
    CHECK(matrix.shape() == Shape{3, 3});
    for (double v : matrix.data()) CHECK(v >= 0.0);
}

TEST_CASE("raw-linear mode can go negative") {
    Rng rng(79);
    RelationParams params = RelationParams::create_vector(4, rng);
    params.softplus_output = false;
    bool saw_negative = false;
    for (int i = 0; i < 200 && !saw_negative; ++i) {
        Tensor a = Tensor::randn(Shape{1, 4}, rng, 3.0);
        Tensor b = Tensor::randn(Shape{1, 4}, rng, 3.0);
        saw_negative = relation_distance(a, b, params).item() < 0.0;
    }
    CHECK(saw_negative);
}

}  // TEST_SUITE
