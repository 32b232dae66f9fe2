#include "doctest.h"
#include "test_helpers.hpp"

using namespace mrn;
using namespace mrn::testing;

TEST_SUITE("classifier") {

TEST_CASE("centroid basics") {
    // K = 1: centroid is the lone support embedding
    Tensor f1(Shape{2, 3}, {1.0, 2.0, 3.0, -1.0, 0.0, 5.0});
    CentroidSet c1 = class_centroids(f1, {0, 1}, 2);
    CHECK(c1.centroids.data() == f1.data());

    // mean of [0,0] and [2,2] is [1,1]
    Tensor f2(Shape{2, 2}, {0.0, 0.0, 2.0, 2.0});
    CentroidSet c2 = class_centroids(f2, {0, 0}, 1);
    CHECK(c2.centroids.data() == std::vector<double>{1.0, 1.0});

    // class without supports
    CHECK_THROWS_AS(class_centroids(f2, {0, 0}, 2), UsageError);
}

TEST_CASE("centroids ignore support order") {
    Rng rng(141);
    Tensor f = Tensor::randn(Shape{6, 4}, rng);
    const std::vector<int> labels{0, 1, 2, 0, 1, 2};
    CentroidSet a = class_centroids(f, labels, 3);

    const std::vector<int> perm{3, 5, 1, 0, 2, 4};
    std::vector<int> permuted_labels;
    for (int p : perm) permuted_labels.push_back(labels[static_cast<std::size_t>(p)]);
    CentroidSet b = class_centroids(ops::gather_rows(f, perm), permuted_labels, 3);

    for (std::size_t i = 0; i < a.centroids.data().size(); ++i) {
        CHECK(a.centroids.data()[i] == doctest::Approx(b.centroids.data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("loss at exact equidistance is ln 2") {
    Tensor distances(Shape{1, 2}, {3.7, 3.7});
    Tensor loss = episode_loss_from_distances(distances, {0});
    CHECK(loss.item() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("loss collapses to zero when the true class is overwhelmingly closest") {
    Tensor distances(Shape{1, 3}, {0.0, 500.0, 500.0});
    Tensor loss = episode_loss_from_distances(distances, {0});
    CHECK(loss.item() < 1e-6);
    CHECK(loss.item() >= 0.0);
}

TEST_CASE("loss matches a hand-rolled softmax cross-entropy oracle") {
    Rng rng(151);
    const int Q = 7, C = 5;
    Tensor distances = Tensor::randn(Shape{Q, C}, rng, 2.0);
    std::vector<int> labels;
    for (int i = 0; i < Q; ++i) labels.push_back(static_cast<int>(rng.uniform_int(C)));

    double expected = 0.0;
    const auto& d = distances.data();
    for (int i = 0; i < Q; ++i) {
        double denom = 0.0;
        for (int t = 0; t < C; ++t) denom += std::exp(-d[static_cast<std::size_t>(i * C + t)]);
        expected += -std::log(std::exp(-d[static_cast<std::size_t>(i * C + labels[static_cast<std::size_t>(i)])]) / denom);
    }
    expected /= Q;

    Tensor loss = episode_loss_from_distances(distances, labels);
    CHECK(std::abs(loss.item() - expected) < 1e-10);
}

TEST_CASE("loss is non-negative and equals ln C under total ambiguity") {
    Tensor distances = Tensor::full(Shape{4, 5}, 2.0);
    Tensor loss = episode_loss_from_distances(distances, {0, 1, 2, 3});
    CHECK(loss.item() == doctest::Approx(std::log(5.0)).epsilon(1e-12));

    Rng rng(157);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor d = Tensor::randn(Shape{3, 4}, rng, 3.0);
        Tensor sq = ops::mul(d, d);  // distances >= 0
        CHECK(episode_loss_from_distances(sq, {0, 1, 2}).item() >= 0.0);
    }
}

TEST_CASE("constant distance shift changes neither loss nor predictions") {
    Rng rng(163);
    Tensor d = Tensor::randn(Shape{6, 4}, rng);
    Tensor shifted = ops::add(d, Tensor::full(Shape{6, 4}, 11.25));
    const std::vector<int> labels{0, 1, 2, 3, 0, 1};
    CHECK(std::abs(episode_loss_from_distances(d, labels).item() -
                   episode_loss_from_distances(shifted, labels).item()) < 1e-12);
    CHECK(predict_from_distances(d) == predict_from_distances(shifted));
}

TEST_CASE("label outside the episode range is rejected") {
    Tensor d = Tensor::full(Shape{2, 3}, 1.0);
    CHECK_THROWS_AS(episode_loss_from_distances(d, {0, 3}), UsageError);
    CHECK_THROWS_AS(episode_loss_from_distances(d, {-1, 0}), UsageError);
}

TEST_CASE("prediction basics") {
    // centroids (0,0) and (10,0); query (1,0) goes to class 0
    Tensor centroids(Shape{2, 2}, {0.0, 0.0, 10.0, 0.0});
    Tensor query(Shape{1, 2}, {1.0, 0.0});
    CentroidSet set{centroids};
    CHECK(predict(query, set, MetricKind::squared_euclidean, nullptr) == std::vector<int>{0});

    // a query equal to centroid 2 lands on class 2
    Tensor c3(Shape{3, 2}, {0.0, 0.0, 5.0, 5.0, -3.0, 7.0});
    Tensor q3(Shape{1, 2}, {-3.0, 7.0});
    CHECK(predict(q3, CentroidSet{c3}, MetricKind::squared_euclidean, nullptr) == std::vector<int>{2});
}

TEST_CASE("argmin distance agrees with argmax softmax probability") {
    Rng rng(167);
    Tensor d = Tensor::randn(Shape{8, 5}, rng, 2.0);
    Tensor probs = ops::softmax_rows(ops::neg(d));
    const auto preds = predict_from_distances(d);
    for (int i = 0; i < 8; ++i) {
        int best = 0;
        for (int t = 1; t < 5; ++t)
            if (probs.data()[static_cast<std::size_t>(i * 5 + t)] >
                probs.data()[static_cast<std::size_t>(i * 5 + best)])
                best = t;
        CHECK(preds[static_cast<std::size_t>(i)] == best);
    }
}

TEST_CASE("prediction ties break toward the lower class index") {
    Tensor d(Shape{1, 3}, {2.0, 2.0, 5.0});
    CHECK(predict_from_distances(d) == std::vector<int>{0});
}

TEST_CASE("predict is equivariant under class permutation") {
    Rng rng(173);
    Tensor queries = Tensor::randn(Shape{5, 3}, rng);
    Tensor centroids = Tensor::randn(Shape{4, 3}, rng);
    const auto base = predict(queries, CentroidSet{centroids}, MetricKind::squared_euclidean, nullptr);

    const std::vector<int> perm{2, 0, 3, 1};  // new order of old classes
    Tensor permuted = ops::gather_rows(centroids, perm);
    const auto shuffled = predict(queries, CentroidSet{permuted}, MetricKind::squared_euclidean, nullptr);
    for (std::size_t i = 0; i < base.size(); ++i) {
        CHECK(perm[static_cast<std::size_t>(shuffled[i])] == base[i]);
    }
}

}  // TEST_SUITE
