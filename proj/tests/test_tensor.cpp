#include "doctest.h"
#include "test_helpers.hpp"

using namespace mrn;

TEST_SUITE("tensor") {

TEST_CASE("shape and data length must agree") {
    CHECK_NOTHROW(Tensor(Shape{2, 3}, std::vector<double>(6, 0.0)));
    CHECK_THROWS_AS(Tensor(Shape{2, 3}, std::vector<double>(5, 0.0)), ShapeError);
    CHECK_THROWS_AS(Tensor(Shape{0}, std::vector<double>{}), ShapeError);
}

TEST_CASE("non-finite values are rejected at the boundary") {
    CHECK_THROWS_AS(Tensor(Shape{1}, {std::nan("")}), NumericError);
    CHECK_THROWS_AS(ops::exp(Tensor::scalar(1000.0)), NumericError);
    CHECK_THROWS_AS(ops::log(Tensor::scalar(0.0)), NumericError);
}

TEST_CASE("relu forward") {
    Tensor x(Shape{3}, {-1.0, 0.0, 2.0});
    const auto out = ops::relu(x).data();
    CHECK(out == std::vector<double>{0.0, 0.0, 2.0});
}

TEST_CASE("backward of sum(x*x)") {
    Tensor x(Shape{2}, {1.0, 2.0}, true);
    Tensor loss = ops::sum_all(ops::mul(x, x));
    loss.backward();
    CHECK(x.grad()[0] == doctest::Approx(2.0));
    CHECK(x.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("parameter not used by the loss keeps a zero gradient") {
    Tensor x(Shape{2}, {1.0, 2.0}, true);
    Tensor unused(Shape{2}, {3.0, 4.0}, true);
    unused.zero_grad();
    Tensor loss = ops::sum_all(x);
    loss.backward();
    CHECK(unused.grad() == std::vector<double>{0.0, 0.0});
}

TEST_CASE("backward requires a scalar loss") {
    Tensor x(Shape{2}, {1.0, 2.0}, true);
    Tensor y = ops::mul(x, x);
    CHECK_THROWS_AS(y.backward(), UsageError);
}

TEST_CASE("gradients accumulate across a reused input") {
    Tensor x(Shape{1}, {3.0}, true);
    Tensor loss = ops::sum_all(ops::add(x, x));
    loss.backward();
    CHECK(x.grad()[0] == doctest::Approx(2.0));
}

TEST_CASE("forward is bit-deterministic") {
    Rng rng(5);
    Tensor a = Tensor::randn(Shape{4, 4}, rng, 1.0);
    Tensor b = Tensor::randn(Shape{4, 4}, rng, 1.0);
    const auto r1 = ops::matmul(ops::relu(a), b).data();
    const auto r2 = ops::matmul(ops::relu(a), b).data();
    CHECK(r1 == r2);
}

TEST_CASE("no-grad scope suppresses tape recording") {
    Tensor x(Shape{2}, {1.0, 2.0}, true);
    NoGradGuard guard;
    Tensor y = ops::mul(x, x);
    CHECK_FALSE(y.requires_grad());
}

TEST_CASE("shape mismatch names the operator") {
    Tensor a(Shape{2}, {1.0, 2.0});
    Tensor b(Shape{3}, {1.0, 2.0, 3.0});
    CHECK_THROWS_WITH_AS(ops::add(a, b), doctest::Contains("add"), ShapeError);
}

}  // TEST_SUITE
