#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mrn/errors.hpp"
#include "mrn/rng.hpp"

namespace mrn {

using Dim = std::int64_t;
using Shape = std::vector<Dim>;

Dim shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorImpl;
using ImplPtr = std::shared_ptr<TensorImpl>;

// One recorded node of the reverse-mode tape. `backward` receives the
// gradient flowing into this node's output and must accumulate into the
// parents' grad buffers.
struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // same length as data once touched by backward

    std::vector<ImplPtr> parents;
    std::function<void(const std::vector<double>& out_grad)> backward;

    Dim size() const { return static_cast<Dim>(data.size()); }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

}  // namespace detail

// Dense row-major f64 tensor with optional participation in the gradient
// tape. Value semantics: copies share the underlying buffer, so treat
// tensors as immutable once created (the optimizer mutates leaves between
// tape scopes only).
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    Dim size() const;
    Dim dim(std::size_t axis) const;
    int rank() const { return static_cast<int>(shape().size()); }

    const std::vector<double>& data() const;
    std::vector<double>& mutable_data();  // leaves only; does not touch the tape

    bool requires_grad() const;
    const std::vector<double>& grad() const;
    void zero_grad();

    double item() const;  // scalar tensors

    // Seeds d(loss)/d(loss)=1 and walks the recorded graph in reverse
    // topological order, accumulating into every reachable requires_grad
    // leaf. The traversed portion of the tape is consumed.
    void backward() const;

    detail::ImplPtr impl() const { return impl_; }
    static Tensor from_impl(detail::ImplPtr impl);

private:
    detail::ImplPtr impl_;
};

// Scoped switch that disables tape recording (evaluation / finite-difference
// probes). Thread-local, nestable.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

// Throws NumericError naming `op` if any value is NaN/Inf.
void check_finite(const std::vector<double>& values, const char* op);

}  // namespace mrn
