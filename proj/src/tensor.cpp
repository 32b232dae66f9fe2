#include "mrn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace mrn {

Dim shape_size(const Shape& shape) {
    Dim n = 1;
    for (Dim d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

void check_finite(const std::vector<double>& values, const char* op) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(op) + ": non-finite value encountered");
        }
    }
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
    for (Dim d : shape) {
        if (d <= 0) throw ShapeError("Tensor: non-positive extent in shape " + shape_str(shape));
    }
    if (shape_size(shape) != static_cast<Dim>(data.size())) {
        throw ShapeError("Tensor: shape " + shape_str(shape) + " does not match data length " +
                         std::to_string(data.size()));
    }
    check_finite(data, "Tensor");
    impl_ = std::make_shared<detail::TensorImpl>();
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::vector<double> data(static_cast<std::size_t>(shape_size(shape)), 0.0);
    return Tensor(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    std::vector<double> data(static_cast<std::size_t>(shape_size(shape)), value);
    return Tensor(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return Tensor(Shape{1}, std::vector<double>{value}, requires_grad);
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad) {
    std::vector<double> data(static_cast<std::size_t>(shape_size(shape)));
    for (double& v : data) v = rng.normal(0.0, stddev);
    return Tensor(std::move(shape), std::move(data), requires_grad);
}

const Shape& Tensor::shape() const {
    if (!impl_) throw UsageError("Tensor: undefined");
    return impl_->shape;
}

Dim Tensor::size() const { return static_cast<Dim>(data().size()); }

Dim Tensor::dim(std::size_t axis) const {
    const Shape& s = shape();
    if (axis >= s.size()) throw UsageError("Tensor::dim: axis out of range");
    return s[axis];
}

const std::vector<double>& Tensor::data() const {
    if (!impl_) throw UsageError("Tensor: undefined");
    return impl_->data;
}

std::vector<double>& Tensor::mutable_data() {
    if (!impl_) throw UsageError("Tensor: undefined");
    return impl_->data;
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

const std::vector<double>& Tensor::grad() const {
    if (!impl_) throw UsageError("Tensor: undefined");
    impl_->ensure_grad();
    return impl_->grad;
}

void Tensor::zero_grad() {
    if (!impl_) throw UsageError("Tensor: undefined");
    impl_->grad.assign(impl_->data.size(), 0.0);
}

double Tensor::item() const {
    if (size() != 1) throw UsageError("Tensor::item: tensor of shape " + shape_str(shape()) + " is not scalar");
    return data()[0];
}

Tensor Tensor::from_impl(detail::ImplPtr impl) {
    Tensor t;
    t.impl_ = std::move(impl);
    return t;
}

void Tensor::backward() const {
    if (!impl_) throw UsageError("backward: undefined tensor");
    if (size() != 1) throw UsageError("backward: loss must be scalar, got shape " + shape_str(shape()));
    if (!impl_->requires_grad) {
        throw UsageError("backward: loss does not require gradients (empty tape)");
    }

    // Depth-first topological order over the recorded graph.
    std::vector<detail::TensorImpl*> order;
    std::unordered_set<detail::TensorImpl*> seen;
    std::vector<std::pair<detail::TensorImpl*, std::size_t>> stack;
    stack.emplace_back(impl_.get(), 0);
    seen.insert(impl_.get());
    while (!stack.empty()) {
        auto& [node, next_child] = stack.back();
        if (next_child < node->parents.size()) {
            detail::TensorImpl* parent = node->parents[next_child].get();
            ++next_child;
            if (parent->requires_grad && seen.insert(parent).second) {
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    impl_->ensure_grad();
    impl_->grad[0] += 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::TensorImpl* node = *it;
        if (node->backward) {
            node->ensure_grad();
            for (const auto& p : node->parents) p->ensure_grad();
            node->backward(node->grad);
        }
    }

    // Consume the tape: break parent links so intermediates free promptly.
    for (detail::TensorImpl* node : order) {
        node->backward = nullptr;
        node->parents.clear();
    }
}

}  // namespace mrn
