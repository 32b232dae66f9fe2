#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "mrn/engine.hpp"

namespace mrn::testing {

using Matrix = std::vector<std::vector<double>>;
using MetricFn = std::function<double(const std::vector<double>&, const std::vector<double>&)>;

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

inline Matrix slots_to_matrix(const Tensor& slots) {
    Matrix out(static_cast<std::size_t>(slots.dim(0)),
               std::vector<double>(static_cast<std::size_t>(slots.dim(1))));
    const auto& d = slots.data();
    const auto cols = static_cast<std::size_t>(slots.dim(1));
    for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t j = 0; j < cols; ++j) out[i][j] = d[i * cols + j];
    return out;
}

// Scalar re-implementation of the fc relation head, used as an oracle for
// the batched tensor path. Reads the weights straight out of the params.
struct ScalarRelation {
    std::vector<double> w1, b1, w2, b2;
    long in = 0, hidden = 0;
    bool softplus = true;

    static ScalarRelation from(const RelationParams& params) {
        ScalarRelation r;
        r.w1 = params.fc1.w.data();
        r.b1 = params.fc1.b.data();
        r.w2 = params.fc2.w.data();
        r.b2 = params.fc2.b.data();
        r.in = params.fc1.w.dim(0);
        r.hidden = params.fc1.w.dim(1);
        r.softplus = params.softplus_output;
        return r;
    }

    double distance(const std::vector<double>& a, const std::vector<double>& b) const {
        std::vector<double> diff(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
        std::vector<double> h(static_cast<std::size_t>(hidden));
        for (long j = 0; j < hidden; ++j) {
            double acc = 0.0;
            for (long q = 0; q < in; ++q) acc += diff[static_cast<std::size_t>(q)] * w1[static_cast<std::size_t>(q * hidden + j)];
            acc += b1[static_cast<std::size_t>(j)];
            h[static_cast<std::size_t>(j)] = acc > 0.0 ? acc : 0.0;
        }
        double out = b2[0];
        for (long j = 0; j < hidden; ++j) out += h[static_cast<std::size_t>(j)] * w2[static_cast<std::size_t>(j)];
        if (!softplus) return out;
        return std::max(out, 0.0) + std::log1p(std::exp(-std::abs(out)));
    }
};

inline double oracle_sq_euclid(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

// Dense-matrix reference for the propagation step: materializes the full
// m x m weight matrix at every depth and never touches the Tensor path.
inline Matrix oracle_propagate(Matrix slots, const MetricFn& metric, int k, int depth, double lambda,
                               const std::string& strategy) {
    if (depth == 0 || k == 0 || lambda == 1.0) return slots;
    const std::size_t m = slots.size();
    const std::size_t dim = slots.empty() ? 0 : slots[0].size();
    for (int step = 0; step < depth; ++step) {
        Matrix dist(m, std::vector<double>(m));
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) dist[i][j] = metric(slots[i], slots[j]);

        std::vector<std::vector<int>> sel(m);
        for (std::size_t i = 0; i < m; ++i) {
            std::vector<int> cand;
            for (std::size_t j = 0; j < m; ++j)
                if (j != i) cand.push_back(static_cast<int>(j));
            std::sort(cand.begin(), cand.end(), [&](int a, int b) {
                if (dist[i][static_cast<std::size_t>(a)] != dist[i][static_cast<std::size_t>(b)])
                    return dist[i][static_cast<std::size_t>(a)] < dist[i][static_cast<std::size_t>(b)];
                return a < b;
            });
            cand.resize(std::min<std::size_t>(static_cast<std::size_t>(k), cand.size()));
            sel[i] = cand;
        }

        Matrix next(m, std::vector<double>(dim, 0.0));
        for (std::size_t i = 0; i < m; ++i) {
            if (sel[i].empty()) {
                next[i] = slots[i];
                continue;
            }
            std::vector<double> agg(dim, 0.0);
            if (strategy == "weighted") {
                double dmin = dist[i][static_cast<std::size_t>(sel[i][0])];
                for (int j : sel[i]) dmin = std::min(dmin, dist[i][static_cast<std::size_t>(j)]);
                std::vector<double> w(m, 0.0);
                double s = 0.0;
                for (int j : sel[i]) {
                    w[static_cast<std::size_t>(j)] = std::exp(-(dist[i][static_cast<std::size_t>(j)] - dmin));
                    s += w[static_cast<std::size_t>(j)];
                }
                for (int j : sel[i]) w[static_cast<std::size_t>(j)] /= s;
                for (std::size_t j = 0; j < m; ++j)
                    for (std::size_t c = 0; c < dim; ++c) agg[c] += w[j] * slots[j][c];
            } else if (strategy == "mean") {
                const double w = 1.0 / static_cast<double>(sel[i].size());
                std::vector<double> wrow(m, 0.0);
                for (int j : sel[i]) wrow[static_cast<std::size_t>(j)] = w;
                for (std::size_t j = 0; j < m; ++j)
                    for (std::size_t c = 0; c < dim; ++c) agg[c] += wrow[j] * slots[j][c];
            } else {  // max
                for (std::size_t c = 0; c < dim; ++c) {
                    double best = slots[static_cast<std::size_t>(sel[i][0])][c];
                    for (int j : sel[i]) best = std::max(best, slots[static_cast<std::size_t>(j)][c]);
                    agg[c] = best;
                }
            }
            for (std::size_t c = 0; c < dim; ++c) next[i][c] = lambda * slots[i][c] + (1.0 - lambda) * agg[c];
        }
        slots = std::move(next);
    }
    return slots;
}

// Brute-force direct convolution, stride 1, zero padding.
inline std::vector<double> oracle_conv2d(const std::vector<double>& x, Dim B, Dim Cin, Dim H, Dim W,
                                         const std::vector<double>& w, Dim Cout, Dim kh, Dim kw,
                                         const std::vector<double>& bias, int pad) {
    const Dim Ho = H + 2 * pad - kh + 1;
    const Dim Wo = W + 2 * pad - kw + 1;
    std::vector<double> out(static_cast<std::size_t>(B * Cout * Ho * Wo), 0.0);
    for (Dim b = 0; b < B; ++b)
        for (Dim co = 0; co < Cout; ++co)
            for (Dim i = 0; i < Ho; ++i)
                for (Dim j = 0; j < Wo; ++j) {
                    double acc = bias[static_cast<std::size_t>(co)];
                    for (Dim ci = 0; ci < Cin; ++ci)
                        for (Dim u = 0; u < kh; ++u)
                            for (Dim v = 0; v < kw; ++v) {
                                const Dim y = i + u - pad, xx = j + v - pad;
                                if (y < 0 || y >= H || xx < 0 || xx >= W) continue;
                                acc += x[static_cast<std::size_t>(((b * Cin + ci) * H + y) * W + xx)] *
                                       w[static_cast<std::size_t>(((co * Cin + ci) * kh + u) * kw + v)];
                            }
                    out[static_cast<std::size_t>(((b * Cout + co) * Ho + i) * Wo + j)] = acc;
                }
    return out;
}

// Finite-difference check of a single op: loss = <op(inputs), projection>.
inline double op_grad_check(const std::function<Tensor(const ParamList&)>& op_of, ParamList inputs,
                            std::uint64_t proj_seed = 99, double h = 1e-6) {
    Rng rng(proj_seed);
    std::vector<double> proj;
    auto loss_fn = [&]() {
        Tensor out = op_of(inputs);
        if (proj.empty()) {
            proj.resize(static_cast<std::size_t>(out.size()));
            for (double& v : proj) v = rng.uniform(-1.0, 1.0);
        }
        return ops::sum_all(ops::mul(out, Tensor(out.shape(), proj)));
    };
    return finite_diff_check(loss_fn, inputs, h).max_rel_err;
}

}  // namespace mrn::testing
