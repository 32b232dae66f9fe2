#include "mrn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace mrn::ops {

namespace {

using detail::ImplPtr;

Tensor make_op(const char* name, Shape shape, std::vector<double> data,
               const std::vector<Tensor>& parents,
               std::function<void(const std::vector<double>&)> backward) {
    check_finite(data, name);
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    bool rg = false;
    if (grad_enabled()) {
        for (const Tensor& p : parents) rg = rg || p.requires_grad();
    }
    impl->requires_grad = rg;
    if (rg) {
        impl->parents.reserve(parents.size());
        for (const Tensor& p : parents) impl->parents.push_back(p.impl());
        impl->backward = std::move(backward);
    }
    return Tensor::from_impl(impl);
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    std::vector<double> out(a.data());
    const auto& bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
    ImplPtr ai = a.impl(), bi = b.impl();
    return make_op("add", a.shape(), std::move(out), {a, b}, [ai, bi](const std::vector<double>& g) {
        if (ai->requires_grad)
            for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i];
        if (bi->requires_grad)
            for (std::size_t i = 0; i < g.size(); ++i) bi->grad[i] += g[i];
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a, b);
    std::vector<double> out(a.data());
    const auto& bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
    ImplPtr ai = a.impl(), bi = b.impl();
    return make_op("sub", a.shape(), std::move(out), {a, b}, [ai, bi](const std::vector<double>& g) {
        if (ai->requires_grad)
            for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i];
        if (bi->requires_grad)
            for (std::size_t i = 0; i < g.size(); ++i) bi->grad[i] -= g[i];
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    const auto& ad = a.data();
    const auto& bd = b.data();
    std::vector<double> out(ad.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
    ImplPtr ai = a.impl(), bi = b.impl();
    return make_op("mul", a.shape(), std::move(out), {a, b},
                   [ai, bi](const std::vector<double>& g) {
                       // forward values live in the parent impls until backward runs
                       const auto& av = ai->data;
                       const auto& bv = bi->data;
                       if (ai->requires_grad)
                           for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i] * bv[i];
                       if (bi->requires_grad)
                           for (std::size_t i = 0; i < g.size(); ++i) bi->grad[i] += g[i] * av[i];
                   });
}

Tensor scale(const Tensor& a, double c) {
    if (!std::isfinite(c)) throw NumericError("scale: non-finite coefficient");
    std::vector<double> out(a.data());
    for (double& v : out) v *= c;
    ImplPtr ai = a.impl();
    return make_op("scale", a.shape(), std::move(out), {a}, [ai, c](const std::vector<double>& g) {
        if (ai->requires_grad)
            for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += c * g[i];
    });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor relu(const Tensor& a) {
    const auto& ad = a.data();
    std::vector<double> out(ad.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] > 0.0 ? ad[i] : 0.0;
    ImplPtr ai = a.impl();
    return make_op("relu", a.shape(), std::move(out), {a}, [ai](const std::vector<double>& g) {
        if (!ai->requires_grad) return;
        const auto& av = ai->data;
        for (std::size_t i = 0; i < g.size(); ++i)
            if (av[i] > 0.0) ai->grad[i] += g[i];
    });
}

Tensor softplus(const Tensor& a) {
    const auto& ad = a.data();
    std::vector<double> out(ad.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = ad[i];
        out[i] = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
    }
    ImplPtr ai = a.impl();
    return make_op("softplus", a.shape(), std::move(out), {a}, [ai](const std::vector<double>& g) {
        if (!ai->requires_grad) return;
        const auto& av = ai->data;
        for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i] * stable_sigmoid(av[i]);
    });
}

Tensor log(const Tensor& a) {
    const auto& ad = a.data();
    std::vector<double> out(ad.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(ad[i]);
    ImplPtr ai = a.impl();
    return make_op("log", a.shape(), std::move(out), {a}, [ai](const std::vector<double>& g) {
        if (!ai->requires_grad) return;
        const auto& av = ai->data;
        for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i] / av[i];
    });
}

Tensor exp(const Tensor& a) {
    const auto& ad = a.data();
    std::vector<double> out(ad.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(ad[i]);
    ImplPtr ai = a.impl();
    std::vector<double> saved(out);
    return make_op("exp", a.shape(), std::move(out), {a},
                   [ai, saved = std::move(saved)](const std::vector<double>& g) {
                       if (!ai->requires_grad) return;
                       for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i] * saved[i];
                   });
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
    if (x.rank() != 2 || v.rank() != 1 || x.dim(1) != v.dim(0)) {
        throw ShapeError("add_rowvec: expected (n x m) + (m), got " + shape_str(x.shape()) + " and " +
                         shape_str(v.shape()));
    }
    const Dim n = x.dim(0), m = x.dim(1);
    std::vector<double> out(x.data());
    const auto& vd = v.data();
    for (Dim i = 0; i < n; ++i)
        for (Dim j = 0; j < m; ++j) out[static_cast<std::size_t>(i * m + j)] += vd[static_cast<std::size_t>(j)];
    ImplPtr xi = x.impl(), vi = v.impl();
    return make_op("add_rowvec", x.shape(), std::move(out), {x, v},
                   [xi, vi, n, m](const std::vector<double>& g) {
                       if (xi->requires_grad)
                           for (std::size_t i = 0; i < g.size(); ++i) xi->grad[i] += g[i];
                       if (vi->requires_grad)
                           for (Dim i = 0; i < n; ++i)
                               for (Dim j = 0; j < m; ++j)
                                   vi->grad[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(i * m + j)];
                   });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    const Dim n = a.dim(0), k = a.dim(1), m = b.dim(1);
    const auto& ad = a.data();
    const auto& bd = b.data();
    std::vector<double> out(static_cast<std::size_t>(n * m), 0.0);
    // i-k-j order keeps every inner access contiguous; per-element sums still
    // accumulate in ascending k, so batched results match per-row calls bit
    // for bit
    for (Dim i = 0; i < n; ++i) {
        double* out_row = out.data() + i * m;
        const double* a_row = ad.data() + i * k;
        for (Dim q = 0; q < k; ++q) {
            const double av = a_row[q];
            const double* b_row = bd.data() + q * m;
            for (Dim j = 0; j < m; ++j) out_row[j] += av * b_row[j];
        }
    }
    ImplPtr ai = a.impl(), bi = b.impl();
    return make_op("matmul", Shape{n, m}, std::move(out), {a, b},
                   [ai, bi, n, k, m](const std::vector<double>& g) {
                       const auto& ad = ai->data;
                       const auto& bd = bi->data;
                       if (ai->requires_grad) {
                           for (Dim i = 0; i < n; ++i) {
                               const double* g_row = g.data() + i * m;
                               double* da_row = ai->grad.data() + i * k;
                               for (Dim q = 0; q < k; ++q) {
                                   const double* b_row = bd.data() + q * m;
                                   double acc = 0.0;
                                   for (Dim j = 0; j < m; ++j) acc += g_row[j] * b_row[j];
                                   da_row[q] += acc;
                               }
                           }
                       }
                       if (bi->requires_grad) {
                           for (Dim i = 0; i < n; ++i) {
                               const double* g_row = g.data() + i * m;
                               const double* a_row = ad.data() + i * k;
                               for (Dim q = 0; q < k; ++q) {
                                   const double av = a_row[q];
                                   double* db_row = bi->grad.data() + q * m;
                                   for (Dim j = 0; j < m; ++j) db_row[j] += av * g_row[j];
                               }
                           }
                       }
                   });
}

Tensor reshape(const Tensor& x, Shape new_shape) {
    if (shape_size(new_shape) != x.size()) {
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(new_shape));
    }
    ImplPtr xi = x.impl();
    return make_op("reshape", std::move(new_shape), x.data(), {x}, [xi](const std::vector<double>& g) {
        if (!xi->requires_grad) return;
        for (std::size_t i = 0; i < g.size(); ++i) xi->grad[i] += g[i];
    });
}

Tensor flatten(const Tensor& x) {
    if (x.rank() < 1) throw ShapeError("flatten: rank-0 input");
    const Dim lead = x.dim(0);
    return reshape(x, Shape{lead, x.size() / lead});
}

Tensor transpose(const Tensor& x) {
    if (x.rank() != 2) throw ShapeError("transpose: expected n x m, got " + shape_str(x.shape()));
    const Dim n = x.dim(0), m = x.dim(1);
    const auto& xd = x.data();
    std::vector<double> out(xd.size());
    for (Dim i = 0; i < n; ++i)
        for (Dim j = 0; j < m; ++j) out[static_cast<std::size_t>(j * n + i)] = xd[static_cast<std::size_t>(i * m + j)];
    ImplPtr xi = x.impl();
    return make_op("transpose", Shape{m, n}, std::move(out), {x}, [xi, n, m](const std::vector<double>& g) {
        if (!xi->requires_grad) return;
        for (Dim i = 0; i < n; ++i)
            for (Dim j = 0; j < m; ++j) xi->grad[static_cast<std::size_t>(i * m + j)] += g[static_cast<std::size_t>(j * n + i)];
    });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int padding) {
    if (x.rank() != 4 || w.rank() != 4 || b.rank() != 1) {
        throw ShapeError("conv2d: expected x[B,Cin,H,W], w[Cout,Cin,kh,kw], b[Cout]; got " +
                         shape_str(x.shape()) + ", " + shape_str(w.shape()) + ", " + shape_str(b.shape()));
    }
    if (padding < 0) throw UsageError("conv2d: negative padding");
    const Dim B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    const Dim Cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    if (w.dim(1) != Cin || b.dim(0) != Cout) {
        throw ShapeError("conv2d: channel mismatch between x " + shape_str(x.shape()) + " and w " +
                         shape_str(w.shape()));
    }
    const Dim Ho = H + 2 * padding - kh + 1;
    const Dim Wo = W + 2 * padding - kw + 1;
    if (Ho < 1 || Wo < 1) {
        throw ShapeError("conv2d: kernel " + shape_str(w.shape()) + " larger than padded input " +
                         shape_str(x.shape()));
    }

    const auto& xd = x.data();
    const auto& wd = w.data();
    const auto& bd = b.data();
    std::vector<double> out(static_cast<std::size_t>(B * Cout * Ho * Wo), 0.0);
    const Dim p = padding;
    for (Dim bi = 0; bi < B; ++bi)
        for (Dim co = 0; co < Cout; ++co)
            for (Dim i = 0; i < Ho; ++i)
                for (Dim j = 0; j < Wo; ++j) {
                    double acc = bd[static_cast<std::size_t>(co)];
                    for (Dim ci = 0; ci < Cin; ++ci)
                        for (Dim u = 0; u < kh; ++u) {
                            const Dim y = i + u - p;
                            if (y < 0 || y >= H) continue;
                            const std::size_t xrow = static_cast<std::size_t>(((bi * Cin + ci) * H + y) * W);
                            const std::size_t wrow = static_cast<std::size_t>(((co * Cin + ci) * kh + u) * kw);
                            for (Dim v = 0; v < kw; ++v) {
                                const Dim xx = j + v - p;
                                if (xx < 0 || xx >= W) continue;
                                acc += xd[xrow + static_cast<std::size_t>(xx)] * wd[wrow + static_cast<std::size_t>(v)];
                            }
                        }
                    out[static_cast<std::size_t>(((bi * Cout + co) * Ho + i) * Wo + j)] = acc;
                }

    ImplPtr xi = x.impl(), wi = w.impl(), bimpl = b.impl();
    return make_op(
        "conv2d", Shape{B, Cout, Ho, Wo}, std::move(out), {x, w, b},
        [xi, wi, bimpl, B, Cin, H, W, Cout, kh, kw, Ho, Wo, p](const std::vector<double>& g) {
            const auto& xd = xi->data;
            const auto& wd = wi->data;
            for (Dim bi = 0; bi < B; ++bi)
                for (Dim co = 0; co < Cout; ++co)
                    for (Dim i = 0; i < Ho; ++i)
                        for (Dim j = 0; j < Wo; ++j) {
                            const double go = g[static_cast<std::size_t>(((bi * Cout + co) * Ho + i) * Wo + j)];
                            if (bimpl->requires_grad) bimpl->grad[static_cast<std::size_t>(co)] += go;
                            for (Dim ci = 0; ci < Cin; ++ci)
                                for (Dim u = 0; u < kh; ++u) {
                                    const Dim y = i + u - p;
                                    if (y < 0 || y >= H) continue;
                                    const std::size_t xrow = static_cast<std::size_t>(((bi * Cin + ci) * H + y) * W);
                                    const std::size_t wrow = static_cast<std::size_t>(((co * Cin + ci) * kh + u) * kw);
                                    for (Dim v = 0; v < kw; ++v) {
                                        const Dim xx = j + v - p;
                                        if (xx < 0 || xx >= W) continue;
                                        if (xi->requires_grad)
                                            xi->grad[xrow + static_cast<std::size_t>(xx)] += go * wd[wrow + static_cast<std::size_t>(v)];
                                        if (wi->requires_grad)
                                            wi->grad[wrow + static_cast<std::size_t>(v)] += go * xd[xrow + static_cast<std::size_t>(xx)];
                                    }
                                }
                        }
        });
}

Tensor maxpool2x2(const Tensor& x) {
    if (x.rank() != 4) throw ShapeError("maxpool2x2: expected B x C x H x W, got " + shape_str(x.shape()));
    const Dim B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const Dim Ho = H / 2, Wo = W / 2;
    if (Ho < 1 || Wo < 1) throw ShapeError("maxpool2x2: spatial extent too small in " + shape_str(x.shape()));
    const auto& xd = x.data();
    std::vector<double> out(static_cast<std::size_t>(B * C * Ho * Wo));
    std::vector<std::size_t> argmax(out.size());
    for (Dim bc = 0; bc < B * C; ++bc)
        for (Dim i = 0; i < Ho; ++i)
            for (Dim j = 0; j < Wo; ++j) {
                double best = -std::numeric_limits<double>::infinity();
                std::size_t best_idx = 0;
                for (Dim u = 0; u < 2; ++u)
                    for (Dim v = 0; v < 2; ++v) {
                        const std::size_t idx =
                            static_cast<std::size_t>((bc * H + 2 * i + u) * W + 2 * j + v);
                        if (xd[idx] > best) {
                            best = xd[idx];
                            best_idx = idx;
                        }
                    }
                const std::size_t o = static_cast<std::size_t>((bc * Ho + i) * Wo + j);
                out[o] = best;
                argmax[o] = best_idx;
            }
    ImplPtr xi = x.impl();
    return make_op("maxpool2x2", Shape{B, C, Ho, Wo}, std::move(out), {x},
                   [xi, argmax = std::move(argmax)](const std::vector<double>& g) {
                       if (!xi->requires_grad) return;
                       for (std::size_t o = 0; o < g.size(); ++o) xi->grad[argmax[o]] += g[o];
                   });
}

Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                 bool training, double momentum, double eps) {
    if (x.rank() != 4 && x.rank() != 2) {
        throw ShapeError("batchnorm: expected B x C x H x W or B x C, got " + shape_str(x.shape()));
    }
    const Dim B = x.dim(0), C = x.dim(1);
    const Dim spatial = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
    if (gamma.shape() != Shape{C} || beta.shape() != Shape{C}) {
        throw ShapeError("batchnorm: gamma/beta must be length-C vectors");
    }
    if (state.running_mean.empty()) {
        state.running_mean.assign(static_cast<std::size_t>(C), 0.0);
        state.running_var.assign(static_cast<std::size_t>(C), 1.0);
    }
    if (static_cast<Dim>(state.running_mean.size()) != C) {
        throw UsageError("batchnorm: state does not match channel count");
    }
    if (training && B < 2) throw UsageError("batchnorm: training mode requires batch >= 2");

    const Dim N = B * spatial;  // samples per channel
    const auto& xd = x.data();
    const auto& gd = gamma.data();
    const auto& betad = beta.data();

    std::vector<double> mean(static_cast<std::size_t>(C), 0.0);
    std::vector<double> inv_std(static_cast<std::size_t>(C), 0.0);
    if (training) {
        std::vector<double> var(static_cast<std::size_t>(C), 0.0);
        for (Dim c = 0; c < C; ++c) {
            double acc = 0.0;
            for (Dim b = 0; b < B; ++b) {
                const std::size_t base = static_cast<std::size_t>((b * C + c) * spatial);
                for (Dim s = 0; s < spatial; ++s) acc += xd[base + static_cast<std::size_t>(s)];
            }
            mean[static_cast<std::size_t>(c)] = acc / static_cast<double>(N);
            double vacc = 0.0;
            for (Dim b = 0; b < B; ++b) {
                const std::size_t base = static_cast<std::size_t>((b * C + c) * spatial);
                for (Dim s = 0; s < spatial; ++s) {
                    const double d = xd[base + static_cast<std::size_t>(s)] - mean[static_cast<std::size_t>(c)];
                    vacc += d * d;
                }
            }
            var[static_cast<std::size_t>(c)] = vacc / static_cast<double>(N);
            inv_std[static_cast<std::size_t>(c)] = 1.0 / std::sqrt(var[static_cast<std::size_t>(c)] + eps);
        }
        const double unbias = N > 1 ? static_cast<double>(N) / static_cast<double>(N - 1) : 1.0;
        for (Dim c = 0; c < C; ++c) {
            auto ci = static_cast<std::size_t>(c);
            state.running_mean[ci] = momentum * state.running_mean[ci] + (1.0 - momentum) * mean[ci];
            state.running_var[ci] = momentum * state.running_var[ci] + (1.0 - momentum) * var[ci] * unbias;
        }
    } else {
        for (Dim c = 0; c < C; ++c) {
            auto ci = static_cast<std::size_t>(c);
            mean[ci] = state.running_mean[ci];
            inv_std[ci] = 1.0 / std::sqrt(state.running_var[ci] + eps);
        }
    }

    std::vector<double> xhat(xd.size());
    std::vector<double> out(xd.size());
    for (Dim b = 0; b < B; ++b)
        for (Dim c = 0; c < C; ++c) {
            auto ci = static_cast<std::size_t>(c);
            const std::size_t base = static_cast<std::size_t>((b * C + c) * spatial);
            for (Dim s = 0; s < spatial; ++s) {
                const std::size_t idx = base + static_cast<std::size_t>(s);
                xhat[idx] = (xd[idx] - mean[ci]) * inv_std[ci];
                out[idx] = gd[ci] * xhat[idx] + betad[ci];
            }
        }

    ImplPtr xi = x.impl(), gi = gamma.impl(), bi = beta.impl();
    return make_op(
        "batchnorm", x.shape(), std::move(out), {x, gamma, beta},
        [xi, gi, bi, xhat = std::move(xhat), inv_std = std::move(inv_std), gd, B, C, spatial, N,
         training](const std::vector<double>& g) {
            for (Dim c = 0; c < C; ++c) {
                auto ci = static_cast<std::size_t>(c);
                double sum_g = 0.0, sum_gx = 0.0;
                for (Dim b = 0; b < B; ++b) {
                    const std::size_t base = static_cast<std::size_t>((b * C + c) * spatial);
                    for (Dim s = 0; s < spatial; ++s) {
                        const std::size_t idx = base + static_cast<std::size_t>(s);
                        sum_g += g[idx];
                        sum_gx += g[idx] * xhat[idx];
                    }
                }
                if (bi->requires_grad) bi->grad[ci] += sum_g;
                if (gi->requires_grad) gi->grad[ci] += sum_gx;
                if (!xi->requires_grad) continue;
                if (training) {
                    // dxhat = g * gamma; dx folds the mean/variance paths
                    const double k = gd[ci] * inv_std[ci] / static_cast<double>(N);
                    for (Dim b = 0; b < B; ++b) {
                        const std::size_t base = static_cast<std::size_t>((b * C + c) * spatial);
                        for (Dim s = 0; s < spatial; ++s) {
                            const std::size_t idx = base + static_cast<std::size_t>(s);
                            xi->grad[idx] +=
                                k * (static_cast<double>(N) * g[idx] - sum_g - xhat[idx] * sum_gx);
                        }
                    }
                } else {
                    const double k = gd[ci] * inv_std[ci];
                    for (Dim b = 0; b < B; ++b) {
                        const std::size_t base = static_cast<std::size_t>((b * C + c) * spatial);
                        for (Dim s = 0; s < spatial; ++s) {
                            const std::size_t idx = base + static_cast<std::size_t>(s);
                            xi->grad[idx] += k * g[idx];
                        }
                    }
                }
            }
        });
}

Tensor sum_all(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    ImplPtr xi = x.impl();
    return make_op("sum_all", Shape{1}, {acc}, {x}, [xi](const std::vector<double>& g) {
        if (!xi->requires_grad) return;
        for (double& gv : xi->grad) gv += g[0];
    });
}

Tensor mean_all(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    const double inv = 1.0 / static_cast<double>(x.size());
    ImplPtr xi = x.impl();
    return make_op("mean_all", Shape{1}, {acc * inv}, {x}, [xi, inv](const std::vector<double>& g) {
        if (!xi->requires_grad) return;
        for (double& gv : xi->grad) gv += g[0] * inv;
    });
}

Tensor row_sum(const Tensor& x) {
    if (x.rank() != 2) throw ShapeError("row_sum: expected n x m, got " + shape_str(x.shape()));
    const Dim n = x.dim(0), m = x.dim(1);
    const auto& xd = x.data();
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    for (Dim i = 0; i < n; ++i) {
        double acc = 0.0;
        for (Dim j = 0; j < m; ++j) acc += xd[static_cast<std::size_t>(i * m + j)];
        out[static_cast<std::size_t>(i)] = acc;
    }
    ImplPtr xi = x.impl();
    return make_op("row_sum", Shape{n, 1}, std::move(out), {x}, [xi, n, m](const std::vector<double>& g) {
        if (!xi->requires_grad) return;
        for (Dim i = 0; i < n; ++i)
            for (Dim j = 0; j < m; ++j) xi->grad[static_cast<std::size_t>(i * m + j)] += g[static_cast<std::size_t>(i)];
    });
}

Tensor softmax_rows(const Tensor& x) {
    if (x.rank() != 2) throw ShapeError("softmax_rows: expected n x m, got " + shape_str(x.shape()));
    const Dim n = x.dim(0), m = x.dim(1);
    const auto& xd = x.data();
    std::vector<double> out(xd.size());
    for (Dim i = 0; i < n; ++i) {
        const std::size_t base = static_cast<std::size_t>(i * m);
        double mx = xd[base];
        for (Dim j = 1; j < m; ++j) mx = std::max(mx, xd[base + static_cast<std::size_t>(j)]);
        double s = 0.0;
        for (Dim j = 0; j < m; ++j) {
            const double e = std::exp(xd[base + static_cast<std::size_t>(j)] - mx);
            out[base + static_cast<std::size_t>(j)] = e;
            s += e;
        }
        for (Dim j = 0; j < m; ++j) out[base + static_cast<std::size_t>(j)] /= s;
    }
    ImplPtr xi = x.impl();
    std::vector<double> saved(out);
    return make_op("softmax_rows", x.shape(), std::move(out), {x},
                   [xi, saved = std::move(saved), n, m](const std::vector<double>& g) {
                       if (!xi->requires_grad) return;
                       for (Dim i = 0; i < n; ++i) {
                           const std::size_t base = static_cast<std::size_t>(i * m);
                           double dot = 0.0;
                           for (Dim j = 0; j < m; ++j) dot += g[base + static_cast<std::size_t>(j)] * saved[base + static_cast<std::size_t>(j)];
                           for (Dim j = 0; j < m; ++j) {
                               const std::size_t idx = base + static_cast<std::size_t>(j);
                               xi->grad[idx] += saved[idx] * (g[idx] - dot);
                           }
                       }
                   });
}

Tensor log_softmax_rows(const Tensor& x) {
    if (x.rank() != 2) throw ShapeError("log_softmax_rows: expected n x m, got " + shape_str(x.shape()));
    const Dim n = x.dim(0), m = x.dim(1);
    const auto& xd = x.data();
    std::vector<double> out(xd.size());
    for (Dim i = 0; i < n; ++i) {
        const std::size_t base = static_cast<std::size_t>(i * m);
        double mx = xd[base];
        for (Dim j = 1; j < m; ++j) mx = std::max(mx, xd[base + static_cast<std::size_t>(j)]);
        double s = 0.0;
        for (Dim j = 0; j < m; ++j) s += std::exp(xd[base + static_cast<std::size_t>(j)] - mx);
        const double lse = mx + std::log(s);
        for (Dim j = 0; j < m; ++j) out[base + static_cast<std::size_t>(j)] = xd[base + static_cast<std::size_t>(j)] - lse;
    }
    ImplPtr xi = x.impl();
    std::vector<double> saved(out);
    return make_op("log_softmax_rows", x.shape(), std::move(out), {x},
                   [xi, saved = std::move(saved), n, m](const std::vector<double>& g) {
                       if (!xi->requires_grad) return;
                       for (Dim i = 0; i < n; ++i) {
                           const std::size_t base = static_cast<std::size_t>(i * m);
                           double sum_g = 0.0;
                           for (Dim j = 0; j < m; ++j) sum_g += g[base + static_cast<std::size_t>(j)];
                           for (Dim j = 0; j < m; ++j) {
                               const std::size_t idx = base + static_cast<std::size_t>(j);
                               xi->grad[idx] += g[idx] - std::exp(saved[idx]) * sum_g;
                           }
                       }
                   });
}

Tensor gather_rows(const Tensor& x, const std::vector<int>& rows) {
    if (x.rank() < 2) throw ShapeError("gather_rows: expected rank >= 2, got " + shape_str(x.shape()));
    if (rows.empty()) throw UsageError("gather_rows: empty row selection");
    const Dim n = x.dim(0);
    const Dim row_size = x.size() / n;
    for (int r : rows) {
        if (r < 0 || r >= n) throw UsageError("gather_rows: row index out of range");
    }
    const auto& xd = x.data();
    std::vector<double> out(rows.size() * static_cast<std::size_t>(row_size));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::size_t src = static_cast<std::size_t>(rows[i]) * static_cast<std::size_t>(row_size);
        std::copy_n(xd.begin() + static_cast<std::ptrdiff_t>(src), row_size,
                    out.begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(row_size)));
    }
    Shape out_shape = x.shape();
    out_shape[0] = static_cast<Dim>(rows.size());
    ImplPtr xi = x.impl();
    return make_op("gather_rows", std::move(out_shape), std::move(out), {x},
                   [xi, rows, row_size](const std::vector<double>& g) {
                       if (!xi->requires_grad) return;
                       for (std::size_t i = 0; i < rows.size(); ++i) {
                           const std::size_t dst = static_cast<std::size_t>(rows[i]) * static_cast<std::size_t>(row_size);
                           const std::size_t src = i * static_cast<std::size_t>(row_size);
                           for (Dim j = 0; j < row_size; ++j)
                               xi->grad[dst + static_cast<std::size_t>(j)] += g[src + static_cast<std::size_t>(j)];
                       }
                   });
}

Tensor pick_per_row(const Tensor& x, const std::vector<int>& cols) {
    if (x.rank() != 2) throw ShapeError("pick_per_row: expected n x m, got " + shape_str(x.shape()));
    const Dim n = x.dim(0), m = x.dim(1);
    if (static_cast<Dim>(cols.size()) != n) throw UsageError("pick_per_row: need one column per row");
    for (int c : cols) {
        if (c < 0 || c >= m) throw UsageError("pick_per_row: column index out of range");
    }
    const auto& xd = x.data();
    std::vector<double> out(static_cast<std::size_t>(n));
    for (Dim i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = xd[static_cast<std::size_t>(i * m + cols[static_cast<std::size_t>(i)])];
    ImplPtr xi = x.impl();
    return make_op("pick_per_row", Shape{n, 1}, std::move(out), {x},
                   [xi, cols, m](const std::vector<double>& g) {
                       if (!xi->requires_grad) return;
                       for (std::size_t i = 0; i < cols.size(); ++i)
                           xi->grad[i * static_cast<std::size_t>(m) + static_cast<std::size_t>(cols[i])] += g[i];
                   });
}

Tensor pairwise_diff(const Tensor& a, const Tensor& b) {
    if (a.rank() < 2 || b.rank() < 2) {
        throw ShapeError("pairwise_diff: expected rank >= 2 inputs");
    }
    Shape arest(a.shape().begin() + 1, a.shape().end());
    Shape brest(b.shape().begin() + 1, b.shape().end());
    if (arest != brest) {
        throw ShapeError("pairwise_diff: trailing dims differ: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    const Dim n = a.dim(0), c = b.dim(0);
    const Dim row = a.size() / n;
    const auto& ad = a.data();
    const auto& bd = b.data();
    std::vector<double> out(static_cast<std::size_t>(n * c * row));
    for (Dim i = 0; i < n; ++i)
        for (Dim j = 0; j < c; ++j) {
            const std::size_t dst = static_cast<std::size_t>((i * c + j) * row);
            const std::size_t ai_off = static_cast<std::size_t>(i * row);
            const std::size_t bj_off = static_cast<std::size_t>(j * row);
            for (Dim q = 0; q < row; ++q)
                out[dst + static_cast<std::size_t>(q)] = ad[ai_off + static_cast<std::size_t>(q)] - bd[bj_off + static_cast<std::size_t>(q)];
        }
    Shape out_shape;
    out_shape.push_back(n * c);
    out_shape.insert(out_shape.end(), arest.begin(), arest.end());
    ImplPtr ai = a.impl(), bi = b.impl();
    return make_op("pairwise_diff", std::move(out_shape), std::move(out), {a, b},
                   [ai, bi, n, c, row](const std::vector<double>& g) {
                       for (Dim i = 0; i < n; ++i)
                           for (Dim j = 0; j < c; ++j) {
                               const std::size_t src = static_cast<std::size_t>((i * c + j) * row);
                               if (ai->requires_grad) {
                                   const std::size_t dst = static_cast<std::size_t>(i * row);
                                   for (Dim q = 0; q < row; ++q)
                                       ai->grad[dst + static_cast<std::size_t>(q)] += g[src + static_cast<std::size_t>(q)];
                               }
                               if (bi->requires_grad) {
                                   const std::size_t dst = static_cast<std::size_t>(j * row);
                                   for (Dim q = 0; q < row; ++q)
                                       bi->grad[dst + static_cast<std::size_t>(q)] -= g[src + static_cast<std::size_t>(q)];
                               }
                           }
                   });
}

Tensor neighbor_softmax(const Tensor& dist, const std::vector<std::vector<int>>& selected) {
    if (dist.rank() != 2) throw ShapeError("neighbor_softmax: expected r x c, got " + shape_str(dist.shape()));
    const Dim r = dist.dim(0), c = dist.dim(1);
    if (static_cast<Dim>(selected.size()) != r) {
        throw UsageError("neighbor_softmax: one selection per row required");
    }
    const auto& dd = dist.data();
    std::vector<double> out(static_cast<std::size_t>(r * c), 0.0);
    for (Dim i = 0; i < r; ++i) {
        const auto& sel = selected[static_cast<std::size_t>(i)];
        if (sel.empty()) throw UsageError("neighbor_softmax: empty neighbor set for row " + std::to_string(i));
        double dmin = std::numeric_limits<double>::infinity();
        for (int j : sel) {
            if (j < 0 || j >= c) throw UsageError("neighbor_softmax: neighbor index out of range");
            dmin = std::min(dmin, dd[static_cast<std::size_t>(i * c + j)]);
        }
        double s = 0.0;
        for (int j : sel) {
            const double w = std::exp(-(dd[static_cast<std::size_t>(i * c + j)] - dmin));
            out[static_cast<std::size_t>(i * c + j)] = w;
            s += w;
        }
        for (int j : sel) out[static_cast<std::size_t>(i * c + j)] /= s;
    }
    ImplPtr di = dist.impl();
    std::vector<double> saved(out);
    return make_op("neighbor_softmax", dist.shape(), std::move(out), {dist},
                   [di, saved = std::move(saved), selected, c](const std::vector<double>& g) {
                       if (!di->requires_grad) return;
                       for (std::size_t i = 0; i < selected.size(); ++i) {
                           const std::size_t base = i * static_cast<std::size_t>(c);
                           double dot = 0.0;
                           for (int j : selected[i]) dot += g[base + static_cast<std::size_t>(j)] * saved[base + static_cast<std::size_t>(j)];
                           for (int j : selected[i]) {
                               const std::size_t idx = base + static_cast<std::size_t>(j);
                               di->grad[idx] += saved[idx] * (dot - g[idx]);
                           }
                       }
                   });
}

Tensor rowwise_max_over(const Tensor& x, const std::vector<std::vector<int>>& selected) {
    if (x.rank() != 2) throw ShapeError("rowwise_max_over: expected m x d, got " + shape_str(x.shape()));
    const Dim m = x.dim(0), d = x.dim(1);
    const Dim r = static_cast<Dim>(selected.size());
    if (r < 1) throw UsageError("rowwise_max_over: empty selection list");
    const auto& xd = x.data();
    std::vector<double> out(static_cast<std::size_t>(r * d));
    std::vector<int> arg(static_cast<std::size_t>(r * d));
    for (Dim i = 0; i < r; ++i) {
        const auto& sel = selected[static_cast<std::size_t>(i)];
        if (sel.empty()) throw UsageError("rowwise_max_over: empty neighbor set for row " + std::to_string(i));
        for (int j : sel) {
            if (j < 0 || j >= m) throw UsageError("rowwise_max_over: index out of range");
        }
        for (Dim q = 0; q < d; ++q) {
            int best_j = sel[0];
            double best = xd[static_cast<std::size_t>(sel[0] * d + q)];
            for (std::size_t t = 1; t < sel.size(); ++t) {
                const double v = xd[static_cast<std::size_t>(sel[t] * d + q)];
                if (v > best) {
                    best = v;
                    best_j = sel[t];
                }
            }
            out[static_cast<std::size_t>(i * d + q)] = best;
            arg[static_cast<std::size_t>(i * d + q)] = best_j;
        }
    }
    ImplPtr xi = x.impl();
    return make_op("rowwise_max_over", Shape{r, d}, std::move(out), {x},
                   [xi, arg = std::move(arg), d](const std::vector<double>& g) {
                       if (!xi->requires_grad) return;
                       for (std::size_t o = 0; o < g.size(); ++o) {
                           const std::size_t q = o % static_cast<std::size_t>(d);
                           xi->grad[static_cast<std::size_t>(arg[o]) * static_cast<std::size_t>(d) + q] += g[o];
                       }
                   });
}

Tensor detach(const Tensor& x) { return Tensor(x.shape(), x.data(), false); }

}  // namespace mrn::ops
