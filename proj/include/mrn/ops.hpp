#pragma once

#include <vector>

#include "mrn/tensor.hpp"

namespace mrn::ops {

// --- elementwise ---------------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor neg(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);

// broadcast a length-m row vector over every row of an n x m matrix
Tensor add_rowvec(const Tensor& x, const Tensor& v);

// --- linear algebra ------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);  // (n x k) @ (k x m)

// --- shape ---------------------------------------------------------------
Tensor reshape(const Tensor& x, Shape new_shape);
Tensor flatten(const Tensor& x);  // keep leading dim, fold the rest
Tensor transpose(const Tensor& x);  // 2-D only

// --- convolution / pooling / normalization -------------------------------
// x: B x Cin x H x W, w: Cout x Cin x kh x kw, b: Cout; stride 1
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int padding);
Tensor maxpool2x2(const Tensor& x);

struct BatchNormState {
    std::vector<double> running_mean;
    std::vector<double> running_var;
};

// Per-channel batch normalization. x is B x C x H x W or B x C.
// Training mode normalizes by batch statistics (B >= 2 required) and folds
// them into `state` with momentum; eval mode applies the running statistics.
Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                 bool training, double momentum = 0.9, double eps = 1e-8);

// --- reductions / softmax -------------------------------------------------
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor row_sum(const Tensor& x);  // n x m -> n x 1
Tensor softmax_rows(const Tensor& x);
Tensor log_softmax_rows(const Tensor& x);

// --- indexing ------------------------------------------------------------
// rows of x (n x rest...) selected by index, preserving trailing dims
Tensor gather_rows(const Tensor& x, const std::vector<int>& rows);
// x: n x m, picks x[i, cols[i]] -> n x 1
Tensor pick_per_row(const Tensor& x, const std::vector<int>& cols);

// All pairwise differences between rows of a (n x rest) and b (c x rest):
// output row i*c + j equals a[i] - b[j], shape (n*c) x rest.
Tensor pairwise_diff(const Tensor& a, const Tensor& b);

// Row-wise softmax of exp(-d) restricted to the selected columns, other
// entries exactly zero; stabilized by subtracting the row's selected minimum.
// Every selection must be non-empty.
Tensor neighbor_softmax(const Tensor& dist, const std::vector<std::vector<int>>& selected);

// out[i][c] = max over j in selected[i] of x[j][c] (ties toward lower j).
Tensor rowwise_max_over(const Tensor& x, const std::vector<std::vector<int>>& selected);

// Identity forward; gradient does not flow past this node.
Tensor detach(const Tensor& x);

}  // namespace mrn::ops
