#pragma once
// ============================================================================
// Differentiable operations on Tensor. All ops build tape nodes when gradient
// tracking is enabled and at least one input requires gradients.
//
// Shape conventions: matrices are {rows, cols}; image tensors for the
// transposed-convolution decoder are {C, H, W}.
// ============================================================================

#include <vector>

#include "lyt/tensor.hpp"

namespace lyt {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, real c);

// Broadcast adds used by the attention stack.
Tensor add_bias(const Tensor& x, const Tensor& b);        // b: 1×n, added to every row
Tensor add_tiled_rows(const Tensor& x, const Tensor& e);  // e: N×d tiled over x's N·T rows
Tensor add_block_rows(const Tensor& x, const Tensor& e);  // e: T×d, row i added to block i

Tensor softmax_rows(const Tensor& x);
Tensor layernorm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias, real eps = 1e-5);
Tensor gelu(const Tensor& x);  // exact erf form
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);

Tensor sum_all(const Tensor& x);                          // -> 1×1
Tensor sq_norm(const Tensor& x);                          // sum of squares -> 1×1
Tensor mean_rows_blocks(const Tensor& x, std::size_t block);

Tensor gather_rows(const Tensor& x, std::vector<std::size_t> idx);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, std::size_t c0, std::size_t c1);
Tensor reshape(const Tensor& x, std::vector<std::size_t> shape);

// Transposed 2-D convolution. x: {Cin,Hin,Win}; w: {Cin,Cout,k,k}; b: {Cout}.
// Output {Cout, (Hin-1)*stride - 2*pad + k, (Win-1)*stride - 2*pad + k}.
Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride,
                        std::size_t pad);

}  // namespace lyt
